"""Entropy-regularized tabular RL through the tilted-matrix spectral route.

The prior chain over state-action pairs is reward-tilted into a
sub-stochastic matrix whose Perron triplet (rho, u, v) yields, in the
long-horizon limit, the optimal policy, dynamics, value functions and
steady state of the entropy-regularized control problem. A soft-Bellman
dynamic-programming oracle and a model-free TD learner of (u, theta)
cross-validate the spectral route.
"""

from .model import (MdpModel, PairIndex, StochasticMatrix, TiltedMatrix,
                    ExtendedMatrix, ValidationReport, shift_rewards,
                    compose_transition_matrix, build_tilted_matrix,
                    build_extended_matrix, validate_model, model_to_dict,
                    model_from_dict)
from .spectral import (SpectralSolution, dominant_triplet, theta_from_rho,
                       spectral_gap, solve)
from .driven import (DrivenSolution, driven_matrix, optimal_policy,
                     optimal_dynamics, optimal_initial_distribution,
                     steady_state_distribution, value_functions,
                     mean_energy_per_step, kl_rate, solve_driven)
from .dp import ValueTables, soft_bellman_backup, solve_finite_horizon, \
    compare_with_spectral
from .gridworld import (GridMaze, parse_maze, to_mdp, env_step,
                        load_packaged_maze, start_pair_distribution)
from .learning import (Schedule, ScheduleConfig, LearningState, TrainResult,
                       initial_state, td_step, train, extract_policy)
from .sim import (TrajectoryBatch, sample_trajectories, occupation_frequencies,
                  exact_marginals, marginal_kl_curve, empirical_energy_and_kl,
                  per_trajectory_energy_rates)
from .errors import (InputError, SolverError, NonConvergenceError,
                     DegenerateVectorError, AbsoluteContinuityError)

__version__ = "0.1.0"
