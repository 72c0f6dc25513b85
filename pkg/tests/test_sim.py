import math

import numpy as np
import pytest
import scipy.sparse as sp

from ldrl import (AbsoluteContinuityError, InputError, MdpModel,
                  StochasticMatrix, compose_transition_matrix,
                  dominant_triplet, driven_matrix, empirical_energy_and_kl,
                  exact_marginals, load_packaged_maze, marginal_kl_curve,
                  mean_energy_per_step, occupation_frequencies,
                  per_trajectory_energy_rates, sample_trajectories,
                  shift_rewards, solve, to_mdp)
from ldrl.model import PairIndex
from conftest import tilted_of


def kernel_from_dense(dense):
    dense = np.asarray(dense, dtype=float)
    n = dense.shape[0]
    return StochasticMatrix(sp.csc_array(dense), PairIndex(n, 1))


class TestSampling:
    def test_single_state_constant(self):
        kernel = kernel_from_dense([[1.0]])
        batch = sample_trajectories(kernel, np.array([1.0]), N=20, count=3,
                                    seed=0)
        assert (batch.pairs == 0).all()

    def test_reproducible_for_seed(self, two_state_model):
        tilted = tilted_of(two_state_model)
        sol = dominant_triplet(tilted)
        kernel = driven_matrix(tilted, sol)
        a = sample_trajectories(kernel, sol.steady_state, 50, 10, seed=7)
        b = sample_trajectories(kernel, sol.steady_state, 50, 10, seed=7)
        assert np.array_equal(a.pairs, b.pairs)

    def test_two_state_frequencies_within_three_sigma(self, two_state_model,
                                                      two_state_exact):
        tilted = tilted_of(two_state_model)
        sol = dominant_triplet(tilted)
        kernel = driven_matrix(tilted, sol)
        batch = sample_trajectories(kernel, sol.steady_state, 200, 500, seed=1)
        per_traj = (batch.pairs == 0).mean(axis=1)
        se = per_traj.std(ddof=1) / math.sqrt(batch.count)
        assert abs(per_traj.mean() - two_state_exact["steady"][0]) < 3 * se

    def test_rewards_attached(self, two_state_model):
        tilted = tilted_of(two_state_model)
        sol = dominant_triplet(tilted)
        kernel = driven_matrix(tilted, sol)
        batch = sample_trajectories(kernel, sol.steady_state, 10, 4, seed=3,
                                    rewards=two_state_model.pair_rewards)
        assert batch.rewards.shape == (4, 10)
        assert set(np.unique(batch.rewards)) <= {0.0, -1.0}
        assert np.array_equal(batch.energies, -batch.rewards.sum(axis=1))

    def test_bad_initial_rejected(self):
        kernel = kernel_from_dense([[1.0]])
        with pytest.raises(InputError):
            sample_trajectories(kernel, np.array([0.5]), 5, 2, seed=0)


class TestOccupation:
    def test_deterministic_cycle_uniform(self):
        cycle = np.zeros((3, 3))
        for i in range(3):
            cycle[(i + 1) % 3, i] = 1.0
        kernel = kernel_from_dense(cycle)
        start = np.array([1.0, 0.0, 0.0])
        batch = sample_trajectories(kernel, start, N=9, count=2, seed=0)
        freqs = occupation_frequencies(batch)
        assert np.array_equal(freqs, np.full(3, 1 / 3))

    def test_window_restriction(self):
        cycle = np.zeros((2, 2))
        cycle[1, 0] = cycle[0, 1] = 1.0
        kernel = kernel_from_dense(cycle)
        batch = sample_trajectories(kernel, np.array([1.0, 0.0]), N=4,
                                    count=1, seed=0)
        assert np.array_equal(occupation_frequencies(batch, window=(1, 1)),
                              [1.0, 0.0])
        with pytest.raises(InputError):
            occupation_frequencies(batch, window=(0, 2))

    def test_converges_to_steady_state(self, two_state_model,
                                       two_state_exact):
        tilted = tilted_of(two_state_model)
        sol = dominant_triplet(tilted)
        kernel = driven_matrix(tilted, sol)
        batch = sample_trajectories(kernel, sol.steady_state, 2000, 50, seed=5)
        freqs = occupation_frequencies(batch)
        assert np.abs(freqs - two_state_exact["steady"]).max() < 0.01


class TestExactMarginals:
    def test_single_step_bayes(self, two_state_model):
        tilted = tilted_of(two_state_model)
        uniform = np.array([0.5, 0.5])
        marg = exact_marginals(tilted, uniform, N=1)
        e1 = math.exp(-1.0)
        expected = np.array([1.0, e1]) / (1.0 + e1)
        assert np.abs(marg[0] - expected).max() < 1e-12

    def test_rank_one_bulk_is_steady_state(self, two_state_model,
                                           two_state_exact):
        tilted = tilted_of(two_state_model)
        sol = dominant_triplet(tilted)
        marg = exact_marginals(tilted, np.array([1.0, 0.0]), N=12)
        for t in range(1, 11):  # every interior step, by rank-one collapse
            assert np.abs(marg[t] - two_state_exact["steady"]).max() < 1e-12

    def test_rows_normalized(self, random_mdp_factory):
        model = random_mdp_factory(4, 2, 1.4, seed=23)
        tilted = tilted_of(model)
        uniform = np.full(8, 1 / 8)
        marg = exact_marginals(tilted, uniform, N=40)
        assert np.abs(marg.sum(axis=1) - 1.0).max() < 1e-10

    def test_corridor_bulk_and_ends(self):
        model = shift_rewards(to_mdp(load_packaged_maze("corridor_1x4"),
                                     beta=1.0))
        tilted = tilted_of(model)
        sol = solve(tilted)
        n = 250
        initial = np.zeros(16)
        initial[:4] = 0.25  # start state, prior policy over actions
        marg = exact_marginals(tilted, initial, N=n)
        kl = marginal_kl_curve(marg, sol.steady_state)
        n_star = sol.n_star
        bulk = kl[n_star - 1:n - n_star]
        assert bulk.max() <= 1e-6
        assert kl[0] > 1e-3 and kl[-1] > 1e-3

    def test_consistency_sandwich(self):
        model = shift_rewards(to_mdp(load_packaged_maze("corridor_1x4"),
                                     beta=1.0))
        tilted = tilted_of(model)
        sol = solve(tilted)
        n = 120
        initial = np.zeros(16)
        initial[:4] = 0.25
        marg = exact_marginals(tilted, initial, N=n)
        kl = marginal_kl_curve(marg, sol.steady_state)
        for t in range(sol.n_star, n - sol.n_star + 1):
            bound = 10.0 * math.exp(-min(t, n - t) * sol.xi_gap)
            assert kl[t - 1] <= bound


class TestEmpiricalRates:
    def test_prior_vs_prior_kl_zero(self, two_state_model):
        prior = compose_transition_matrix(two_state_model)
        batch = sample_trajectories(prior, np.array([0.5, 0.5]), 100, 20,
                                    seed=2,
                                    rewards=two_state_model.pair_rewards)
        _, kl = empirical_energy_and_kl(batch, prior, prior)
        assert kl == 0.0

    def test_two_state_rates_within_three_se(self, two_state_model,
                                             two_state_exact):
        tilted = tilted_of(two_state_model)
        sol = dominant_triplet(tilted)
        prior = compose_transition_matrix(two_state_model)
        kernel = driven_matrix(tilted, sol)
        batch = sample_trajectories(kernel, sol.steady_state, 2000, 100,
                                    seed=9,
                                    rewards=two_state_model.pair_rewards)
        energy, kl = empirical_energy_and_kl(batch, prior, kernel)
        rates = per_trajectory_energy_rates(batch)
        se = rates.std(ddof=1) / math.sqrt(batch.count)
        assert abs(energy - two_state_exact["energy"]) < 3 * se
        assert abs(kl - two_state_exact["kl"]) < 0.01

    def test_support_violation_detected(self):
        moving = np.zeros((2, 2))
        moving[1, 0] = moving[0, 1] = 1.0
        kernel = kernel_from_dense(moving)
        batch = sample_trajectories(kernel, np.array([1.0, 0.0]), 10, 2,
                                    seed=0, rewards=np.zeros(2))
        staying = kernel_from_dense(np.eye(2))
        with pytest.raises(AbsoluteContinuityError):
            empirical_energy_and_kl(batch, staying, kernel)

    def test_missing_rewards_rejected(self, two_state_model):
        prior = compose_transition_matrix(two_state_model)
        batch = sample_trajectories(prior, np.array([0.5, 0.5]), 10, 2, seed=0)
        with pytest.raises(InputError):
            empirical_energy_and_kl(batch, prior, prior)
