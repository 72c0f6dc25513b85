"""Optimal-control objects derived from the spectral solution.

The conditioned chain is obtained from the prior chain by reweighting
with the left Perron vector (a generalized Doob transform); everything
here is a pure function of (model, spectral solution). All algebra runs
on log_u so no quantity is exponentiated before it is known to be a
probability or a value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from .errors import AbsoluteContinuityError, DegenerateVectorError, InputError
from .model import MdpModel, StochasticMatrix, TiltedMatrix
from .spectral import SpectralSolution


@dataclass(frozen=True)
class DrivenSolution:
    """Everything the conditioned dynamics determines, at horizon N.

    The renormalization corrections record how far the raw Doob-weighted
    kernels were from exactly stochastic before columns/rows were
    rescaled (zero up to the eigen-solve residual).
    """

    driven_matrix: StochasticMatrix
    optimal_policy: np.ndarray    # (n_states, n_actions)
    optimal_dynamics: np.ndarray  # (n_states, n_actions, n_states)
    optimal_initial: np.ndarray   # over pairs
    steady_state: np.ndarray      # over pairs, u*v
    q_table: np.ndarray           # (n_states, n_actions)
    v_table: np.ndarray           # (n_states,)
    horizon: int
    column_correction: float
    row_correction: float
    factorization_error: float


def _require_positive(sol: SpectralSolution) -> None:
    if not np.isfinite(sol.log_u).all():
        raise DegenerateVectorError("left eigenvector has entries below the "
                                    "positivity floor")


def _driven_dense_normalized(tilted: TiltedMatrix,
                             sol: SpectralSolution) -> tuple[np.ndarray, float]:
    log_pt = tilted.log_dense()
    with np.errstate(invalid="ignore"):
        kernel = np.exp(log_pt + sol.log_u[:, None]
                        - np.log(sol.rho) - sol.log_u[None, :])
    kernel[~np.isfinite(kernel)] = 0.0
    colsums = kernel.sum(axis=0)
    correction = float(np.abs(colsums - 1.0).max())
    return kernel / colsums, correction


def driven_matrix(tilted: TiltedMatrix, sol: SpectralSolution) -> StochasticMatrix:
    """Doob-transformed kernel [P_d]_{ji} = P~_{ji} u_j / (rho * u_i)."""
    _require_positive(sol)
    kernel, _ = _driven_dense_normalized(tilted, sol)
    return StochasticMatrix(sp.csc_array(kernel), tilted.index)


def optimal_policy(model: MdpModel, sol: SpectralSolution) -> np.ndarray:
    """pi*(a|s) proportional to pi(a|s) * u(s,a), normalized per state."""
    _require_positive(sol)
    with np.errstate(divide="ignore"):
        logits = np.log(model.prior_policy) \
            + sol.log_u.reshape(model.n_states, model.n_actions)
    norm = logsumexp(logits, axis=1, keepdims=True)
    assert np.isfinite(norm).all(), "state with zero policy mass"
    return np.exp(logits - norm)


def optimal_dynamics(model: MdpModel, sol: SpectralSolution) -> np.ndarray:
    """Conditioned transition kernel p*(s'|s,a), rows renormalized."""
    return _optimal_dynamics_with_correction(model, sol)[0]


def _optimal_dynamics_with_correction(model: MdpModel,
                                      sol: SpectralSolution) -> tuple[np.ndarray, float]:
    _require_positive(sol)
    log_u = sol.log_u.reshape(model.n_states, model.n_actions)
    with np.errstate(divide="ignore"):
        log_pol = np.log(model.prior_policy)
        log_dyn = np.log(model.dynamics)
    # log m(s') = log sum_a' pi(a'|s') u(s',a')
    log_m = logsumexp(log_pol + log_u, axis=1)
    log_rho = np.log(sol.rho)
    log_p = (log_dyn + log_m[None, None, :]
             + model.beta * model.rewards[:, :, None]
             - log_rho - log_u[:, :, None])
    with np.errstate(invalid="ignore"):
        p_star = np.exp(log_p)
    p_star[~np.isfinite(p_star)] = 0.0
    rowsums = p_star.sum(axis=2)
    correction = float(np.abs(rowsums - 1.0).max())
    return p_star / rowsums[:, :, None], correction


def optimal_initial_distribution(model: MdpModel, prior_initial: np.ndarray,
                                 sol: SpectralSolution) -> np.ndarray:
    """Posterior over the first pair, proportional to prior * u."""
    _require_positive(sol)
    prior_initial = np.asarray(prior_initial, dtype=float).reshape(-1)
    if prior_initial.shape != sol.log_u.shape:
        raise InputError("prior_initial must be a distribution over pairs")
    if abs(prior_initial.sum() - 1.0) > 1e-10 or prior_initial.min() < 0:
        raise InputError("prior_initial is not a probability distribution")
    with np.errstate(divide="ignore"):
        logits = np.log(prior_initial) + sol.log_u
    total = logsumexp(logits)
    if not np.isfinite(total):
        raise DegenerateVectorError("prior has no overlap with the eigenvector "
                                    "support")
    return np.exp(logits - total)


def steady_state_distribution(sol: SpectralSolution) -> np.ndarray:
    """Bulk distribution u * v; fixed point of the driven kernel."""
    return sol.steady_state


def value_functions(model: MdpModel, sol: SpectralSolution,
                    N: int) -> tuple[np.ndarray, np.ndarray]:
    """Soft value tables at horizon N.

    Q(s,a) = -theta*N + log(u)/beta and V aggregates Q over the prior
    policy. The free energy is -Q; per step it tends to theta.
    """
    if N < 1:
        raise InputError("horizon N must be >= 1")
    _require_positive(sol)
    log_u = sol.log_u.reshape(model.n_states, model.n_actions)
    q = -sol.theta * N + log_u / model.beta
    with np.errstate(divide="ignore"):
        log_pol = np.log(model.prior_policy)
    v = -sol.theta * N + logsumexp(log_pol + log_u, axis=1) / model.beta
    return q, v


def mean_energy_per_step(sol: SpectralSolution, rewards: np.ndarray) -> float:
    """Steady-state energetic cost rate, -sum u*v*r (nonnegative for r<=0)."""
    return float(-(sol.steady_state @ np.asarray(rewards, dtype=float).reshape(-1)))


def kl_rate(driven: StochasticMatrix, prior: StochasticMatrix,
            steady: np.ndarray) -> float:
    """Relative entropy per step of the driven chain w.r.t. the prior chain."""
    d = driven.dense()
    p = prior.dense()
    support = d > 0
    if (p[support] <= 0).any():
        raise AbsoluteContinuityError("driven kernel puts mass outside the "
                                      "prior kernel's support")
    terms = np.zeros_like(d)
    terms[support] = d[support] * np.log(d[support] / p[support])
    return float(steady @ terms.sum(axis=0))


def solve_driven(model: MdpModel, tilted: TiltedMatrix, sol: SpectralSolution,
                 N: int, prior_initial: np.ndarray | None = None) -> DrivenSolution:
    """Assemble the full set of optimal-control objects at horizon N."""
    _require_positive(sol)
    kernel, col_corr = _driven_dense_normalized(tilted, sol)
    policy = optimal_policy(model, sol)
    dynamics, row_corr = _optimal_dynamics_with_correction(model, sol)
    if prior_initial is None:
        prior_initial = np.full(sol.log_u.size, 1.0 / sol.log_u.size)
    initial = optimal_initial_distribution(model, prior_initial, sol)
    q, v = value_functions(model, sol, N)
    reconstructed = np.einsum("sat,tb->tbsa", dynamics, policy).reshape(
        kernel.shape)
    fact_err = float(np.abs(reconstructed - kernel).max())
    return DrivenSolution(
        driven_matrix=StochasticMatrix(sp.csc_array(kernel), tilted.index),
        optimal_policy=policy,
        optimal_dynamics=dynamics,
        optimal_initial=initial,
        steady_state=sol.steady_state,
        q_table=q,
        v_table=v,
        horizon=N,
        column_correction=col_corr,
        row_correction=row_corr,
        factorization_error=fact_err,
    )


def driven_to_dict(dsol: DrivenSolution) -> dict:
    coo = dsol.driven_matrix.matrix.tocoo()
    return {
        "driven_matrix": [[int(j), int(i), float(x)] for j, i, x in
                          zip(coo.row, coo.col, coo.data)],
        "optimal_policy": dsol.optimal_policy.tolist(),
        "optimal_dynamics": [[int(s), int(a), int(s2), float(p)] for s, a, s2, p in
                             zip(*np.nonzero(dsol.optimal_dynamics),
                                 dsol.optimal_dynamics[np.nonzero(dsol.optimal_dynamics)])],
        "optimal_initial": dsol.optimal_initial.tolist(),
        "steady_state": dsol.steady_state.tolist(),
        "q": dsol.q_table.tolist(),
        "v": dsol.v_table.tolist(),
        "horizon": dsol.horizon,
        "column_correction": dsol.column_correction,
        "row_correction": dsol.row_correction,
        "factorization_error": dsol.factorization_error,
    }
