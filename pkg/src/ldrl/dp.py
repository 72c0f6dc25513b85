"""Exact finite-horizon soft-Bellman dynamic programming.

Independent oracle for the spectral route: the backward recursion
computes beta*Q_N(s,a) = log sum_j [P~^N]_{j,(s,a)} step by step, so at
large N the two must agree up to the subdominant contribution. All
recursions are log-domain (beta*Q reaches O(-beta*N), far below linear
float range).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import InputError, SolverError
from .model import MdpModel


@dataclass(frozen=True)
class ValueTables:
    """Soft value tables Q_k, V_k for k = 1..N (all kept only on request)."""

    q: np.ndarray            # final Q_N, (n_states, n_actions)
    v: np.ndarray            # final V_N, (n_states,)
    n_steps: int
    q_steps: list | None = None   # Q_1..Q_N when keep_all
    v_steps: list | None = None


def _log_policy(model: MdpModel) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(model.prior_policy)


def state_values(model: MdpModel, q: np.ndarray) -> np.ndarray:
    """V(s) = (1/beta) log sum_a pi(a|s) exp(beta Q(s,a))."""
    return logsumexp(_log_policy(model) + model.beta * q, axis=1) / model.beta


def soft_bellman_backup(model: MdpModel, q_prev: np.ndarray) -> np.ndarray:
    """One backward step: Q = r + (1/beta) log E_{s'}[exp(beta V'(s'))]."""
    q_prev = np.asarray(q_prev, dtype=float)
    if not np.isfinite(q_prev).all():
        raise InputError("q_prev must be finite")
    beta_v = model.beta * state_values(model, q_prev)
    with np.errstate(divide="ignore"):
        log_dyn = np.log(model.dynamics)
    q_next = model.rewards + logsumexp(log_dyn + beta_v[None, None, :],
                                       axis=2) / model.beta
    if not np.isfinite(q_next).all():
        s, a = np.argwhere(~np.isfinite(q_next))[0]
        raise SolverError(f"soft backup produced a non-finite value at "
                          f"(state {s}, action {a})")
    return q_next


def solve_finite_horizon(model: MdpModel, N: int,
                         keep_all: bool = False) -> ValueTables:
    """Backward recursion from Q_1 = r over N steps."""
    if N < 1:
        raise InputError("N must be >= 1")
    q = np.array(model.rewards, dtype=float)
    q_steps = [q] if keep_all else None
    v_steps = [state_values(model, q)] if keep_all else None
    for _ in range(N - 1):
        q = soft_bellman_backup(model, q)
        if keep_all:
            q_steps.append(q)
            v_steps.append(state_values(model, q))
    return ValueTables(q=q, v=state_values(model, q), n_steps=N,
                       q_steps=q_steps, v_steps=v_steps)


def compare_with_spectral(dp_q: np.ndarray,
                          spectral_q: np.ndarray) -> tuple[float, float, float]:
    """(rmsd, max_abs, pearson_r) between two Q tables on one index space."""
    dp_q = np.asarray(dp_q, dtype=float)
    spectral_q = np.asarray(spectral_q, dtype=float)
    if dp_q.shape != spectral_q.shape:
        raise InputError(f"shape mismatch: {dp_q.shape} vs {spectral_q.shape}")
    diff = dp_q - spectral_q
    rmsd = float(np.sqrt(np.mean(diff ** 2)))
    max_abs = float(np.abs(diff).max())
    a = dp_q.ravel() - dp_q.mean()
    b = spectral_q.ravel() - spectral_q.mean()
    denom = np.sqrt((a @ a) * (b @ b))
    if denom == 0.0:
        pearson = 1.0 if max_abs == 0.0 else float("nan")
    else:
        pearson = float((a @ b) / denom)
    return rmsd, max_abs, pearson
