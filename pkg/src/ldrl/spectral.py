"""Dominant Perron triplet of the tilted matrix and spectral-gap diagnostics.

The solver works entirely in the log domain (the eigenvectors span
e^{O(beta)} orders of magnitude). Two stages:

1. Log-domain power iteration on the tilted matrix and its transpose,
   the plain route that converges whenever the subdominant magnitude is
   well separated.
2. If the iteration stalls -- on cyclic mazes the driven chain becomes
   nearly periodic as beta grows and the magnitude gap collapses like
   e^{-c*beta} -- a Newton solve of the log fixed-point equation
   log(P~^T e^x) = x + log(rho) finishes the left vector at machine
   precision (the Jacobian is the driven kernel, which is well scaled at
   any beta), and the right vector follows from the driven chain's
   stationary distribution computed by GTH elimination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from .errors import InputError, NonConvergenceError, SolverError
from .model import TiltedMatrix
from .numerics import gth_stationary, log_matvec, log_matvec_t, log_normalize

import networkx as nx

_WARMUP_ITERATIONS = 400
_NEWTON_MAX = 80
_GAP_THRESHOLD = 1e-6  # e^{-n* * gap} target for the long-time horizon


@dataclass(frozen=True)
class SpectralSolution:
    """Perron data of a tilted matrix.

    `log_u` / `log_v` are the authoritative representation; the linear
    `u` / `v` views can overflow float64 at large beta. Normalization:
    sum(v) = 1 and sum(u * v) = 1.
    """

    rho: float
    theta: float
    log_u: np.ndarray
    log_v: np.ndarray
    beta: float
    residual: float
    iterations: int
    xi_gap: float | None = None
    n_star: int | None = None

    @property
    def u(self) -> np.ndarray:
        return np.exp(self.log_u)

    @property
    def v(self) -> np.ndarray:
        return np.exp(self.log_v)

    @property
    def steady_state(self) -> np.ndarray:
        """u * v, the bulk state-action distribution; always well scaled."""
        return np.exp(self.log_u + self.log_v)


def theta_from_rho(rho: float, beta: float) -> float:
    """Per-step free-energy rate from the dominant eigenvalue."""
    if not (0.0 < rho <= 1.0):
        raise InputError(f"rho must lie in (0, 1], got {rho!r}")
    if beta <= 0:
        raise InputError(f"beta must be positive, got {beta!r}")
    return -math.log(rho) / beta


def _require_primitive(tilted: TiltedMatrix) -> None:
    g = tilted.sparsity_graph()
    if not nx.is_strongly_connected(g):
        raise InputError("tilted matrix is reducible; Perron pair not unique")
    if not nx.is_aperiodic(g):
        raise InputError("tilted matrix is periodic; Perron pair not unique")


def _newton_left(log_pt: np.ndarray, x0: np.ndarray, log_rho0: float,
                 tol: float) -> tuple[np.ndarray, float, int]:
    """Solve log(P~^T e^x) - x - log_rho = 0 for (x, log_rho), gauge x[i0]=0."""
    m = log_pt.shape[0]
    i0 = int(np.argmax(x0))
    x = x0 - x0[i0]
    log_rho = log_rho0
    eye = np.eye(m)
    for it in range(1, _NEWTON_MAX + 1):
        y = log_matvec_t(log_pt, x)
        g = y - x - log_rho
        res = np.abs(g).max()
        if res < tol:
            return x, log_rho, it
        weights = np.exp(log_pt + x[:, None] - y[None, :])  # column-stochastic
        jac = np.hstack([np.delete(weights.T - eye, i0, axis=1),
                         -np.ones((m, 1))])
        try:
            delta = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(jac, -g, rcond=None)[0]
        dx = np.insert(delta[:-1], i0, 0.0)
        d_rho = delta[-1]
        step = 1.0
        while step > 1e-8:
            x_try = x + step * dx
            rho_try = log_rho + step * d_rho
            g_try = log_matvec_t(log_pt, x_try) - x_try - rho_try
            if np.abs(g_try).max() < (1.0 - 0.25 * step) * res:
                break
            step /= 2.0
        else:
            raise NonConvergenceError("Newton refinement stalled", float(res), it)
        x, log_rho = x_try, rho_try
    y = log_matvec_t(log_pt, x)
    res = float(np.abs(y - x - log_rho).max())
    raise NonConvergenceError("Newton refinement did not converge", res, _NEWTON_MAX)


def _driven_dense(log_pt: np.ndarray, log_u: np.ndarray, log_rho: float) -> np.ndarray:
    """Column-renormalized driven kernel as a dense array."""
    with np.errstate(invalid="ignore"):
        kernel = np.exp(log_pt + log_u[:, None] - log_rho - log_u[None, :])
    kernel[~np.isfinite(kernel)] = 0.0
    return kernel / kernel.sum(axis=0, keepdims=True)


def _right_vector_from_stationary(log_pt: np.ndarray, log_u: np.ndarray,
                                  log_rho: float) -> np.ndarray:
    """log v = log(w) - log(u) with w the driven chain's stationary law.

    GTH gives w with relative accuracy but underflows entries below
    ~1e-308; log-domain fixed-point sweeps fill those in (they are
    slaved to the representable ones), leaving the GTH-exact bulk
    untouched up to rounding.
    """
    m = log_pt.shape[0]
    w = gth_stationary(_driven_dense(log_pt, log_u, log_rho))
    with np.errstate(divide="ignore"):
        log_v = np.log(w) - log_u
    floor = np.min(log_v[np.isfinite(log_v)])
    log_v = np.where(np.isfinite(log_v), log_v, floor - 100.0)
    for _ in range(4 * m):
        log_v_next = log_matvec(log_pt, log_v) - log_rho
        if np.abs(log_v_next - log_v).max() < 1e-14:
            log_v = log_v_next
            break
        log_v = log_v_next
    return log_v


def dominant_triplet(tilted: TiltedMatrix, tol: float = 1e-12,
                     max_iter: int = 100_000, seed: int = 0,
                     method: str = "auto") -> SpectralSolution:
    """Dominant eigenvalue and positive left/right eigenvectors.

    `method="auto"` (default) tries log-domain power iteration and falls
    back to the Newton + GTH path when the iteration stalls;
    `method="power"` forbids the fallback and raises NonConvergenceError
    on a stall, reporting the last residual.
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    if method not in ("auto", "power"):
        raise InputError(f"unknown method {method!r}")
    _require_primitive(tilted)
    m = tilted.size
    log_pt = tilted.log_dense()

    x = np.zeros(m)
    if seed != 0:
        # deterministic positive perturbation, for degeneracy probing only
        x = x + 1e-6 * np.random.default_rng(seed).random(m)
    log_v = np.full(m, -math.log(m))
    log_rho = 0.0
    budget = max_iter if method == "power" else min(_WARMUP_ITERATIONS, max_iter)

    res = math.inf
    iterations = 0
    for iterations in range(1, budget + 1):
        y = log_matvec_t(log_pt, x)
        vy = log_matvec(log_pt, log_v)
        log_rho_new = logsumexp(vy)
        res_u = np.abs(np.expm1(y - x - log_rho_new)).max()
        res_v = np.abs(np.expm1(vy - log_v - log_rho_new)).max()
        rho_change = abs(log_rho_new - log_rho)
        x = y - y.max()
        log_v = log_normalize(vy)
        log_rho = log_rho_new
        res = max(res_u, res_v)
        if res < tol and rho_change < tol:
            break
    else:
        if method == "power":
            raise NonConvergenceError("power iteration did not converge",
                                      float(res), iterations)
        x, log_rho, newton_its = _newton_left(log_pt, x, log_rho, tol)
        iterations += newton_its
        log_v = _right_vector_from_stationary(log_pt, x, log_rho)

    log_v = log_normalize(log_v)
    x = x - logsumexp(x + log_v)
    res_u = np.abs(np.expm1(log_matvec_t(log_pt, x) - x - log_rho)).max()
    res_v = np.abs(np.expm1(log_matvec(log_pt, log_v) - log_v - log_rho)).max()
    residual = float(max(res_u, res_v))

    if log_rho > 0:
        if log_rho > 100 * tol:
            raise SolverError(f"dominant eigenvalue estimate exp({log_rho}) > 1 "
                              "for a sub-stochastic matrix")
        log_rho = 0.0
    rho = math.exp(log_rho)
    return SpectralSolution(
        rho=rho,
        theta=theta_from_rho(rho, tilted.beta),
        log_u=x,
        log_v=log_v,
        beta=tilted.beta,
        residual=residual,
        iterations=iterations,
    )


def spectral_gap(tilted: TiltedMatrix, sol: SpectralSolution,
                 max_iter: int = 2000, gap_floor: float = 1e-12,
                 window: int = 50) -> tuple[float, int | None]:
    """Estimate beta*(xi - theta) and the horizon where the bulk limit holds.

    Deflated power iteration runs on the driven kernel (similar to
    P~/rho, hence identical eigenvalue ratios, but with O(1) entries at
    any beta). The subdominant magnitude is read off a windowed
    geometric mean of the norm growth, which stays stable when the
    subdominant pair is complex. Returns (gap, n_star); n_star is None
    when the gap is degenerate (long-time limit out of reach).
    """
    m = tilted.size
    if m == 1:
        return math.inf, 1
    kernel = _driven_dense(tilted.log_dense(), sol.log_u, math.log(sol.rho))
    steady = np.exp(sol.log_u + sol.log_v)
    x = np.zeros(m)
    x[0] = 1.0
    x = x - steady  # remove the Perron component
    norm = np.linalg.norm(x)
    if norm < 1e-200:
        return math.inf, 1
    x /= norm
    growths = []
    for _ in range(max_iter):
        x = kernel @ x - steady * x.sum()
        norm = np.linalg.norm(x)
        if norm < 1e-200:
            return math.inf, 1
        growths.append(math.log(norm))
        x /= norm
        if len(growths) >= 2 * window:
            current = float(np.mean(growths[-window:]))
            previous = float(np.mean(growths[-2 * window:-window]))
            if abs(current - previous) < 1e-7:
                break
    est = float(np.mean(growths[-window:])) if growths else -math.inf
    gap = max(-est, 0.0)
    if gap <= gap_floor:
        return gap, None
    n_star = max(1, math.ceil(-math.log(_GAP_THRESHOLD) / gap))
    return gap, n_star


def solve(tilted: TiltedMatrix, tol: float = 1e-12, max_iter: int = 100_000,
          seed: int = 0, method: str = "auto",
          with_gap: bool = True) -> SpectralSolution:
    """dominant_triplet plus the gap diagnostics in one call."""
    sol = dominant_triplet(tilted, tol=tol, max_iter=max_iter, seed=seed,
                           method=method)
    if with_gap:
        gap, n_star = spectral_gap(tilted, sol)
        sol = replace(sol, xi_gap=gap, n_star=n_star)
    return sol


def solution_to_dict(sol: SpectralSolution) -> dict:
    """JSON document; log_u/log_v are authoritative at large beta."""
    return {
        "rho": sol.rho,
        "theta": sol.theta,
        "u": sol.u.tolist(),
        "v": sol.v.tolist(),
        "log_u": sol.log_u.tolist(),
        "log_v": sol.log_v.tolist(),
        "residual": sol.residual,
        "iterations": sol.iterations,
        "xi_gap": sol.xi_gap,
        "n_star": sol.n_star,
    }
