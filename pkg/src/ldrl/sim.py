"""Trajectory sampling and exact finite-horizon conditioned marginals.

Used to validate the bulk (steady-state) approximation and the analytic
energy/relative-entropy rates against simulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AbsoluteContinuityError, InputError, SolverError
from .model import PairIndex, StochasticMatrix, TiltedMatrix
from .numerics import log_matvec, log_matvec_t
from scipy.special import logsumexp


@dataclass(frozen=True)
class TrajectoryBatch:
    """`count` pair-chain trajectories of common length N.

    `pairs[k, t]` is the flat state-action index of trajectory k at time
    t+1; rewards (if attached) follow the same layout.
    """

    pairs: np.ndarray            # (count, N) int
    index: PairIndex
    rewards: np.ndarray | None = None  # (count, N)

    @property
    def count(self) -> int:
        return self.pairs.shape[0]

    @property
    def length(self) -> int:
        return self.pairs.shape[1]

    @property
    def states(self) -> np.ndarray:
        return self.index.states_of(self.pairs)

    @property
    def actions(self) -> np.ndarray:
        return self.index.actions_of(self.pairs)

    @property
    def returns(self) -> np.ndarray:
        """Total reward R of each trajectory."""
        if self.rewards is None:
            raise InputError("batch carries no rewards")
        return self.rewards.sum(axis=1)

    @property
    def energies(self) -> np.ndarray:
        """Accumulated energetic cost E = -R of each trajectory."""
        return -self.returns


def sample_trajectories(kernel: StochasticMatrix, initial: np.ndarray,
                        N: int, count: int, seed: int,
                        rewards: np.ndarray | None = None) -> TrajectoryBatch:
    """Draw `count` i.i.d. length-N trajectories of the pair chain.

    Each trajectory owns an independent RNG substream, so results are
    reproducible for a given seed regardless of batching.
    """
    if N < 1 or count < 1:
        raise InputError("N and count must be >= 1")
    initial = np.asarray(initial, dtype=float).reshape(-1)
    m = kernel.index.size
    if initial.shape != (m,) or abs(initial.sum() - 1.0) > 1e-10:
        raise InputError("initial must be a distribution over pairs")
    cum_init = np.cumsum(initial)
    cum_kernel = np.cumsum(kernel.dense(), axis=0)
    streams = [np.random.default_rng(s)
               for s in np.random.SeedSequence(seed).spawn(count)]
    uniforms = np.stack([st.random(N) for st in streams])  # (count, N)
    pairs = np.empty((count, N), dtype=np.int64)
    pairs[:, 0] = np.minimum(np.searchsorted(cum_init, uniforms[:, 0]), m - 1)
    for t in range(1, N):
        cols = cum_kernel[:, pairs[:, t - 1]]          # (m, count)
        nxt = (cols < uniforms[None, :, t]).sum(axis=0)
        pairs[:, t] = np.minimum(nxt, m - 1)
    reward_rows = None
    if rewards is not None:
        reward_rows = np.asarray(rewards, dtype=float).reshape(-1)[pairs]
    return TrajectoryBatch(pairs=pairs, index=kernel.index, rewards=reward_rows)


def occupation_frequencies(batch: TrajectoryBatch,
                           window: tuple[int, int] | None = None) -> np.ndarray:
    """Empirical visit distribution over pairs.

    `window=(lo, hi)` restricts to time steps lo..hi (1-based,
    inclusive), e.g. the bulk of the trajectory.
    """
    pairs = batch.pairs
    if window is not None:
        lo, hi = window
        if not (1 <= lo <= hi <= batch.length):
            raise InputError(f"window {window} outside 1..{batch.length}")
        pairs = pairs[:, lo - 1:hi]
    counts = np.bincount(pairs.ravel(), minlength=batch.index.size)
    return counts / counts.sum()


def exact_marginals(tilted: TiltedMatrix, initial: np.ndarray,
                    N: int) -> np.ndarray:
    """Conditioned per-step marginals p(z_t | optimal for 1..N), t = 1..N.

    Forward messages accumulate `initial` through the tilted matrix;
    backward messages are its transposed powers applied to the all-ones
    vector (the probability of staying optimal from t on). Row t of the
    result is the normalized product. All messages are log-domain.
    """
    if N < 1:
        raise InputError("N must be >= 1")
    initial = np.asarray(initial, dtype=float).reshape(-1)
    m = tilted.size
    if initial.shape != (m,) or abs(initial.sum() - 1.0) > 1e-10:
        raise InputError("initial must be a distribution over pairs")
    log_pt = tilted.log_dense()
    with np.errstate(divide="ignore"):
        forward = np.log(initial)
    forwards = np.empty((N, m))
    forwards[0] = forward
    for t in range(1, N):
        forward = log_matvec(log_pt, forward)
        forwards[t] = forward
    marginals = np.empty((N, m))
    backward = np.zeros(m)  # log of ones = P(optimal over an empty suffix)
    for t in range(N, 0, -1):
        backward = log_matvec_t(log_pt, backward)  # now sum_k [P~^(N-t+1)]_{kj}
        logits = forwards[t - 1] + backward
        norm = logsumexp(logits)
        if not np.isfinite(norm):
            raise SolverError(f"marginal at step {t} lost all mass")
        marginals[t - 1] = np.exp(logits - norm)
    return marginals


def marginal_kl_curve(marginals: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """KL(p_t || reference) for each row of `marginals`."""
    reference = np.asarray(reference, dtype=float).reshape(-1)
    out = np.empty(marginals.shape[0])
    for t, p in enumerate(marginals):
        mask = p > 0
        if (reference[mask] <= 0).any():
            out[t] = np.inf
            continue
        out[t] = float(p[mask] @ np.log(p[mask] / reference[mask]))
    return out


def per_trajectory_energy_rates(batch: TrajectoryBatch) -> np.ndarray:
    """E_tau / N for each trajectory (for standard-error estimates)."""
    return batch.energies / batch.length


def empirical_energy_and_kl(batch: TrajectoryBatch,
                            prior_kernel: StochasticMatrix,
                            generating_kernel: StochasticMatrix) -> tuple[float, float]:
    """Mean per-step energetic cost and KL log-ratio along the batch.

    The KL term averages (1/N) * sum_t log(G[z_{t+1}|z_t] / P[z_{t+1}|z_t])
    over trajectories; with G the generating kernel this estimates the
    relative entropy rate of G w.r.t. the prior P.
    """
    if batch.rewards is None:
        raise InputError("batch carries no rewards; sample with rewards=")
    g = generating_kernel.dense()
    p = prior_kernel.dense()
    src = batch.pairs[:, :-1].ravel()
    dst = batch.pairs[:, 1:].ravel()
    g_vals = g[dst, src]
    p_vals = p[dst, src]
    if (p_vals <= 0).any() or (g_vals <= 0).any():
        raise AbsoluteContinuityError("visited transition outside a kernel's "
                                      "support")
    logratio = np.log(g_vals / p_vals).reshape(batch.count, -1)
    energy_rate = float(per_trajectory_energy_rates(batch).mean())
    kl_rate = float((logratio.sum(axis=1) / batch.length).mean())
    return energy_rate, kl_rate
