"""Tabular MDP data model and the transition / tilted / extended matrices.

Matrix orientation convention, used everywhere in this package: columns
index the source state-action pair i=(s,a), rows the destination pair
j=(s',a'), so kernels are column-stochastic and a step of the chain is
`x_next = P @ x`. Pairs are flattened as i = s * n_actions + a.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import networkx as nx
import numpy as np
import scipy.sparse as sp

from .errors import InputError

NORM_TOL = 1e-12


@dataclass(frozen=True)
class PairIndex:
    """Bijection between flat pair indices and (state, action) tuples."""

    n_states: int
    n_actions: int

    @property
    def size(self) -> int:
        return self.n_states * self.n_actions

    def encode(self, state: int, action: int) -> int:
        return state * self.n_actions + action

    def decode(self, index: int) -> tuple[int, int]:
        return divmod(index, self.n_actions)

    def states_of(self, indices: np.ndarray) -> np.ndarray:
        return np.asarray(indices) // self.n_actions

    def actions_of(self, indices: np.ndarray) -> np.ndarray:
        return np.asarray(indices) % self.n_actions


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MdpModel:
    """Finite MDP with a prior policy and an inverse temperature.

    Rewards are dimensionless energies with E = -R. `reward_shift`
    records the constant removed by `shift_rewards` so that reported
    values can be mapped back to the original units (Q_orig = Q + N*shift).

    Construction checks shapes and basic domains only; distributional
    invariants are reported by `validate_model` and enforced by the
    operations that need them.
    """

    n_states: int
    n_actions: int
    prior_policy: np.ndarray  # (n_states, n_actions)
    dynamics: np.ndarray      # (n_states, n_actions, n_states)
    rewards: np.ndarray       # (n_states, n_actions)
    beta: float
    reward_shift: float = 0.0

    def __post_init__(self):
        if self.n_states < 1 or self.n_actions < 1:
            raise InputError("n_states and n_actions must be positive")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise InputError(f"beta must be a positive real, got {self.beta}")
        object.__setattr__(self, "prior_policy", _freeze(self.prior_policy))
        object.__setattr__(self, "dynamics", _freeze(self.dynamics))
        object.__setattr__(self, "rewards", _freeze(self.rewards))
        if self.prior_policy.shape != (self.n_states, self.n_actions):
            raise InputError(f"prior_policy shape {self.prior_policy.shape} != "
                             f"({self.n_states}, {self.n_actions})")
        if self.dynamics.shape != (self.n_states, self.n_actions, self.n_states):
            raise InputError(f"dynamics shape {self.dynamics.shape} != "
                             f"({self.n_states}, {self.n_actions}, {self.n_states})")
        if self.rewards.shape != (self.n_states, self.n_actions):
            raise InputError(f"rewards shape {self.rewards.shape} != "
                             f"({self.n_states}, {self.n_actions})")

    @property
    def pair_index(self) -> PairIndex:
        return PairIndex(self.n_states, self.n_actions)

    @property
    def pair_rewards(self) -> np.ndarray:
        """Rewards flattened over the pair index."""
        return self.rewards.reshape(-1)


@dataclass(frozen=True)
class StochasticMatrix:
    """Column-stochastic kernel over state-action pairs (CSC storage)."""

    matrix: sp.csc_array
    index: PairIndex

    def __post_init__(self):
        m = self.matrix
        if m.shape != (self.index.size, self.index.size):
            raise InputError(f"matrix shape {m.shape} != pair space {self.index.size}")
        data = m.data
        if data.size and (data.min() < -NORM_TOL or data.max() > 1 + NORM_TOL):
            raise InputError("kernel entries must lie in [0, 1]")
        colsums = np.asarray(m.sum(axis=0)).ravel()
        bad = np.abs(colsums - 1.0) > NORM_TOL
        if bad.any():
            i = int(np.argmax(np.abs(colsums - 1.0)))
            raise InputError(f"column {i} sums to {colsums[i]!r}, expected 1")

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def log_dense(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.dense())


@dataclass(frozen=True)
class TiltedMatrix:
    """Prior kernel with column i scaled by exp(beta * r_i); sub-stochastic."""

    matrix: sp.csc_array
    index: PairIndex
    rewards: np.ndarray  # flat over pairs
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "rewards", _freeze(self.rewards))
        colsums = np.asarray(self.matrix.sum(axis=0)).ravel()
        if (colsums <= 0).any() or (colsums > 1 + NORM_TOL).any():
            raise InputError("tilted column sums must lie in (0, 1]")

    @property
    def size(self) -> int:
        return self.index.size

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def log_dense(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.dense())

    def sparsity_graph(self) -> nx.DiGraph:
        """Directed graph of the nonzero pattern (edges i -> j)."""
        coo = self.matrix.tocoo()
        g = nx.DiGraph()
        g.add_nodes_from(range(self.size))
        g.add_edges_from(zip(coo.col.tolist(), coo.row.tolist()))
        return g


@dataclass(frozen=True)
class ExtendedMatrix:
    """Tilted matrix embedded in a stochastic chain with an absorbing state.

    The extra state absorbs the per-column probability deficit
    delta_i = 1 - exp(beta * r_i); landing there means the trajectory
    has stopped being optimal.
    """

    matrix: sp.csc_array
    delta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "delta", _freeze(self.delta))
        if (self.delta < -NORM_TOL).any():
            raise InputError("absorption probabilities must be nonnegative")
        colsums = np.asarray(self.matrix.sum(axis=0)).ravel()
        if np.abs(colsums - 1.0).max() > NORM_TOL:
            raise InputError("extended matrix must be column-stochastic")


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of validate_model: empty `violations` means a usable model."""

    violations: list = field(default_factory=list)
    strongly_connected: bool = False
    aperiodic: bool = False

    @property
    def primitive(self) -> bool:
        return self.strongly_connected and self.aperiodic

    @property
    def ok(self) -> bool:
        return not self.violations


def shift_rewards(model: MdpModel) -> MdpModel:
    """Normalize rewards so the maximum is zero, recording the shift."""
    if not np.isfinite(model.rewards).all():
        raise InputError("rewards contain non-finite entries")
    shift = float(model.rewards.max())
    if shift == 0.0:
        return model
    return replace(model, rewards=model.rewards - shift,
                   reward_shift=model.reward_shift + shift)


def _require_distributions(model: MdpModel) -> None:
    pol_err = np.abs(model.prior_policy.sum(axis=1) - 1.0).max()
    dyn_err = np.abs(model.dynamics.sum(axis=2) - 1.0).max()
    if pol_err > NORM_TOL or dyn_err > NORM_TOL:
        raise InputError(f"model distributions not normalized "
                         f"(policy err {pol_err:.2e}, dynamics err {dyn_err:.2e})")
    if model.prior_policy.min() < 0 or model.dynamics.min() < 0:
        raise InputError("model contains negative probabilities")


def compose_transition_matrix(model: MdpModel) -> StochasticMatrix:
    """Pair-space kernel P[j, i] = p(s'|s,a) * pi(a'|s') of the prior chain."""
    _require_distributions(model)
    n_a = model.n_actions
    src_s, src_a, dst_s = np.nonzero(model.dynamics)
    probs = model.dynamics[src_s, src_a, dst_s]
    cols, rows, data = [], [], []
    for a2 in range(n_a):
        pol = model.prior_policy[dst_s, a2]
        keep = pol > 0
        cols.append(src_s[keep] * n_a + src_a[keep])
        rows.append(dst_s[keep] * n_a + a2)
        data.append(probs[keep] * pol[keep])
    index = model.pair_index
    mat = sp.csc_array(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(index.size, index.size),
    )
    return StochasticMatrix(mat, index)


def build_tilted_matrix(model: MdpModel, transition: StochasticMatrix) -> TiltedMatrix:
    """Scale column i of the prior kernel by exp(beta * r_i)."""
    if model.rewards.max() > 0:
        raise InputError("rewards must be normalized to r <= 0 before tilting "
                         "(apply shift_rewards)")
    weights = np.exp(model.beta * model.pair_rewards)
    mat = transition.matrix @ sp.diags_array(weights, format="csc")
    return TiltedMatrix(sp.csc_array(mat), transition.index,
                        model.pair_rewards, model.beta)


def build_extended_matrix(tilted: TiltedMatrix) -> ExtendedMatrix:
    """Append the absorbing state that restores column-stochasticity."""
    m = tilted.size
    delta = 1.0 - np.exp(tilted.beta * tilted.rewards)
    delta = np.where(np.abs(delta) < 1e-15, 0.0, delta)
    top = sp.hstack([tilted.matrix, sp.csc_array((m, 1))])
    bottom = sp.hstack([sp.csc_array(delta[None, :]), sp.csc_array([[1.0]])])
    return ExtendedMatrix(sp.csc_array(sp.vstack([top, bottom])), delta)


def validate_model(model: MdpModel) -> ValidationReport:
    """Report invariant violations and check primitivity of the chain.

    Never raises: the report lists broken normalizations, negative
    probabilities and positive rewards, and states whether the tilted
    matrix's sparsity pattern is irreducible and aperiodic (the
    precondition for a unique positive Perron pair).
    """
    violations = []
    if not np.isfinite(model.prior_policy).all():
        violations.append("prior_policy has non-finite entries")
    if not np.isfinite(model.dynamics).all():
        violations.append("dynamics has non-finite entries")
    if not np.isfinite(model.rewards).all():
        violations.append("rewards has non-finite entries")
    if not violations:
        pol_sums = model.prior_policy.sum(axis=1)
        for s in np.nonzero(np.abs(pol_sums - 1.0) > NORM_TOL)[0]:
            violations.append(f"policy at state {s} sums to {pol_sums[s]!r}")
        dyn_sums = model.dynamics.sum(axis=2)
        for s, a in zip(*np.nonzero(np.abs(dyn_sums - 1.0) > NORM_TOL)):
            violations.append(f"dynamics at (state {s}, action {a}) sums to "
                              f"{dyn_sums[s, a]!r}")
        if model.prior_policy.min() < 0:
            violations.append("policy has negative probabilities")
        if model.dynamics.min() < 0:
            violations.append("dynamics has negative probabilities")
        if model.rewards.max() > 0:
            violations.append(f"max reward {model.rewards.max()!r} > 0 "
                              "(not normalized)")
    strongly_connected = aperiodic = False
    if not violations:
        graph = compose_transition_matrix(model)
        pattern = TiltedMatrix(graph.matrix, graph.index,
                               np.zeros(graph.index.size), model.beta)
        g = pattern.sparsity_graph()
        strongly_connected = nx.is_strongly_connected(g)
        if strongly_connected:
            aperiodic = nx.is_aperiodic(g)
    return ValidationReport(violations, strongly_connected, aperiodic)


def model_to_dict(model: MdpModel) -> dict:
    """JSON-ready document; dynamics stored as sparse (s, a, s', p) triplets."""
    src_s, src_a, dst_s = np.nonzero(model.dynamics)
    triplets = [[int(s), int(a), int(s2), float(p)] for s, a, s2, p in
                zip(src_s, src_a, dst_s, model.dynamics[src_s, src_a, dst_s])]
    doc = {
        "n_states": model.n_states,
        "n_actions": model.n_actions,
        "policy": model.prior_policy.tolist(),
        "dynamics": triplets,
        "rewards": model.rewards.tolist(),
        "beta": model.beta,
    }
    if model.reward_shift != 0.0:
        doc["reward_shift"] = model.reward_shift
    return doc


def model_from_dict(doc: dict) -> MdpModel:
    allowed = {"n_states", "n_actions", "policy", "dynamics", "rewards",
               "beta", "reward_shift"}
    unknown = set(doc) - allowed
    if unknown:
        raise InputError(f"unknown model fields: {sorted(unknown)}")
    missing = allowed - {"reward_shift"} - set(doc)
    if missing:
        raise InputError(f"missing model fields: {sorted(missing)}")
    n_s, n_a = int(doc["n_states"]), int(doc["n_actions"])
    dynamics = np.zeros((n_s, n_a, n_s))
    for s, a, s2, p in doc["dynamics"]:
        dynamics[int(s), int(a), int(s2)] = float(p)
    return MdpModel(
        n_states=n_s,
        n_actions=n_a,
        prior_policy=np.asarray(doc["policy"], dtype=float),
        dynamics=dynamics,
        rewards=np.asarray(doc["rewards"], dtype=float),
        beta=float(doc["beta"]),
        reward_shift=float(doc.get("reward_shift", 0.0)),
    )
