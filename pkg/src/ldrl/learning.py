"""Model-free TD estimation of the left Perron vector and its eigenvalue.

The learner observes transitions (s, a, r, s', a') sampled under the
prior policy and prior dynamics (off-policy by construction: the
optimal policy is read out of the learned table afterwards) and applies
stochastic-approximation updates whose fixed point is
u(s,a) * rho = exp(beta*r(s,a)) * E[u(s',a')]. Both update targets are
evaluated at the pre-step values, so the exact spectral solution has
zero expected drift under either update.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .gridworld import env_step
from .model import MdpModel

U_FLOOR = 1e-30


@dataclass(frozen=True)
class Schedule:
    """One learning-rate schedule.

    kinds: "constant" (rate = initial); "polynomial" with
    rate(t) = initial / (1 + t/tau)**exponent, floored; "piecewise" with
    `pieces` a list of (start_step, rate) breakpoints.
    """

    kind: str = "polynomial"
    initial: float = 0.1
    tau: float = 10_000.0
    exponent: float = 0.6
    floor: float = 0.0
    pieces: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "polynomial", "piecewise"):
            raise InputError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "piecewise":
            if not self.pieces:
                raise InputError("piecewise schedule needs breakpoints")
            rates = [r for _, r in self.pieces]
        else:
            rates = [self.initial]
        if any(not (0.0 < r <= 1.0) for r in rates):
            raise InputError("learning rates must lie in (0, 1]")

    def rate(self, step: int) -> float:
        if self.kind == "constant":
            return self.initial
        if self.kind == "polynomial":
            return max(self.initial / (1.0 + step / self.tau) ** self.exponent,
                       self.floor)
        idx = 0
        for k, (start, _) in enumerate(self.pieces):
            if step >= start:
                idx = k
        return self.pieces[idx][1]


@dataclass(frozen=True)
class ScheduleConfig:
    """Rates for the table update (alpha) and the eigenvalue update."""

    alpha: Schedule = field(default_factory=Schedule)
    alpha_theta: Schedule = field(default_factory=lambda: Schedule(
        kind="polynomial", initial=0.01, tau=10_000.0, exponent=0.8))

    def __post_init__(self):
        a, at = self.alpha, self.alpha_theta
        if a.kind == "polynomial" and at.kind == "polynomial" \
                and at.exponent < a.exponent:
            raise InputError("alpha_theta must decay at least as fast as alpha")
        if a.kind == "constant" and at.kind == "constant" \
                and at.initial > a.initial:
            raise InputError("constant alpha_theta must not exceed alpha")


@dataclass
class LearningState:
    """Live estimates plus schedules; mutated in place by td_step."""

    u_est: np.ndarray
    rho_est: float
    beta: float
    schedule: ScheduleConfig
    step_count: int = 0
    renorm_every: int = 1000
    skipped_theta_updates: int = 0
    history: list = field(default_factory=list)

    @property
    def alpha(self) -> float:
        return self.schedule.alpha.rate(self.step_count)

    @property
    def alpha_theta(self) -> float:
        return self.schedule.alpha_theta.rate(self.step_count)

    @property
    def theta_est(self) -> float:
        return -math.log(self.rho_est) / self.beta


def initial_state(model: MdpModel, schedule: ScheduleConfig | None = None,
                  renorm_every: int = 1000) -> LearningState:
    """All-ones table and rho = 1 (exact for the zero-reward model)."""
    return LearningState(
        u_est=np.ones((model.n_states, model.n_actions)),
        rho_est=1.0,
        beta=model.beta,
        schedule=schedule or ScheduleConfig(),
        renorm_every=renorm_every,
    )


def td_step(state: LearningState,
            transition: tuple[int, int, float, int, int]) -> LearningState:
    """Apply one transition (s, a, r, s', a'); returns the mutated state.

    Both update targets read the pre-step (u_est, rho_est); the table is
    committed first, then the eigenvalue estimate. When u_est(s, a) sits
    at the positivity floor the eigenvalue update is skipped (the ratio
    estimator would blow up) and counted in skipped_theta_updates.
    """
    s, a, r, s2, a2 = transition
    u = state.u_est
    alpha = state.alpha
    alpha_theta = state.alpha_theta
    target = math.exp(state.beta * r) * u[s2, a2]
    u_new = (1.0 - alpha) * u[s, a] + alpha * target / state.rho_est
    if u[s, a] > U_FLOOR:
        rho_new = (1.0 - alpha_theta) * state.rho_est \
            + alpha_theta * target / u[s, a]
        state.rho_est = min(max(rho_new, 1e-300), 1.0)
    else:
        state.skipped_theta_updates += 1
    u[s, a] = max(u_new, U_FLOOR)
    state.step_count += 1
    if state.renorm_every and state.step_count % state.renorm_every == 0:
        u /= u.max()  # pins the scale gauge; theta is gauge-invariant
    return state


@dataclass(frozen=True)
class TrainResult:
    states: list            # final LearningState per replica
    history: list           # per replica: array (n_records, 3) of
    #                         (step, theta_est, mean_return; nan when not evaluated)


def _policy_return_rate(model: MdpModel, policy: np.ndarray, start: int,
                        length: int, rng: np.random.Generator) -> float:
    cum = np.cumsum(policy, axis=1)
    s = start
    total = 0.0
    for _ in range(length):
        a = int(min(np.searchsorted(cum[s], rng.random()), model.n_actions - 1))
        s, r = env_step(model, s, a, rng)
        total += r
    return total / length


def _run_replica(model: MdpModel, schedule: ScheduleConfig, n_steps: int,
                 rng: np.random.Generator, record_every: int,
                 initial_state_index: int | None, renorm_every: int,
                 eval_length: int) -> tuple[LearningState, np.ndarray]:
    state = initial_state(model, schedule, renorm_every=renorm_every)
    pol_cum = np.cumsum(model.prior_policy, axis=1)
    n_a = model.n_actions
    if initial_state_index is None:
        s = int(rng.integers(model.n_states))
    else:
        s = initial_state_index
    a = int(min(np.searchsorted(pol_cum[s], rng.random()), n_a - 1))
    records = []
    for _ in range(n_steps):
        s2, r = env_step(model, s, a, rng)
        a2 = int(min(np.searchsorted(pol_cum[s2], rng.random()), n_a - 1))
        td_step(state, (s, a, r, s2, a2))
        if record_every and state.step_count % record_every == 0:
            if eval_length:
                ret = _policy_return_rate(
                    model, extract_policy(state, model.prior_policy),
                    s2, eval_length, rng)
            else:
                ret = math.nan
            records.append((state.step_count, state.theta_est, ret))
            state.history.append((state.step_count, state.theta_est))
        s, a = s2, a2
    return state, np.asarray(records).reshape(-1, 3)


def train(model: MdpModel, schedule: ScheduleConfig, n_steps: int, seed: int,
          replicas: int = 1, record_every: int = 1000,
          initial_state_index: int | None = None, renorm_every: int = 1000,
          eval_length: int = 0) -> TrainResult:
    """Run the TD learner over `replicas` independent seeded streams.

    Exploration follows the prior policy from `initial_state_index`
    (a uniformly drawn state when None). `eval_length` > 0 additionally
    rolls out the currently extracted policy at every record point and
    stores its per-step return. LDRL_THREADS caps replica parallelism.
    """
    if n_steps < 1 or replicas < 1:
        raise InputError("n_steps and replicas must be >= 1")
    rngs = [np.random.default_rng(s)
            for s in np.random.SeedSequence(seed).spawn(replicas)]

    def job(rng):
        return _run_replica(model, schedule, n_steps, rng, record_every,
                            initial_state_index, renorm_every, eval_length)

    workers = int(os.environ.get("LDRL_THREADS", "1") or "1")
    if workers > 1 and replicas > 1:
        with ThreadPoolExecutor(max_workers=min(workers, replicas)) as pool:
            results = list(pool.map(job, rngs))
    else:
        results = [job(rng) for rng in rngs]
    return TrainResult(states=[st for st, _ in results],
                       history=[h for _, h in results])


def extract_policy(state: LearningState, prior_policy: np.ndarray) -> np.ndarray:
    """Policy read-out pi(a|s) proportional to u_est(s,a) * prior(a|s)."""
    weights = state.u_est * prior_policy
    sums = weights.sum(axis=1, keepdims=True)
    degenerate = (state.u_est <= U_FLOOR).all(axis=1) | (sums.ravel() <= 0)
    if degenerate.any():
        warnings.warn(f"{int(degenerate.sum())} state(s) have no learned "
                      "signal; falling back to uniform there")
        weights[degenerate] = 1.0
        sums = weights.sum(axis=1, keepdims=True)
    return weights / sums
