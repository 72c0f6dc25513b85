"""Experiment command line: solve / dp / compare / learn / simulate / sweep.

One config schema serves every subcommand; values come from an optional
JSON file (--config) overridden by explicit flags. All CSV output uses
17 significant digits so repeat runs are byte-identical for fixed
seeds. Exit codes: 0 success, 2 bad input/config, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import dp as dp_mod
from . import driven as driven_mod
from . import learning as learn_mod
from . import sim as sim_mod
from . import spectral as spectral_mod
from .errors import InputError, SolverError
from .gridworld import (GridMaze, load_packaged_maze, parse_maze,
                        start_pair_distribution, to_mdp)
from .model import (MdpModel, build_extended_matrix, build_tilted_matrix,
                    compose_transition_matrix, model_from_dict, shift_rewards,
                    validate_model)
from .numerics import format_float


@dataclass(frozen=True)
class ExperimentConfig:
    maze: str | None = None
    model: str | None = None
    beta: float | None = None
    beta_list: list | None = None
    horizon: int = 100
    horizons: list | None = None
    slip: float = 0.0
    cyclic: bool = True
    tol: float = 1e-12
    max_iter: int = 100_000
    solver: str = "auto"
    seed: int = 0
    replicas: int = 1
    out: str = "."
    learn_steps: int = 100_000
    record_every: int = 1000
    eval_length: int = 0
    schedule: dict | None = None
    trajectories: int = 200
    sim_initial: str = "steady"


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def config_from_dict(doc: dict) -> ExperimentConfig:
    unknown = set(doc) - _CONFIG_FIELDS
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig(**doc)
    if (cfg.maze is None) == (cfg.model is None):
        raise InputError("exactly one of 'maze' or 'model' must be given")
    if cfg.beta is not None and cfg.beta <= 0:
        raise InputError("beta must be positive")
    if cfg.horizon < 1:
        raise InputError("horizon must be >= 1")
    if cfg.solver not in ("auto", "power"):
        raise InputError(f"unknown solver {cfg.solver!r}")
    if cfg.sim_initial not in ("steady", "start", "uniform"):
        raise InputError(f"unknown sim_initial {cfg.sim_initial!r}")
    return cfg


def _load_maze(cfg: ExperimentConfig) -> GridMaze:
    if os.path.exists(cfg.maze):
        with open(cfg.maze) as fh:
            return parse_maze(fh.read(), slip_probability=cfg.slip,
                              cyclic=cfg.cyclic)
    return load_packaged_maze(cfg.maze, slip_probability=cfg.slip,
                              cyclic=cfg.cyclic)


def load_problem(cfg: ExperimentConfig,
                 beta: float | None = None) -> tuple[MdpModel, GridMaze | None]:
    """Build the (reward-normalized) model the config describes."""
    beta = beta if beta is not None else cfg.beta
    if cfg.maze is not None:
        if beta is None:
            raise InputError("beta is required with a maze")
        maze = _load_maze(cfg)
        return shift_rewards(to_mdp(maze, beta)), maze
    if not os.path.exists(cfg.model):
        raise InputError(f"model file not found: {cfg.model}")
    with open(cfg.model) as fh:
        model = model_from_dict(json.load(fh))
    if beta is not None:
        model = replace(model, beta=beta)
    return shift_rewards(model), None


def _spectral_pipeline(cfg: ExperimentConfig, model: MdpModel):
    report = validate_model(model)
    if not report.ok:
        raise InputError("invalid model: " + "; ".join(report.violations))
    if not report.primitive:
        raise InputError("model chain is not primitive (irreducible + "
                         "aperiodic); use a cyclic maze or fix the kernel")
    transition = compose_transition_matrix(model)
    tilted = build_tilted_matrix(model, transition)
    build_extended_matrix(tilted)  # construction re-checks the column identity
    sol = spectral_mod.solve(tilted, tol=cfg.tol, max_iter=cfg.max_iter,
                             seed=cfg.seed, method=cfg.solver)
    return transition, tilted, sol


def _cells(model: MdpModel, maze: GridMaze | None) -> list:
    if maze is None:
        return [(-1, -1)] * model.n_states
    return [maze.cell_of(s) for s in range(model.n_states)]


def _write_csv(path: str, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(x) if isinstance(x, float) else x
                             for x in row])


def _pair_rows(model, maze, values: np.ndarray) -> list:
    cells = _cells(model, maze)
    rows = []
    for s in range(model.n_states):
        r, c = cells[s]
        for a in range(model.n_actions):
            rows.append([s, r, c, a, float(values[s * model.n_actions + a])])
    return rows


def cmd_solve(cfg: ExperimentConfig) -> None:
    model, maze = load_problem(cfg)
    transition, tilted, sol = _spectral_pipeline(cfg, model)
    prior_initial = (start_pair_distribution(maze, model) if maze is not None
                     else None)
    dsol = driven_mod.solve_driven(model, tilted, sol, cfg.horizon,
                                   prior_initial)
    out = cfg.out
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "spectral.json"), "w") as fh:
        json.dump(spectral_mod.solution_to_dict(sol), fh, indent=2)
    with open(os.path.join(out, "driven.json"), "w") as fh:
        json.dump(driven_mod.driven_to_dict(dsol), fh, indent=2)
    cells = _cells(model, maze)
    pol_rows, val_rows = [], []
    shift = model.reward_shift
    for s in range(model.n_states):
        r, c = cells[s]
        for a in range(model.n_actions):
            pol_rows.append([s, r, c, a, float(dsol.optimal_policy[s, a])])
            val_rows.append([s, r, c, a,
                             float(dsol.q_table[s, a] + cfg.horizon * shift),
                             float(dsol.v_table[s] + cfg.horizon * shift)])
    _write_csv(os.path.join(out, "policy.csv"),
               ["state", "row", "col", "action", "probability"], pol_rows)
    _write_csv(os.path.join(out, "steady_state.csv"),
               ["state", "row", "col", "action", "probability"],
               _pair_rows(model, maze, dsol.steady_state))
    _write_csv(os.path.join(out, "values.csv"),
               ["state", "row", "col", "action", "q", "v"], val_rows)


def cmd_dp(cfg: ExperimentConfig) -> None:
    model, _ = load_problem(cfg)
    tables = dp_mod.solve_finite_horizon(model, cfg.horizon, keep_all=True)
    shift = model.reward_shift
    rows = []
    for k, q in enumerate(tables.q_steps, start=1):
        for s in range(model.n_states):
            for a in range(model.n_actions):
                rows.append([k, s, a, float(q[s, a] + k * shift)])
    os.makedirs(cfg.out, exist_ok=True)
    _write_csv(os.path.join(cfg.out, "dp_values.csv"),
               ["step", "state", "action", "q"], rows)


def cmd_compare(cfg: ExperimentConfig) -> None:
    model, _ = load_problem(cfg)
    horizons = sorted(cfg.horizons or [cfg.horizon])
    if horizons[0] < 1:
        raise InputError("horizons must be >= 1")
    _, tilted, sol = _spectral_pipeline(cfg, model)
    rows = []
    q = np.array(model.rewards)
    step = 1
    for target in horizons:
        while step < target:
            q = dp_mod.soft_bellman_backup(model, q)
            step += 1
        spec_q, _ = driven_mod.value_functions(model, sol, target)
        rmsd, max_abs, pearson = dp_mod.compare_with_spectral(q, spec_q)
        rows.append([target, rmsd, max_abs, pearson])
    os.makedirs(cfg.out, exist_ok=True)
    _write_csv(os.path.join(cfg.out, "compare.csv"),
               ["horizon", "rmsd", "max_abs", "pearson_r"], rows)


def cmd_learn(cfg: ExperimentConfig) -> None:
    model, maze = load_problem(cfg)
    _, _, sol = _spectral_pipeline(cfg, model)
    schedule = _schedule_from_config(cfg)
    start = maze.start_state if maze is not None else None
    result = learn_mod.train(model, schedule, cfg.learn_steps, cfg.seed,
                             replicas=cfg.replicas,
                             record_every=cfg.record_every,
                             initial_state_index=start,
                             eval_length=cfg.eval_length)
    os.makedirs(cfg.out, exist_ok=True)
    rows = []
    for k, hist in enumerate(result.history):
        for step, theta, ret in hist:
            rows.append([k, int(step), float(theta), float(ret)])
    _write_csv(os.path.join(cfg.out, "learn_history.csv"),
               ["replica", "step", "theta_est", "mean_return"], rows)
    policy = learn_mod.extract_policy(result.states[0], model.prior_policy)
    cells = _cells(model, maze)
    pol_rows = [[s, cells[s][0], cells[s][1], a, float(policy[s, a])]
                for s in range(model.n_states)
                for a in range(model.n_actions)]
    _write_csv(os.path.join(cfg.out, "policy.csv"),
               ["state", "row", "col", "action", "probability"], pol_rows)
    finals = np.array([st.theta_est for st in result.states])
    rel_err = abs(finals.mean() - sol.theta) / sol.theta
    with open(os.path.join(cfg.out, "learn_summary.json"), "w") as fh:
        json.dump({
            "model_theta": sol.theta,
            "replica_theta_mean": finals.mean(),
            "replica_theta_std": finals.std(),
            "relative_error": rel_err,
            "converged_within_1pct": bool(rel_err <= 0.01),
        }, fh, indent=2)


def _schedule_from_config(cfg: ExperimentConfig) -> learn_mod.ScheduleConfig:
    if cfg.schedule is None:
        return learn_mod.ScheduleConfig()
    doc = dict(cfg.schedule)
    unknown = set(doc) - {"alpha", "alpha_theta"}
    if unknown:
        raise InputError(f"unknown schedule keys: {sorted(unknown)}")

    def build(sub: dict | None, default: learn_mod.Schedule) -> learn_mod.Schedule:
        if sub is None:
            return default
        allowed = {"kind", "initial", "tau", "exponent", "floor", "pieces"}
        bad = set(sub) - allowed
        if bad:
            raise InputError(f"unknown schedule fields: {sorted(bad)}")
        sub = dict(sub)
        if "pieces" in sub:
            sub["pieces"] = tuple((int(s), float(r)) for s, r in sub["pieces"])
        return learn_mod.Schedule(**sub)

    base = learn_mod.ScheduleConfig()
    return learn_mod.ScheduleConfig(
        alpha=build(doc.get("alpha"), base.alpha),
        alpha_theta=build(doc.get("alpha_theta"), base.alpha_theta),
    )


def _sweep_rows(cfg: ExperimentConfig, betas: list) -> list:
    def solve_one(beta: float):
        model, _ = load_problem(cfg, beta=beta)
        transition, tilted, sol = _spectral_pipeline(cfg, model)
        energy = driven_mod.mean_energy_per_step(sol, model.rewards)
        kernel = driven_mod.driven_matrix(tilted, sol)
        kl = driven_mod.kl_rate(kernel, transition, sol.steady_state)
        return [float(beta), energy, kl, sol.theta]

    workers = int(os.environ.get("LDRL_THREADS", "1") or "1")
    if workers > 1 and len(betas) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(betas))) as pool:
            return list(pool.map(solve_one, betas))
    return [solve_one(b) for b in betas]


def cmd_sweep(cfg: ExperimentConfig) -> None:
    betas = cfg.beta_list or ([cfg.beta] if cfg.beta is not None else None)
    if not betas:
        raise InputError("sweep needs --beta-list (or --beta)")
    os.makedirs(cfg.out, exist_ok=True)
    _write_csv(os.path.join(cfg.out, "sweep.csv"),
               ["beta", "energy_rate", "kl_rate", "theta"],
               _sweep_rows(cfg, betas))


def cmd_simulate(cfg: ExperimentConfig) -> None:
    model, maze = load_problem(cfg)
    transition, tilted, sol = _spectral_pipeline(cfg, model)
    out = cfg.out
    os.makedirs(out, exist_ok=True)

    if maze is not None:
        marginal_initial = start_pair_distribution(maze, model)
    else:
        marginal_initial = np.full(tilted.size, 1.0 / tilted.size)
    marginals = sim_mod.exact_marginals(tilted, marginal_initial, cfg.horizon)
    steady = sol.steady_state
    rows = []
    for t in range(cfg.horizon):
        for i in range(tilted.size):
            s, a = tilted.index.decode(i)
            rows.append([t + 1, s, a, float(marginals[t, i])])
    _write_csv(os.path.join(out, "marginals.csv"),
               ["t", "state", "action", "probability"], rows)
    kl = sim_mod.marginal_kl_curve(marginals, steady)
    _write_csv(os.path.join(out, "kl_curve.csv"), ["t", "kl"],
               [[t + 1, float(k)] for t, k in enumerate(kl)])

    kernel = driven_mod.driven_matrix(tilted, sol)
    if cfg.sim_initial == "steady":
        traj_initial = steady
    elif cfg.sim_initial == "start":
        traj_initial = driven_mod.optimal_initial_distribution(
            model, marginal_initial, sol)
    else:
        traj_initial = np.full(tilted.size, 1.0 / tilted.size)
    batch = sim_mod.sample_trajectories(kernel, traj_initial, cfg.horizon,
                                        cfg.trajectories, cfg.seed,
                                        rewards=model.pair_rewards)
    occupation = sim_mod.occupation_frequencies(batch)
    _write_csv(os.path.join(out, "occupation.csv"),
               ["state", "row", "col", "action", "probability"],
               _pair_rows(model, maze, occupation))
    energy, kl_emp = sim_mod.empirical_energy_and_kl(batch, transition, kernel)
    with open(os.path.join(out, "sim_summary.json"), "w") as fh:
        json.dump({
            "analytic_energy_rate": driven_mod.mean_energy_per_step(
                sol, model.rewards),
            "empirical_energy_rate": energy,
            "analytic_kl_rate": driven_mod.kl_rate(kernel, transition, steady),
            "empirical_kl_rate": kl_emp,
            "trajectories": cfg.trajectories,
            "horizon": cfg.horizon,
        }, fh, indent=2)

    if cfg.beta_list:
        _write_csv(os.path.join(out, "sweep.csv"),
                   ["beta", "energy_rate", "kl_rate", "theta"],
                   _sweep_rows(cfg, cfg.beta_list))


_COMMANDS = {
    "solve": cmd_solve,
    "dp": cmd_dp,
    "compare": cmd_compare,
    "learn": cmd_learn,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ldrl",
        description="Entropy-regularized tabular RL via the tilted-matrix "
                    "spectral route")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--maze", help="maze file path or packaged maze name")
        p.add_argument("--model", help="model JSON path")
        p.add_argument("--beta", type=float)
        p.add_argument("--beta-list", dest="beta_list",
                       help="comma-separated betas")
        p.add_argument("--horizon", type=int)
        p.add_argument("--horizons", help="comma-separated horizons (compare)")
        p.add_argument("--slip", type=float)
        p.add_argument("--cyclic", action=argparse.BooleanOptionalAction,
                       default=None)
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", dest="max_iter", type=int)
        p.add_argument("--solver", choices=["auto", "power"])
        p.add_argument("--seed", type=int)
        p.add_argument("--replicas", type=int)
        p.add_argument("--out")
        p.add_argument("--learn-steps", dest="learn_steps", type=int)
        p.add_argument("--record-every", dest="record_every", type=int)
        p.add_argument("--eval-length", dest="eval_length", type=int)
        p.add_argument("--trajectories", type=int)
        p.add_argument("--sim-initial", dest="sim_initial",
                       choices=["steady", "start", "uniform"])
    return parser


def _merge_config(args: argparse.Namespace) -> ExperimentConfig:
    doc = {}
    if args.config:
        if not os.path.exists(args.config):
            raise InputError(f"config file not found: {args.config}")
        with open(args.config) as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise InputError("config file must hold a JSON object")
    for key in _CONFIG_FIELDS:
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    for key in ("beta_list", "horizons"):
        if isinstance(doc.get(key), str):
            parts = [x for x in doc[key].split(",") if x]
            doc[key] = [float(x) if key == "beta_list" else int(x)
                        for x in parts]
    return config_from_dict(doc)


def main(argv: list | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _merge_config(args)
        _COMMANDS[args.command](cfg)
    except (InputError, json.JSONDecodeError) as exc:
        json.dump({"error": str(exc), "kind": "input"}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except SolverError as exc:
        json.dump({"error": str(exc), "kind": "solver"}, sys.stderr)
        sys.stderr.write("\n")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
