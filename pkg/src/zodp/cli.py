"""Command-line entry point: account | simulate | verify.

Config is strict JSON (version "1"); unknown fields are an error so a
misconfigured accountant fails loudly.  All seeds live in the config,
making every command deterministic; CSV numbers use shortest
round-trip formatting so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import accountant, verify as verify_mod, zogd
from .errors import (
    ConfigError,
    NoFeasibleK,
    NoFeasibleSchedule,
    PreconditionViolated,
    ValidationError,
    ZodpError,
)
from .params import ConvexityClass, ProblemParams

_PROBLEM_FIELDS = {
    "d": int,
    "n": int,
    "K": int,
    "eta": float,
    "sigma": float,
    "Delta": float,
    "R": float,
    "M": float,
    "m": float,
    "xi": float,
    "batch": int,
    "convexity": str,
}

_ANALYSES = {
    "hidden_state",
    "closed_form",
    "composition_beta1",
    "composition_beta0",
    "output_perturbation",
    "minibatch_hidden_state",
}

_SIMULATE_FIELDS = {
    "loss",
    "T",
    "trials",
    "beta",
    "seed",
    "mode",
    "paired",
    "replaced_index",
    "data_norm",
    "data_seed",
}

_VERIFY_CHECKS = {
    "beta_identity": {"d", "K", "samples", "seed"},
    "lipschitz_tail": {"d", "K", "c", "theta", "samples", "seed"},
    "winf": {"trials", "T", "seed", "data_norm"},
    "beta_utility_equivalence": {"beta_list", "trials", "T", "seed", "data_norm"},
    "iid_vs_orthonormal": {"d", "K", "c", "samples", "seed"},
}

_TOP_FIELDS = {
    "version",
    "problem",
    "delta",
    "T_grid",
    "alpha_grid",
    "theta_grid",
    "analyses",
    "simulate",
    "verify",
}


@dataclass(frozen=True)
class Config:
    """Validated, normalized configuration; round-trips through to_dict."""

    version: str
    problem: Optional[ProblemParams]
    delta: Optional[float]
    T_grid: Optional[List[int]]
    alpha_grid: Optional[List[float]]
    theta_grid: Optional[List[float]]
    analyses: Optional[List[str]]
    simulate: Optional[Dict]
    verify: Optional[Dict]

    def to_dict(self) -> Dict:
        out: Dict = {"version": self.version}
        if self.problem is not None:
            p = self.problem
            prob = {
                "d": p.d,
                "n": p.n,
                "K": p.K,
                "eta": p.eta,
                "sigma": p.sigma,
                "Delta": p.Delta,
                "R": p.R,
                "M": p.M,
                "m": p.m,
                "xi": p.xi,
                "convexity": p.convexity.value,
            }
            if p.batch is not None:
                prob["batch"] = p.batch
            out["problem"] = prob
        for name in ("delta", "T_grid", "alpha_grid", "theta_grid", "analyses", "simulate", "verify"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out


def _reject_unknown(block: Dict, allowed: set, where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown field(s) {sorted(unknown)} in {where}")


def _parse_problem(block: Dict) -> ProblemParams:
    if not isinstance(block, dict):
        raise ConfigError("problem must be an object")
    _reject_unknown(block, set(_PROBLEM_FIELDS), "problem")
    kwargs = {}
    for name, caster in _PROBLEM_FIELDS.items():
        if name not in block:
            if name == "batch":
                continue
            if name == "xi":
                kwargs["xi"] = 0.0
                continue
            raise ConfigError(f"problem.{name} is required")
        value = block[name]
        if caster is int and not isinstance(value, int):
            raise ConfigError(f"problem.{name} must be an integer")
        if name == "convexity":
            kwargs[name] = ConvexityClass.from_str(value)
        else:
            kwargs[name] = caster(value)
    try:
        return ProblemParams(**kwargs)
    except ValidationError as exc:
        raise ConfigError(f"problem: {exc}") from exc


def parse_config(raw: Dict) -> Config:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(raw, _TOP_FIELDS, "config")
    if raw.get("version") != "1":
        raise ConfigError('config.version must be the string "1"')
    problem = _parse_problem(raw["problem"]) if "problem" in raw else None
    delta = None
    if "delta" in raw:
        delta = float(raw["delta"])
        if not 0.0 < delta < 1.0:
            raise ConfigError("delta must be in (0, 1)")
    T_grid = None
    if "T_grid" in raw:
        T_grid = [int(t) for t in raw["T_grid"]]
        if not T_grid or any(b <= a for a, b in zip(T_grid, T_grid[1:])) or T_grid[0] < 0:
            raise ConfigError("T_grid must be non-empty, ascending, non-negative")
    alpha_grid = [float(a) for a in raw["alpha_grid"]] if "alpha_grid" in raw else None
    if alpha_grid is not None and any(a <= 1.0 for a in alpha_grid):
        raise ConfigError("alpha_grid orders must all exceed 1")
    theta_grid = [float(t) for t in raw["theta_grid"]] if "theta_grid" in raw else None
    if theta_grid is not None and any(t < 0.0 for t in theta_grid):
        raise ConfigError("theta_grid values must be >= 0")
    analyses = None
    if "analyses" in raw:
        analyses = list(raw["analyses"])
        if not analyses:
            raise ConfigError("analyses must be non-empty")
        for a in analyses:
            if a not in _ANALYSES:
                raise ConfigError(f"unknown analysis {a!r}")
        if problem is not None:
            if "closed_form" in analyses and problem.convexity is not ConvexityClass.STRONGLY_CONVEX:
                raise ConfigError("closed_form applies to strongly_convex problems only")
            if "minibatch_hidden_state" in analyses and problem.batch is None:
                raise ConfigError("minibatch_hidden_state requires problem.batch")
    simulate = None
    if "simulate" in raw:
        simulate = dict(raw["simulate"])
        _reject_unknown(simulate, _SIMULATE_FIELDS, "simulate")
        if simulate.get("loss", "quadratic") not in ("quadratic", "logistic"):
            raise ConfigError("simulate.loss must be 'quadratic' or 'logistic'")
    verify = None
    if "verify" in raw:
        verify = dict(raw["verify"])
        _reject_unknown(verify, {"checks", "seed", "scale"}, "verify")
        if "checks" not in verify:
            raise ConfigError("verify.checks is required (possibly empty, or 'default')")
        checks = verify["checks"]
        if checks != "default":
            if not isinstance(checks, list):
                raise ConfigError("verify.checks must be a list or 'default'")
            for entry in checks:
                if not isinstance(entry, dict) or "name" not in entry:
                    raise ConfigError("each check needs a 'name'")
                name = entry["name"]
                if name not in _VERIFY_CHECKS:
                    raise ConfigError(f"unknown check {name!r}")
                _reject_unknown(
                    {k: v for k, v in entry.items() if k != "name"},
                    _VERIFY_CHECKS[name],
                    f"verify check {name!r}",
                )
    return Config(
        version="1",
        problem=problem,
        delta=delta,
        T_grid=T_grid,
        alpha_grid=alpha_grid,
        theta_grid=theta_grid,
        analyses=analyses,
        simulate=simulate,
        verify=verify,
    )


def load_config(path: str) -> Config:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


CSV_HEADER = "T,analysis,epsilon,delta,alpha_star,tau_star,theta,beta,delta_p,delta_f"


def cmd_account(config: Config, out_path: str, threads: Optional[int] = None) -> None:
    """Evaluate the configured analyses over T_grid and write the CSV."""
    for name, value in (
        ("problem", config.problem),
        ("delta", config.delta),
        ("T_grid", config.T_grid),
        ("analyses", config.analyses),
    ):
        if value is None:
            raise ConfigError(f"account requires config.{name}")
    rows = []
    curve = accountant.account_curve(
        config.problem,
        config.delta,
        config.T_grid,
        analyses=config.analyses,
        alpha_grid=config.alpha_grid,
        theta_grid=config.theta_grid,
        threads=threads,
    )
    for T, results in curve:
        print(f"account: T={T}", file=sys.stderr)
        for res in results:
            rows.append(
                [
                    str(T),
                    res.analysis,
                    _fmt(res.epsilon),
                    _fmt(res.delta),
                    _fmt(res.alpha_star),
                    _fmt(res.tau_star),
                    _fmt(res.theta),
                    _fmt(res.beta),
                    _fmt(res.delta_p),
                    _fmt(res.delta_f),
                ]
            )
    with open(out_path, "w", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _build_sim_problem(config: Config):
    sim = config.simulate
    p = config.problem
    data_norm = float(sim.get("data_norm", 0.05))
    data_seed = int(sim.get("data_seed", 0))
    if sim.get("loss", "quadratic") == "quadratic":
        loss, X = zogd.make_quadratic_problem(p.d, p.n, p.M, p.m, data_norm, data_seed)
    else:
        rng = np.random.default_rng(data_seed)
        X = rng.standard_normal((p.n, p.d))
        X *= data_norm / np.linalg.norm(X, axis=1, keepdims=True)
        loss = zogd.LogisticLoss(y=rng.choice([-1.0, 1.0], size=p.n))
    return loss, X


def cmd_simulate(config: Config, out_path: str) -> None:
    """Run trajectories; write the first trial's CSV and aggregate JSON."""
    if config.problem is None or config.simulate is None:
        raise ConfigError("simulate requires config.problem and config.simulate")
    sim = config.simulate
    p = config.problem
    T = int(sim.get("T", 100))
    trials = int(sim.get("trials", 1))
    beta = sim.get("beta", 0.5)
    seed = int(sim.get("seed", 0))
    mode = sim.get("mode", "stiefel")
    paired = bool(sim.get("paired", False))
    loss, X = _build_sim_problem(config)
    finals = []
    first = None
    first_pair = None
    max_distance = 0.0
    for trial in range(trials):
        trial_seed = seed + trial
        if paired:
            j = int(sim.get("replaced_index", 0))
            traj, traj_alt = zogd.run_adjacent_pair(
                p, loss, X, j, -X[j], T, trial_seed, beta, mode
            )
            dist = float(
                np.max(np.linalg.norm(traj.iterates - traj_alt.iterates, axis=1))
            )
            max_distance = max(max_distance, dist)
            if first is None:
                first, first_pair = traj, traj_alt
        else:
            traj = zogd.run(p, loss, X, T, beta, trial_seed, mode)
            if first is None:
                first = traj
        finals.append(loss.mean_loss(traj.iterates[-1], X))
    zogd.export_trajectory_csv(out_path, first, paired=first_pair)
    stats = {
        "trials": trials,
        "T": T,
        "final_loss_mean": float(np.mean(finals)),
        "final_loss_std": float(np.std(finals, ddof=1)) if trials > 1 else 0.0,
        "final_loss_min": float(np.min(finals)),
        "final_loss_max": float(np.max(finals)),
    }
    if paired:
        stats["max_pair_distance"] = max_distance
        stats["pair_distance_bound"] = accountant.winf_bound(T, p)
    with open(out_path + ".stats.json", "w", newline="\n") as fh:
        json.dump(stats, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _run_checks(config: Config) -> List[verify_mod.VerificationReport]:
    block = config.verify
    checks = block["checks"]
    seed = int(block.get("seed", verify_mod.DEFAULT_SEED))
    if checks == "default":
        return verify_mod.default_suite(seed=seed, scale=float(block.get("scale", 1.0)))
    reports = []
    for entry in checks:
        name = entry["name"]
        kwargs = {k: v for k, v in entry.items() if k != "name"}
        kwargs.setdefault("seed", seed)
        if name == "beta_identity":
            reports.append(verify_mod.check_beta_identity(**kwargs))
        elif name == "lipschitz_tail":
            reports.append(verify_mod.check_lipschitz_tail(**kwargs))
        elif name == "winf":
            reports.append(verify_mod.check_winf(None, **kwargs))
        elif name == "beta_utility_equivalence":
            reports.append(verify_mod.check_beta_utility_equivalence(None, **kwargs))
        elif name == "iid_vs_orthonormal":
            reports.append(verify_mod.check_iid_vs_orthonormal(**kwargs))
    return reports


def cmd_verify(config: Config, out_path: str) -> int:
    """Run the configured checks; JSONL out; exit 0 iff all pass."""
    if config.verify is None:
        raise ConfigError("verify requires config.verify")
    reports = _run_checks(config)
    with open(out_path, "w", newline="\n") as fh:
        for report in reports:
            fh.write(report.to_json() + "\n")
    for report in reports:
        status = "pass" if report.passed else "FAIL"
        print(f"verify: {report.name}: {status}", file=sys.stderr)
    return 0 if all(r.passed for r in reports) else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="zodp",
        description="Privacy accounting and simulation for noisy zeroth-order descent.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("account", "simulate", "verify"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", required=True)
        sp.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        if args.command == "account":
            cmd_account(config, args.out, threads=args.threads)
            return 0
        if args.command == "simulate":
            cmd_simulate(config, args.out)
            return 0
        return cmd_verify(config, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NoFeasibleSchedule, NoFeasibleK, PreconditionViolated) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    except ZodpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
