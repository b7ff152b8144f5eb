"""Command line entry point.

::

    serverless-kw oracle-sweep --config configs/full_scale_sweep.ini
    serverless-kw kw --config configs/scaled_n5.ini --seed 3 --out runs/kw
    serverless-kw fast --config configs/scaled_n5.ini --threads 4
    serverless-kw validate

Exit codes: 0 success, 1 failed check or failed computation, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .optimizer import (
    oscillation_flag,
    run_fast_update,
    run_kw,
    write_replication_csv,
    write_trajectory_csv,
)
from .policy import PolicySpec
from .simulator import write_trace
from .stationary import CostOracle, UnimodalityError, locate_minimum, sweep, write_sweep_csv
from .validation import run_validation

__all__ = ["main", "build_parser"]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
MAX_FAILED_FRACTION = 0.1


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI experiment file (defaults apply if omitted)")
    common.add_argument("--seed", type=_u64, help="run a single seed instead of the configured list")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--threads", type=_positive, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="serverless-kw",
        description="Stationary cost oracle and Kiefer-Wolfowitz search for the serverless reserve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("oracle-sweep", parents=[common], help="exact cost curve and its minimum")
    sub.add_parser("kw", parents=[common], help="Kiefer-Wolfowitz trajectories, one file per seed")
    sub.add_parser("fast", parents=[common], help="fast-update baselines (scenarios 1 and 2)")
    sub.add_parser("validate", parents=[common], help="invariant checks, JSON report")
    return parser


def _pmap(fn, jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def _policy(cfg: ExperimentConfig) -> PolicySpec:
    smoothing = cfg.smoothing if cfg.policy_kind == "binomial" else None
    return PolicySpec(cfg.policy_kind, 0.0, smoothing)


def _oracle(cfg: ExperimentConfig, lam: float) -> CostOracle:
    return CostOracle(cfg.model(lam), cfg.weights, _policy(cfg))


def _theta_star(cfg: ExperimentConfig, lam: float) -> float:
    if cfg.theta_star is not None:
        return cfg.theta_star
    theta, _ = locate_minimum(_oracle(cfg, lam), cfg.search_bracket)
    return theta


def _tag(lam: float, theta0: float, seed: int) -> str:
    return f"lam{lam:g}_theta{theta0:g}_seed{seed}"


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# oracle-sweep

def _sweep_point(job):
    cfg, lam, theta = job
    return sweep([theta], _oracle(cfg, lam))[0]


def cmd_oracle_sweep(cfg: ExperimentConfig) -> int:
    if not cfg.grid:
        print("error: empty theta grid", file=sys.stderr)
        return EXIT_USAGE
    M = cfg.smoothing.M
    if min(cfg.grid) < 0 or max(cfg.grid) > M:
        print(f"error: theta grid must lie within [0, M] = [0, {M:g}]", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    failed = total = 0
    for lam in cfg.lam:
        oracle = _oracle(cfg, lam)
        if cfg.threads > 1:
            points = _pmap(_sweep_point, [(cfg, lam, t) for t in cfg.grid], cfg.threads)
        else:
            points = sweep(cfg.grid, oracle)
        target = out if len(cfg.lam) == 1 else out / f"lam{lam:g}"
        target.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(points, target / "sweep.csv")
        failed += sum(math.isnan(p.cost) for p in points)
        total += len(points)

        entry = {"lam": lam, "grid_min_theta": None, "theta_star": None, "cost_star": None,
                 "cost_zero": None, "relative_gain": None, "error": None}
        good = [p for p in points if not math.isnan(p.cost)]
        if good:
            entry["grid_min_theta"] = min(good, key=lambda p: p.cost).theta
        try:
            theta, cost = locate_minimum(oracle, cfg.search_bracket)
            c0 = oracle(0.0)
            entry.update(theta_star=theta, cost_star=cost, cost_zero=c0, relative_gain=(c0 - cost) / c0)
            print(
                f"lam={lam:g}: theta*={theta:.4f} c(theta*)={cost:.6f} "
                f"c(0)={c0:.6f} gain={(c0 - cost) / c0:.2%}"
            )
        except (UnimodalityError, RuntimeError) as exc:
            entry["error"] = str(exc)
            print(f"lam={lam:g}: minimum not located: {exc}", file=sys.stderr)
        summary.append(entry)
    _write_json({"sweeps": summary}, out / "sweep_summary.json")
    if failed > MAX_FAILED_FRACTION * total:
        print(f"error: {failed}/{total} grid points failed", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# kw

def _kw_job(job):
    cfg, lam, theta0, seed, out = job
    traj = run_kw(
        theta0, cfg.schedules, cfg.model(lam), cfg.weights, cfg.smoothing,
        policy_kind=cfg.policy_kind, seed=seed, keep_episodes=True,
    )
    tag = _tag(lam, theta0, seed)
    write_trajectory_csv(traj, Path(out) / f"trajectory_{tag}.csv")
    write_trace(traj.episodes, Path(out) / f"trace_{tag}.jsonl")
    return traj.theta_final, traj.n[-1], False


def _replication_rows(results, seeds, theta_star):
    rows = []
    for seed, (theta, n_last, _) in zip(seeds, results):
        err = abs(theta - theta_star)
        rows.append((seed, theta, err, err**2 * n_last ** (2 / 3)))
    return rows


def _group_summary(rows, flags=None) -> dict:
    errs = np.array([r[2] for r in rows])
    out = {
        "median_abs_err": float(np.median(errs)),
        "fraction_within_0.5": float(np.mean(errs < 0.5)),
        "theta_final": [r[1] for r in rows],
    }
    if flags is not None:
        out["oscillation_flags"] = int(sum(flags))
    return out


def cmd_kw(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    groups = [(lam, th0) for lam in cfg.lam for th0 in cfg.theta0]
    jobs = [(cfg, lam, th0, seed, str(out)) for lam, th0 in groups for seed in cfg.seeds]
    results = _pmap(_kw_job, jobs, cfg.threads)
    stars = {lam: _theta_star(cfg, lam) for lam in cfg.lam}
    summary = []
    k = len(cfg.seeds)
    for g, (lam, th0) in enumerate(groups):
        rows = _replication_rows(results[g * k:(g + 1) * k], cfg.seeds, stars[lam])
        write_replication_csv(rows, out / f"replication_lam{lam:g}_theta{th0:g}.csv")
        entry = {"lam": lam, "theta0": th0, "theta_star": stars[lam], **_group_summary(rows)}
        summary.append(entry)
        print(
            f"kw lam={lam:g} theta0={th0:g}: theta*={stars[lam]:.4f} "
            f"median |err|={entry['median_abs_err']:.4f} within 0.5: {entry['fraction_within_0.5']:.0%}"
        )
    _write_json({"kw": summary}, out / "kw_summary.json")
    return EXIT_OK


# fast

def _gamma_scale(cfg: ExperimentConfig, scenario: int, update_every: int) -> float:
    if cfg.gamma_scale is not None:
        return cfg.gamma_scale
    return 1.0 if scenario == 1 else update_every / cfg.schedules.tau


def _fast_job(job):
    cfg, scenario, ue, lam, theta0, seed, out = job
    params = cfg.model(lam)
    traj = run_fast_update(
        theta0, cfg.schedules, params, cfg.weights, cfg.smoothing, ue,
        _gamma_scale(cfg, scenario, ue), policy_kind=cfg.policy_kind, seed=seed,
    )
    name = f"fast_s{scenario}_u{ue}_{_tag(lam, theta0, seed)}.csv"
    write_trajectory_csv(traj, Path(out) / name, clamp=(-params.N, 2 * params.N))
    return traj.theta_final, traj.n[-1], oscillation_flag(traj, params.N)


def cmd_fast(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    groups = [
        (sc, ue, lam, th0)
        for sc in cfg.scenarios for ue in cfg.update_every for lam in cfg.lam for th0 in cfg.theta0
    ]
    jobs = [(cfg, *grp, seed, str(out)) for grp in groups for seed in cfg.seeds]
    results = _pmap(_fast_job, jobs, cfg.threads)
    stars = {lam: _theta_star(cfg, lam) for lam in cfg.lam}
    summary = []
    k = len(cfg.seeds)
    for g, (sc, ue, lam, th0) in enumerate(groups):
        chunk = results[g * k:(g + 1) * k]
        rows = _replication_rows(chunk, cfg.seeds, stars[lam])
        write_replication_csv(rows, out / f"replication_fast_s{sc}_u{ue}_lam{lam:g}_theta{th0:g}.csv")
        entry = {
            "scenario": sc, "update_every": ue, "gamma_scale": _gamma_scale(cfg, sc, ue),
            "lam": lam, "theta0": th0, "theta_star": stars[lam],
            **_group_summary(rows, [flag for _, _, flag in chunk]),
        }
        summary.append(entry)
        print(
            f"fast scenario {sc} every {ue} lam={lam:g} theta0={th0:g}: "
            f"median |err|={entry['median_abs_err']:.4f} oscillation flags {entry['oscillation_flags']}/{k}"
        )
    _write_json({"fast": summary}, out / "fast_summary.json")
    return EXIT_OK


# validate

def cmd_validate(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    checks = run_validation(cfg.model(), cfg.weights, seed=cfg.seeds[0])
    report = {"passed": all(c.passed for c in checks), "checks": [c.as_dict() for c in checks]}
    _write_json(report, out / "validate.json")
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}")
    return EXIT_OK if report["passed"] else EXIT_FAIL


COMMANDS = {
    "oracle-sweep": cmd_oracle_sweep,
    "kw": cmd_kw,
    "fast": cmd_fast,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = cfg.override(
            seeds=None if args.seed is None else (args.seed,),
            out=None if args.out is None else str(args.out),
            threads=args.threads,
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command in ("kw", "fast") and not cfg.schedules.summable():
        log.warning("sum of gamma_n**2 / delta_n**2 diverges for the configured schedules")
    try:
        return COMMANDS[args.command](cfg)
    except (ValueError, FloatingPointError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
