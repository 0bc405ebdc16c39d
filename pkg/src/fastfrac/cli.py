"""Command-line driver.

Exit codes: 0 success, 1 rate regression, 2 configuration error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import fast_l1
from .errors import ConfigError, SolverError
from .harness import (
    REPORT_SUFFIX,
    BenchConfig,
    StudyConfig,
    benchmark,
    build_problem,
    check_rates,
    emit_field_snapshot,
    emit_report,
    read_json,
    run_convergence,
)
from .problems import CahnHilliardSpec, cahn_hilliard_run, exact_field, solve_problem
from .tensor import discrete_l2_norm, discrete_max_norm

log = logging.getLogger("fastfrac")

COMMANDS = ("steady", "evolve", "convergence", "cahn-hilliard", "bench")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fastfrac", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--nx", type=int, help="intervals per axis")
        p.add_argument("--nt", type=int, help="number of time steps")
        p.add_argument("--s", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--kind", choices=("fem", "cdm4", "fd2"))
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("csv", "json", "markdown"))
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--paper-scale", action="store_true",
                       help="apply the config's paper_scale overrides")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _common_overrides(data: dict, args) -> dict:
    data = dict(data)
    env_threads = os.environ.get("FASTFRAC_THREADS")
    env_out = os.environ.get("FASTFRAC_OUT")
    if env_threads:
        data["threads"] = int(env_threads)
    if env_out:
        data["out"] = env_out
    for key in ("out", "format", "seed", "threads"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    return data


def study_config(args) -> StudyConfig:
    data = _common_overrides(read_json(args.config), args)
    if args.paper_scale:
        data.update(data.pop("paper_scale", {}))
    data.pop("paper_scale", None)
    if args.kind:
        data["kind"] = args.kind
    if args.nx:
        data["space_sizes"] = [args.nx]
    if args.nt:
        data["time_steps"] = [args.nt]
    if args.nx or args.nt:
        # a pinned size may leave nothing to take rates over
        data.pop("expected_rate", None)
    second = "alpha" if data.get("problem") == "manufactured" else "gamma"
    if args.gamma is not None and second == "alpha":
        data["gamma"] = args.gamma
    pairs = [list(p) for p in data.get("pairs", [[0.5, 0.0]])]
    if args.s is not None or getattr(args, second) is not None:
        s = args.s if args.s is not None else pairs[0][0]
        other = getattr(args, second)
        pairs = [[s, other if other is not None else pairs[0][1]]]
    data["pairs"] = pairs
    return StudyConfig.from_dict(data)


def _write_summary(out: Path, name: str, summary: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}_summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return path


def cmd_steady(args) -> int:
    cfg = study_config(args)
    pair = cfg.pairs[0]
    problem = build_problem(cfg, pair)
    grid = problem.grid(cfg.space_sizes[0])
    u = solve_problem(problem, grid)
    out = Path(cfg.out)
    summary = {"problem": cfg.problem, "kind": cfg.kind, "s": pair[0], "gamma": pair[1],
               "N": cfg.space_sizes[0], "max_abs_u": float(np.max(np.abs(u)))}
    if problem.exact is not None:
        e = u - exact_field(problem, grid)
        summary.update(l2_error=discrete_l2_norm(e, grid), max_error=discrete_max_norm(e))
    emit_field_snapshot(u, grid, out / f"{cfg.stem}_field.csv")
    print(_write_summary(out, cfg.stem, summary))
    return 0


def cmd_evolve(args) -> int:
    cfg = study_config(args)
    pair = cfg.pairs[0]
    problem = build_problem(cfg, pair)
    grid = problem.grid(cfg.space_sizes[0])
    steps = cfg.time_steps[0]
    res = fast_l1.run(problem, grid, cfg.final_time / steps, steps)
    out = Path(cfg.out)
    summary = {"problem": cfg.problem, "kind": cfg.kind, "s": pair[0], "alpha": pair[1],
               "N": cfg.space_sizes[0], "steps": steps, "final_max_error": res.final_error,
               "mean_step_seconds": float(np.mean(res.step_seconds))}
    emit_field_snapshot(res.final, grid, out / f"{cfg.stem}_final.csv")
    print(_write_summary(out, cfg.stem, summary))
    return 0


def cmd_convergence(args) -> int:
    cfg = study_config(args)
    table = run_convergence(cfg)
    path = emit_report(table, Path(cfg.out) / (cfg.stem + REPORT_SUFFIX[cfg.format]), cfg.format)
    print(path)
    failed = [r for r in table.rows if r.status != "ok"]
    for r in failed:
        log.error("row %s size %d failed: %s", r.params, r.size, r.status)
    if failed:
        return 3
    if cfg.expected_rate is not None:
        bad = check_rates(table, cfg.expected_rate, cfg.rate_tolerance or 0.1)
        for msg in bad:
            log.warning("rate outside %.3f +- %.3f: %s", cfg.expected_rate,
                        cfg.rate_tolerance or 0.1, msg)
        return 1 if bad else 0
    return 0


def cmd_cahn_hilliard(args) -> int:
    data = _common_overrides(read_json(args.config), args)
    if args.paper_scale:
        data.update(data.pop("paper_scale", {}))
    data.pop("paper_scale", None)
    out = Path(data.pop("out", "results"))
    fmt = data.pop("snapshot_format", "csv")
    data.pop("format", None)
    data.pop("threads", None)
    name = data.pop("name", "cahn_hilliard")
    if "snapshot_times" in data:
        data["snapshot_times"] = tuple(data["snapshot_times"])
    try:
        spec = CahnHilliardSpec(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    updates = {k: getattr(args, k) for k in ("s", "alpha", "kind") if getattr(args, k) is not None}
    if args.nx:
        updates["n"] = args.nx
    if args.nt:
        updates["dt"] = spec.T / args.nt
    spec = replace(spec, **updates)
    res = cahn_hilliard_run(spec)
    for t, u in sorted(res.snapshots.items()):
        emit_field_snapshot(u, res.grid, out / f"{name}_t{t:g}.{fmt}", fmt)
    summary = {"s": spec.s, "alpha": spec.alpha, "eps": spec.eps, "dt": spec.dt, "n": spec.n,
               "seed": spec.seed, "max_norm": float(res.max_norms.max()),
               "final_min": float(res.final.min()), "final_max": float(res.final.max())}
    print(_write_summary(out, name, summary))
    return 0


def cmd_bench(args) -> int:
    data = _common_overrides(read_json(args.config), args)
    cfg = BenchConfig.from_dict(data, args.paper_scale)
    if args.s is not None:
        cfg.s = args.s
    if args.alpha is not None:
        cfg.alpha = args.alpha
    report = benchmark(cfg)
    print(_write_summary(Path(cfg.out), "bench", report))
    return 0


HANDLERS = {
    "steady": cmd_steady,
    "evolve": cmd_evolve,
    "convergence": cmd_convergence,
    "cahn-hilliard": cmd_cahn_hilliard,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return HANDLERS[args.command](args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except SolverError as exc:
        log.error("solver failure: %s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
