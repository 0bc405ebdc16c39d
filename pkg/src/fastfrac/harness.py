"""
Convergence studies, rate tables, report/snapshot writers and scaling benchmarks.
"""
from __future__ import annotations

import csv
import io
import json
import math
import subprocess
import time
import tracemalloc
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import fast_l1
from .errors import ConfigError
from .problems import (
    constant_source_problem,
    exact_field,
    manufactured_problem,
    restrict,
    smooth_mode_problem,
    solve_problem,
    stripe_problem,
)
from .tensor import Grid, discrete_l2_norm, discrete_max_norm

PROBLEMS = ("smooth", "singular", "stripe", "manufactured")
FORMATS = ("csv", "json", "markdown")


def fmt_float(x) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return "%.6e" % x


@dataclass
class StudyConfig:
    """Parameters of a steady or time-dependent study, as read from JSON.

    ``pairs`` holds (s, gamma) for steady problems and (s, alpha) for the
    manufactured evolution problem.  Whichever of ``space_sizes`` and
    ``time_steps`` has more than one entry is the swept variable.
    """

    problem: str = "smooth"
    name: str = ""
    kind: str = "cdm4"
    rhs_mode: str = "nodal"
    quadrature: str = "gauss"
    dim: int = 3
    mode: int = 2
    kappa: float = 1.0
    gamma: float = 1.0
    g: str = "t"
    final_time: float = 1.0
    pairs: list = field(default_factory=lambda: [[0.5, 0.0]])
    space_sizes: list = field(default_factory=lambda: [8, 16, 32, 64])
    time_steps: list = field(default_factory=lambda: [1])
    norm: str = "l2"
    out: str = "results"
    format: str = "csv"
    threads: int = 1
    seed: int = 0
    expected_rate: float | None = None
    rate_tolerance: float | None = None
    paper_scale: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    @property
    def stem(self) -> str:
        return self.name or f"{self.problem}_{self.kind}"

    @property
    def sweep(self) -> str:
        if len(self.time_steps) > 1:
            if len(self.space_sizes) > 1:
                raise ConfigError("sweep either space_sizes or time_steps, not both")
            return "time"
        return "space"

    @property
    def second_param(self) -> str:
        return "alpha" if self.problem == "manufactured" else "gamma"

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; expected one of {PROBLEMS}")
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r}; expected one of {FORMATS}")
        if self.norm not in ("l2", "max"):
            raise ConfigError(f"unknown norm {self.norm!r}")
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not self.pairs:
            raise ConfigError("pairs must not be empty")
        self.pairs = [tuple(float(v) for v in p) for p in self.pairs]
        if any(len(p) != 2 for p in self.pairs):
            raise ConfigError("each entry of pairs must be a two-element list")
        for key in ("space_sizes", "time_steps"):
            seq = [int(v) for v in getattr(self, key)]
            if not seq or any(b <= a for a, b in zip(seq, seq[1:])):
                raise ConfigError(f"{key} must be a non-empty strictly increasing list")
            setattr(self, key, seq)
        self.sweep  # noqa: B018  (raises on a double sweep)
        if self.expected_rate is not None and len(self.sweep_sizes) < 2:
            raise ConfigError("rate checks need at least two sweep entries")

    @property
    def sweep_sizes(self) -> list[int]:
        return self.time_steps if self.sweep == "time" else self.space_sizes

    @classmethod
    def from_dict(cls, data: dict, paper_scale: bool = False) -> "StudyConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if paper_scale:
            data.update(data.get("paper_scale", {}))
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path, paper_scale: bool = False) -> "StudyConfig":
        return cls.from_dict(read_json(path), paper_scale)


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def build_problem(config: StudyConfig, pair):
    s, second = pair
    if config.problem == "smooth":
        return smooth_mode_problem(config.dim, config.mode, s, second, config.kind, config.kappa,
                                   config.rhs_mode, config.quadrature)
    if config.problem == "singular":
        return constant_source_problem(config.kind, s, second, config.dim, config.rhs_mode,
                                       config.quadrature)
    if config.problem == "stripe":
        return stripe_problem(s, config.kind)
    return manufactured_problem(config.g, s, second, config.dim, config.gamma, config.mode,
                                config.kappa, config.final_time, config.kind)


# --- rates and tables ---------------------------------------------------------

def compute_rates(errors: Sequence[float]) -> list[float]:
    """log2(e_i / e_{i+1}) for consecutive entries."""
    errors = np.asarray(errors, dtype=float)
    if np.any(~(errors > 0)):
        raise ValueError("errors must be positive to compute rates")
    return list(np.log2(errors[:-1] / errors[1:]))


@dataclass
class RateRow:
    params: dict
    size: int
    error: float
    rate: float | None = None
    status: str = "ok"


@dataclass
class RateTable:
    rows: list[RateRow]
    norm: str = "l2"
    problem: str = ""
    size_label: str = "N"
    revision: str = "unknown"
    timestamp: str | None = None

    def groups(self) -> dict[tuple, list[RateRow]]:
        out: dict[tuple, list[RateRow]] = {}
        for row in self.rows:
            out.setdefault(tuple(row.params.items()), []).append(row)
        return out

    def rates(self, **params) -> list[float]:
        key = tuple(params.items())
        return [r.rate for r in self.groups()[key] if r.rate is not None]

    def errors(self, **params) -> list[float]:
        return [r.error for r in self.groups()[tuple(params.items())]]


def fill_rates(rows: list[RateRow]) -> None:
    """Set each row's rate from its predecessor within the same parameter group."""
    prev: dict[tuple, RateRow] = {}
    for row in rows:
        key = tuple(row.params.items())
        before = prev.get(key)
        row.rate = None
        if before is not None and row.status == "ok" and before.status == "ok":
            row.rate = float(compute_rates([before.error, row.error])[0])
        prev[key] = row


def git_revision() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True,
                             text=True, cwd=Path(__file__).parent, timeout=5)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _norm(config: StudyConfig, e, grid: Grid) -> float:
    return discrete_l2_norm(e, grid) if config.norm == "l2" else discrete_max_norm(e)


def _steady_error(config: StudyConfig, pair, size: int) -> float:
    problem = build_problem(config, pair)
    grid = problem.grid(size)
    u = solve_problem(problem, grid)
    if problem.exact is None:
        # self-convergence: u_N at the nodes of the N/2 grid against u_{N/2},
        # weighted by the cell volume of the N grid
        if any(n % 2 for n in grid.counts):
            raise ConfigError(f"self-convergence needs even interval counts, got {grid.counts}")
        coarse = Grid(grid.bounds, tuple(n // 2 for n in grid.counts))
        return _norm(config, restrict(u) - solve_problem(problem, coarse), grid)
    return _norm(config, u - exact_field(problem, grid), grid)


def _evolve_error(config: StudyConfig, pair, size: int, steps: int) -> float:
    problem = build_problem(config, pair)
    grid = problem.grid(size)
    result = fast_l1.run(problem, grid, config.final_time / steps, steps)
    e = result.final - exact_field(problem, grid, config.final_time)
    return _norm(config, e, grid)


def run_convergence(config: StudyConfig) -> RateTable:
    """Solve every (pair, sweep size) combination and tabulate errors and rates."""
    second = config.second_param
    tasks = []
    for pair in config.pairs:
        for size in config.sweep_sizes:
            tasks.append((pair, size))

    def work(task):
        pair, size = task
        if config.problem == "manufactured":
            if config.sweep == "time":
                return _evolve_error(config, pair, config.space_sizes[0], size)
            return _evolve_error(config, pair, size, config.time_steps[0])
        if config.problem == "stripe":
            raise ConfigError("the stripe problem has no error measure; use the steady command")
        return _steady_error(config, pair, size)

    def guarded(task):
        try:
            err = work(task)
            if not np.isfinite(err) or err <= 0:
                return err, f"degenerate error {err!r}"
            return err, "ok"
        except ConfigError:
            raise
        except Exception as exc:  # per-row failure; the table is still emitted
            return float("nan"), f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        results = list(pool.map(guarded, tasks))

    rows = [
        RateRow({"s": pair[0], second: pair[1]}, size, err, None, status)
        for (pair, size), (err, status) in zip(tasks, results)
    ]
    fill_rates(rows)
    label = "steps" if config.sweep == "time" else "N"
    return RateTable(rows, config.norm, config.problem, label, git_revision())


def check_rates(table: RateTable, expected: float, tolerance: float) -> list[str]:
    """Messages for every rate outside expected +- tolerance (empty when all pass)."""
    bad = []
    for row in table.rows:
        if row.status != "ok":
            bad.append(f"{row.params} {table.size_label}={row.size}: {row.status}")
        elif row.rate is not None and abs(row.rate - expected) > tolerance:
            bad.append(f"{row.params} {table.size_label}={row.size}: rate {row.rate:.4f}")
    return bad


# --- writers ------------------------------------------------------------------

def _columns(table: RateTable) -> list[str]:
    keys: list[str] = []
    for row in table.rows:
        for k in row.params:
            if k not in keys:
                keys.append(k)
    if not keys:
        keys = ["s", "gamma"]
    return keys + [table.size_label, "error", "rate", "status"]


def _cells(table: RateTable, row: RateRow) -> list[str]:
    cols = _columns(table)
    vals = [fmt_float(row.params.get(k)) for k in cols[:-4]]
    return vals + [str(row.size), fmt_float(row.error), fmt_float(row.rate), row.status]


def render_report(table: RateTable, fmt: str = "csv") -> str:
    if fmt not in FORMATS:
        raise ConfigError(f"unknown format {fmt!r}")
    cols = _columns(table)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for row in table.rows:
            writer.writerow(_cells(table, row))
        return buf.getvalue()
    if fmt == "markdown":
        lines = [
            f"<!-- problem={table.problem} norm={table.norm} revision={table.revision} -->",
            "| " + " | ".join(cols) + " |",
            "|" + "---|" * len(cols),
        ]
        lines += ["| " + " | ".join(_cells(table, row)) + " |" for row in table.rows]
        return "\n".join(lines) + "\n"
    meta = {"problem": table.problem, "norm": table.norm, "size_label": table.size_label,
            "revision": table.revision}
    if table.timestamp:
        meta["timestamp"] = table.timestamp
    rows = [dict(zip(cols, _cells(table, row))) for row in table.rows]
    return json.dumps({"metadata": meta, "rows": rows}, indent=2, sort_keys=True) + "\n"


def emit_report(table: RateTable, path, fmt: str = "csv") -> Path:
    path = Path(path)
    text = render_report(table, fmt)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return path


REPORT_SUFFIX = {"csv": ".csv", "json": ".json", "markdown": ".md"}


def emit_field_snapshot(u: np.ndarray, grid: Grid, path, fmt: str | None = None) -> Path:
    """Dump interior nodes as CSV (x, y, [z,] u) or legacy-VTK structured points."""
    path = Path(path)
    fmt = fmt or ("vtk" if path.suffix == ".vtk" else "csv")
    u = np.asarray(u, dtype=float)
    if u.shape != grid.interior_shape:
        raise ValueError(f"field shape {u.shape} does not match grid {grid.interior_shape}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            if fmt == "csv":
                names = "xyz"[: grid.dim]
                fh.write(",".join(names) + ",u\n")
                coords = np.meshgrid(*[grid.nodes(k) for k in range(grid.dim)], indexing="ij")
                table = np.column_stack([c.ravel() for c in coords] + [u.ravel()])
                np.savetxt(fh, table, fmt="%.6e", delimiter=",")
            elif fmt == "vtk":
                dims = list(grid.interior_shape) + [1] * (3 - grid.dim)
                origin = [grid.nodes(k)[0] for k in range(grid.dim)] + [0.0] * (3 - grid.dim)
                spacing = list(grid.h) + [1.0] * (3 - grid.dim)
                fh.write("# vtk DataFile Version 3.0\nfastfrac field\nASCII\nDATASET STRUCTURED_POINTS\n")
                fh.write("DIMENSIONS %d %d %d\n" % tuple(dims))
                fh.write("ORIGIN %.6e %.6e %.6e\n" % tuple(origin))
                fh.write("SPACING %.6e %.6e %.6e\n" % tuple(spacing))
                fh.write(f"POINT_DATA {u.size}\nSCALARS u double 1\nLOOKUP_TABLE default\n")
                # VTK wants x fastest
                np.savetxt(fh, u.transpose().ravel(), fmt="%.6e")
            else:
                raise ConfigError(f"unknown snapshot format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write snapshot to {path}: {exc}") from exc
    return path


# --- benchmarks ---------------------------------------------------------------

@dataclass
class BenchConfig:
    sizes: list = field(default_factory=lambda: [2**14, 2**15])
    steps: list = field(default_factory=lambda: [100, 200])
    s: float = 0.5
    alpha: float = 0.5
    repeats: int = 3
    out: str = "results"
    threads: int = 1
    seed: int = 0
    format: str = "json"
    paper_scale: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict, paper_scale: bool = False) -> "BenchConfig":
        data = dict(data)
        unknown = sorted(set(data) - {f.name for f in fields(cls)})
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if paper_scale:
            data.update(data.get("paper_scale", {}))
        cfg = cls(**data)
        if len(cfg.sizes) < 2 or len(cfg.steps) < 2:
            raise ConfigError("benchmarks need at least two sizes and two step counts")
        return cfg


def _bench_problem(cfg: BenchConfig):
    return manufactured_problem("t", cfg.s, cfg.alpha, d=1, gamma=0.0, kappa=1.0, kind="fd2")


def time_run(cfg: BenchConfig, size: int, steps: int) -> tuple[float, float]:
    """(best total wall time, best median per-step time) over ``cfg.repeats`` runs."""
    problem = _bench_problem(cfg)
    grid = problem.grid(size)
    totals, per_step = [], []
    for _ in range(cfg.repeats):
        start = time.perf_counter()
        res = fast_l1.run(problem, grid, 1.0 / max(cfg.steps), steps)
        totals.append(time.perf_counter() - start)
        per_step.append(float(np.median(res.step_seconds)))
    return min(totals), min(per_step)


def peak_memory(cfg: BenchConfig, size: int, steps: int) -> int:
    """Peak traced allocation (bytes) during one run."""
    problem = _bench_problem(cfg)
    grid = problem.grid(size)
    tracemalloc.start()
    try:
        fast_l1.run(problem, grid, 1.0 / max(cfg.steps), steps)
        return tracemalloc.get_traced_memory()[1]
    finally:
        tracemalloc.stop()


def benchmark(cfg: BenchConfig) -> dict:
    """Per-step time against N, total time against step count, and memory against step count."""
    n_steps = min(cfg.steps)
    # interleave repeats across sizes so a slow spell on the machine hits every size alike
    single = replace(cfg, repeats=1)
    per_step = {size: math.inf for size in cfg.sizes}
    for _ in range(cfg.repeats):
        for size in cfg.sizes:
            per_step[size] = min(per_step[size], time_run(single, size, n_steps)[1])
    sizes = np.array(cfg.sizes, dtype=float)
    t = np.array([per_step[n] for n in cfg.sizes])
    exponent = float(np.polyfit(np.log(sizes), np.log(t), 1)[0])
    size_ratios = [float(b / a) for a, b in zip(t, t[1:])]
    base = min(cfg.sizes)
    totals = {steps: math.inf for steps in cfg.steps}
    for _ in range(cfg.repeats):
        for steps in cfg.steps:
            totals[steps] = min(totals[steps], time_run(single, base, steps)[0])
    step_ratios = [float(totals[b] / totals[a]) for a, b in zip(cfg.steps, cfg.steps[1:])]
    memory = {steps: peak_memory(cfg, base, steps) for steps in cfg.steps}
    return {
        "per_step_seconds": {str(k): v for k, v in per_step.items()},
        "size_ratios": size_ratios,
        "fitted_exponent": exponent,
        "total_seconds": {str(k): v for k, v in totals.items()},
        "step_ratios": step_ratios,
        "peak_bytes": {str(k): v for k, v in memory.items()},
    }
