"""
End-to-end runs: generate nodes, assemble, solve, measure, and write CSV.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .assembly import assemble_pde_system, write_degrees_csv, write_pattern_csv
from .geometry import effective_fill_distance, generate_nodes, read_nodes_csv
from .kernels import PhsKernel
from .problems import PROBLEMS
from .solver import SolveError, error_norms, solve
from .weights import AdaptivityConfig

logger = logging.getLogger(__name__)

CONVERGENCE_HEADER = ("N", "h_e", "nnz", "max_error", "rel_l2", "seconds", "slope")
NOISE_FLOOR = 1e-9

DEFAULT_GENERATORS = {
    "section4": {"kind": "tensor-grid"},
    "nist-peak": {"kind": "peak-adapted", "x_peak": [0.5, 0.5],
                  "r_min": 0.005, "r_max": 0.1, "R": 0.3},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str = "section4"
    generator: dict = field(default_factory=dict)
    N: list[int] = field(default_factory=lambda: [400])
    g: int = 4
    k: int = 2
    m: int = 3
    adaptive: bool = True
    seed: int = 0
    out_dir: str = "out"
    problem_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}")
        if isinstance(self.N, int):
            self.N = [self.N]
        self.N = [int(n) for n in self.N]
        if not self.N or any(b <= a for a, b in zip(self.N, self.N[1:])):
            raise ConfigError("N list must be non-empty and strictly increasing")
        if not 1 <= self.g <= 10:
            raise ConfigError("g must lie in [1, 10]")
        if self.k != 2:
            raise ConfigError("the benchmark problems use k = 2")
        if self.m < 3 or self.m % 2 == 0:
            raise ConfigError("m must be odd and >= 3")
        default = DEFAULT_GENERATORS.get(self.problem, {"kind": "tensor-grid"})
        gen = dict(self.generator or default)
        gen.update(gen.pop("params", {}) or {})
        if "kind" not in gen:
            raise ConfigError("generator needs a 'kind'")
        self.generator = gen

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**data)

    @property
    def generator_params(self) -> dict:
        return {k: v for k, v in self.generator.items() if k not in ("kind", "nodes_csv")}


@dataclass
class ConvergenceRecord:
    N: int
    h_e: float
    nnz: int
    max_error: float
    rel_l2: float
    seconds: float
    degrees: dict[int, int]

    def row(self, slope="") -> list:
        return [self.N, repr(self.h_e), self.nnz, repr(self.max_error), repr(self.rel_l2),
                f"{self.seconds:.3f}", slope]


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"{stage} failed: {exc}")
        self.stage = stage


def _make_nodes(cfg: RunConfig, n: int, domain):
    kind = cfg.generator["kind"]
    if kind == "csv":
        return read_nodes_csv(cfg.generator["nodes_csv"], domain)
    return generate_nodes(kind, n, domain, cfg.generator_params, seed=cfg.seed)


def run_solve(cfg: RunConfig, n: int | None = None, out_dir=None) -> ConvergenceRecord:
    """
    Solve `cfg.problem` on one node set of size `n` (default ``cfg.N[0]``),
    writing ``solution.csv``, ``pattern.csv``, ``degrees.csv`` and a one-row
    ``convergence.csv`` to `out_dir`.
    """
    n = cfg.N[0] if n is None else n
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = PROBLEMS[cfg.problem](**cfg.problem_params)

    t0 = time.perf_counter()
    nodes = _make_nodes(cfg, n, problem.domain)
    try:
        A, rhs, hist = assemble_pde_system(nodes, problem, AdaptivityConfig(cfg.g, cfg.k),
                                           cfg.adaptive, PhsKernel(cfg.m))
    except (RuntimeError, ValueError) as exc:
        raise StageError("assembly", exc) from exc
    try:
        report = solve(A, rhs)
    except SolveError as exc:
        raise StageError("solve", exc) from exc
    if not report.converged:
        raise StageError("solve", SolveError("iterative solver did not converge"))
    seconds = time.perf_counter() - t0

    exact = problem.exact_u(nodes.points)
    max_err, rel_l2, _ = error_norms(report.solution, exact)
    rec = ConvergenceRecord(N=len(nodes),
                            h_e=effective_fill_distance(nodes.domain.volume, len(nodes), 2),
                            nnz=int(A.nnz), max_error=max_err, rel_l2=rel_l2,
                            seconds=seconds, degrees=dict(sorted(hist.items())))
    logger.info("N=%d nnz=%d max_error=%.3e (%.1fs)", rec.N, rec.nnz, max_err, seconds)

    with open(out / "solution.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x", "y", "u_numeric", "u_exact", "abs_error"])
        for (x, y), u, v in zip(nodes.points, report.solution, exact):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(u)), repr(float(v)),
                        repr(float(abs(u - v)))])
    write_pattern_csv(A, out / "pattern.csv")
    write_degrees_csv(hist, out / "degrees.csv")
    write_convergence_csv([rec], out / "convergence.csv", slope=None)
    return rec


def fit_slope(records: list[ConvergenceRecord]) -> float:
    """
    Least-squares slope of log(max_error) against log(h_e); NaN when every
    error is below the noise floor.
    """
    err = np.array([r.max_error for r in records])
    if np.all(err < NOISE_FLOOR):
        return math.nan
    h = np.array([r.h_e for r in records])
    return float(np.polyfit(np.log(h), np.log(np.maximum(err, 1e-300)), 1)[0])


def write_convergence_csv(records, path, slope=None) -> None:
    if slope is None:
        cell = ""
    elif math.isnan(slope):
        cell = "below_noise_floor"
    else:
        cell = repr(slope)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CONVERGENCE_HEADER)
        for r in records:
            w.writerow(r.row(cell))


def run_convergence(cfg: RunConfig) -> tuple[list[ConvergenceRecord], float]:
    """
    Run `run_solve` for every N (outputs in ``out_dir/N<n>``) and write the
    sweep with its fitted slope to ``out_dir/convergence.csv``.
    """
    if len(cfg.N) < 3:
        raise ConfigError("a convergence sweep needs at least 3 values of N")
    out = Path(cfg.out_dir)
    records = [run_solve(cfg, n, out / f"N{n}") for n in cfg.N]
    slope = fit_slope(records)
    write_convergence_csv(records, out / "convergence.csv", slope)
    with open(out / "config.json", "w") as f:
        json.dump(asdict(cfg), f, indent=2, sort_keys=True)
    return records, slope
