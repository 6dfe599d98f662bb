"""Method x replication benchmark grids over the built-in EM problems."""

from __future__ import annotations

import csv
import json
import logging
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import SOLVERS
from .core import AccelError, FixedPointProblem, SolverConfig
from .problems import (
    gen_interval_censor,
    gen_mvt,
    gen_probit,
    ic_problem,
    mvt_problem,
    probit_problem,
)

logger = logging.getLogger(__name__)

PROBLEMS = ("probit", "mvt", "ic")
DEFAULT_METHODS = ("em", "aa", "raa", "aa1", "daarem", "squarem", "qnz")
# method names beyond the solver registry
EXTRA_METHODS = {"pxem": "mvt"}

DESK_SIZES = {
    "probit": {"n": 500, "p": 10},
    "mvt": {"n": 100, "q": 5, "nu": 1.0},
    "ic": {"n": 300},
}


class BenchSpecError(ValueError):
    pass


@dataclass(frozen=True)
class BenchSpec:
    problem: str
    methods: tuple[str, ...] = DEFAULT_METHODS
    reps: int = 20
    seed: int = 1
    order: Optional[int] = None
    qnz_order: int = 5
    epsilon: float = 0.01
    epsilon_c: float = 0.0
    tol: float = 1e-8
    max_fevals: int = 25000
    n: Optional[int] = None
    p: Optional[int] = None
    q: Optional[int] = None
    nu: Optional[float] = None
    packing: str = "tri"
    start: Optional[tuple[float, ...]] = None
    out: Optional[str] = None
    trace: bool = False
    jobs: int = 1

    def validate(self) -> "BenchSpec":
        if self.problem not in PROBLEMS:
            raise BenchSpecError(f"unknown problem {self.problem!r}; choose from {', '.join(PROBLEMS)}")
        if not self.methods:
            raise BenchSpecError("method list is empty")
        for name in self.methods:
            if name in EXTRA_METHODS:
                if EXTRA_METHODS[name] != self.problem:
                    raise BenchSpecError(f"{name} is only defined for {EXTRA_METHODS[name]}")
            elif name not in SOLVERS:
                raise BenchSpecError(f"unknown method {name!r}")
        if len(set(self.methods)) != len(self.methods):
            raise BenchSpecError("duplicate method names")
        if self.reps < 1:
            raise BenchSpecError("reps must be >= 1")
        if self.jobs < 1:
            raise BenchSpecError("jobs must be >= 1")
        if self.qnz_order < 1:
            raise BenchSpecError("qnz order must be >= 1")
        if self.packing not in ("tri", "full"):
            raise BenchSpecError("packing must be 'tri' or 'full'")
        try:
            self.solver_config("em")
        except ValueError as exc:
            raise BenchSpecError(str(exc)) from exc
        if self.start is not None:
            # interval-censoring dimensions vary by replication; replication 0 is checked here
            _start(self, make_dataset(self, 0))
        return self

    def size(self, key: str):
        value = getattr(self, key)
        return DESK_SIZES[self.problem].get(key) if value is None else value

    def solver_config(self, method: str) -> SolverConfig:
        order = self.qnz_order if method == "qnz" else self.order
        return SolverConfig(order=order, epsilon=self.epsilon, epsilon_c=self.epsilon_c,
                            tol=self.tol, max_fevals=self.max_fevals, trace=self.trace)


@dataclass(frozen=True)
class BenchRecord:
    replication: int
    seed: int
    method: str
    converged: bool
    n_map_evals: int
    n_iterations: int
    n_fallbacks: int
    wall_seconds: float
    final_negative_loglik: float


CSV_HEADER = [f.name for f in fields(BenchRecord)]


def make_dataset(spec: BenchSpec, rep: int):
    if spec.problem == "probit":
        return gen_probit(spec.seed, n=spec.size("n"), p=spec.size("p"), rep=rep)
    if spec.problem == "mvt":
        return gen_mvt(spec.seed, n=spec.size("n"), q=spec.size("q"), nu=spec.size("nu"),
                       rep=rep, packing=spec.packing)
    return gen_interval_censor(spec.seed, n=spec.size("n"), rep=rep)


def build_problem(spec: BenchSpec, data, method: str) -> FixedPointProblem:
    if spec.problem == "probit":
        return probit_problem(data)
    if spec.problem == "mvt":
        return mvt_problem(data, expanded=(method == "pxem"))
    return ic_problem(data)


def default_start(problem: str, data) -> np.ndarray:
    """Probit: zeros. Multivariate t: sample mean and sample covariance plus 1e-3 I.
    Interval censoring: uniform masses."""
    if problem == "probit":
        return np.zeros(data.p)
    if problem == "mvt":
        sigma = np.cov(data.Y, rowvar=False).reshape(data.q, data.q) + 1e-3 * np.eye(data.q)
        return data.pack(data.Y.mean(axis=0), sigma)
    if problem == "ic":
        return np.full(data.p, 1.0 / data.p)
    raise BenchSpecError(f"unknown problem {problem!r}")


def _start(spec: BenchSpec, data) -> np.ndarray:
    if spec.start is None:
        return default_start(spec.problem, data)
    x0 = np.asarray(spec.start, dtype=float)
    expected = default_start(spec.problem, data).size
    if x0.size != expected:
        raise BenchSpecError(f"start vector has {x0.size} entries, problem needs {expected}")
    return x0


def run_replication(spec: BenchSpec, rep: int, methods: Optional[Sequence[str]] = None) -> list[BenchRecord]:
    """Every requested method on the dataset and start point of replication ``rep``."""
    data = make_dataset(spec, rep)
    x0 = _start(spec, data)
    records = []
    for method in methods or spec.methods:
        problem = build_problem(spec, data, method)
        solver = SOLVERS["em" if method == "pxem" else method]
        tic = time.perf_counter()
        try:
            report = solver(problem, x0, spec.solver_config(method))
        except AccelError as exc:
            wall = time.perf_counter() - tic
            logger.warning("replication %d, %s failed: %s", rep, method, exc)
            records.append(BenchRecord(rep, spec.seed, method, False, 0, 0, 0, wall, math.nan))
            continue
        wall = time.perf_counter() - tic
        if spec.trace and spec.out is not None:
            report.write_trace(Path(spec.out) / f"trace-{method}-{rep}.jsonl")
        records.append(BenchRecord(
            replication=rep,
            seed=spec.seed,
            method=method,
            converged=report.converged,
            n_map_evals=report.n_map_evals,
            n_iterations=report.n_iterations,
            n_fallbacks=report.n_fallbacks,
            wall_seconds=wall,
            final_negative_loglik=-report.merit_final,
        ))
    return records


def _row(rec: BenchRecord) -> list[str]:
    return [str(rec.replication), str(rec.seed), rec.method, str(int(rec.converged)),
            str(rec.n_map_evals), str(rec.n_iterations), str(rec.n_fallbacks),
            repr(rec.wall_seconds), repr(rec.final_negative_loglik)]


def _parse(row: dict) -> BenchRecord:
    return BenchRecord(
        replication=int(row["replication"]),
        seed=int(row["seed"]),
        method=row["method"],
        converged=bool(int(row["converged"])),
        n_map_evals=int(row["n_map_evals"]),
        n_iterations=int(row["n_iterations"]),
        n_fallbacks=int(row["n_fallbacks"]),
        wall_seconds=float(row["wall_seconds"]),
        final_negative_loglik=float(row["final_negative_loglik"]),
    )


def write_records(records: Iterable[BenchRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        writer.writerows(_row(r) for r in records)


def read_records(path) -> list[BenchRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [_parse(row) for row in reader]


def _sort_key(spec: BenchSpec):
    rank = {m: i for i, m in enumerate(spec.methods)}
    return lambda r: (r.replication, rank.get(r.method, len(rank)), r.method)


def run_bench(spec: BenchSpec) -> list[BenchRecord]:
    """Run the grid. With ``spec.out`` set, records are appended to ``records.csv`` as each
    replication finishes, pairs already present there are skipped, and the file is rewritten in
    (replication, method) order at the end together with ``summary.json``."""
    spec.validate()
    done: list[BenchRecord] = []
    csv_path = None
    if spec.out is not None:
        out = Path(spec.out)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "records.csv"
        if csv_path.exists():
            done = [r for r in read_records(csv_path)
                    if r.method in spec.methods and r.replication < spec.reps and r.seed == spec.seed]
        write_records(done, csv_path)

    have = {(r.replication, r.method) for r in done}
    todo = {}
    for rep in range(spec.reps):
        missing = [m for m in spec.methods if (rep, m) not in have]
        if missing:
            todo[rep] = missing

    records = list(done)

    def collect(batch: list[BenchRecord]) -> None:
        records.extend(batch)
        if csv_path is not None:
            with open(csv_path, "a", newline="") as fh:
                csv.writer(fh).writerows(_row(r) for r in batch)

    if spec.jobs == 1 or len(todo) <= 1:
        for rep, methods in todo.items():
            collect(run_replication(spec, rep, methods))
    else:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            futures = [pool.submit(run_replication, spec, rep, methods) for rep, methods in todo.items()]
            for fut in as_completed(futures):
                collect(fut.result())

    records.sort(key=_sort_key(spec))
    if csv_path is not None:
        write_records(records, csv_path)
        summary = summarize(records)
        (csv_path.parent / "summary.json").write_text(json.dumps(_json_safe(summary), indent=2) + "\n")
    return records


def _stats(values: Sequence[float]) -> dict:
    if not values:
        return {"mean": None, "median": None, "sd": None}
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return {"mean": statistics.fmean(values), "median": statistics.median(values), "sd": sd}


def summarize(records: Sequence[BenchRecord]) -> dict:
    """Per-method mean, median and sample sd of map evaluations, iterations and wall time.

    Every record enters those statistics, including runs that hit the cap. The mean final
    negative log-likelihood uses converged runs only; ``n_excluded`` counts the rest.
    """
    if not records:
        raise ValueError("no records to summarize")
    methods = list(dict.fromkeys(r.method for r in records))
    table = {}
    for method in methods:
        rows = [r for r in records if r.method == method]
        ok = [r.final_negative_loglik for r in rows
              if r.converged and math.isfinite(r.final_negative_loglik)]
        table[method] = {
            "n_records": len(rows),
            "proportion_converged": sum(r.converged for r in rows) / len(rows),
            "n_map_evals": _stats([r.n_map_evals for r in rows]),
            "n_iterations": _stats([r.n_iterations for r in rows]),
            "wall_seconds": _stats([r.wall_seconds for r in rows]),
            "mean_negative_loglik": statistics.fmean(ok) if ok else None,
            "n_excluded": len(rows) - len(ok),
        }
    return table


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj

