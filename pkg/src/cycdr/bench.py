"""Seeded trial runner and mean/max aggregation over trials.

Trial ``k`` of every cell uses seed ``base_seed + k`` for the instance, the
starting point and the projection stream, so all methods in a cell see the
same ``(instance, x0)`` pairs.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .geometry import GeometryError
from .instances import InstanceKind, ProblemInstance, gen_balls, gen_spheres, gen_x0, substream
from .operators import (
    AlternatingProjections,
    AveragedDR,
    CyclicDR,
    NonFiniteIterateError,
    Termination,
    TwoSetDR,
    error_metric,
    iterate,
)
from .product import candidate, embed_diagonal, lift

log = logging.getLogger(__name__)

__all__ = [
    "Method",
    "TrialRecord",
    "ReportRow",
    "BenchmarkReport",
    "BenchmarkError",
    "run_trial",
    "run_suite",
    "aggregate",
    "emit_table",
    "CSV_COLUMNS",
]

CSV_COLUMNS = (
    "n", "N", "method", "eps", "iter_mean", "iter_max", "time_mean", "time_max",
    "err_mean", "err_max", "trials",
)


class Method(str, enum.Enum):
    CYCLIC = "cyclic"
    AVERAGED = "averaged"
    PRODUCT_DR = "product-dr"
    MAP = "map"


class BenchmarkError(RuntimeError):
    """A trial failed; the message names the cell and trial."""


@dataclass
class TrialRecord:
    method: Method
    n: int
    N: int
    eps: float
    seed: int
    iterations: int
    elapsed_s: float
    error: float
    termination: Termination
    # error at the first block of the product iterate (product DR only)
    first_block_error: float = float("nan")


@dataclass
class ReportRow:
    n: int
    N: int
    method: str
    eps: float
    iter_mean: float
    iter_max: int
    time_mean: float
    time_max: float
    err_mean: float
    err_max: float
    trials: int

    @property
    def key(self):
        return (self.n, self.N, self.method, self.eps)


@dataclass
class BenchmarkReport:
    rows: list
    trials: int
    seeds: list
    metadata: dict = field(default_factory=dict)
    records: list = field(default_factory=list, compare=False, repr=False)

    def row(self, n, N, method, eps) -> ReportRow:
        method = Method(method).value
        for r in self.rows:
            if r.key == (n, N, method, eps):
                return r
        raise KeyError((n, N, method, eps))

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "seeds": list(self.seeds),
            "metadata": dict(self.metadata),
            "rows": [asdict(r) for r in self.rows],
        }

    @classmethod
    def from_dict(cls, doc) -> "BenchmarkReport":
        return cls(
            rows=[ReportRow(**r) for r in doc["rows"]],
            trials=doc["trials"],
            seeds=list(doc["seeds"]),
            metadata=dict(doc.get("metadata", {})),
        )

    @classmethod
    def from_json(cls, data) -> "BenchmarkReport":
        return cls.from_dict(json.loads(data))


def run_trial(method, instance: ProblemInstance, x0, eps: float, cap: int = 1000, rng=None) -> TrialRecord:
    """Solve one instance with one method and score the result.

    Product DR starts from the diagonal embedding of `x0` and is scored at
    the blockwise mean of its final iterate; the other methods are scored
    at their final iterate directly. ``elapsed_s`` covers the iteration only.
    """
    method = Method(method)
    sets = instance.sets
    n, N = instance.dim, instance.N
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (n,):
        raise GeometryError(f"x0 has shape {x0.shape}, instance dimension is {n}")
    first_block = float("nan")
    if method is Method.PRODUCT_DR:
        C, D = lift(sets)
        trace = iterate(TwoSetDR(C, D), embed_diagonal(x0, N), eps, cap, rng, error_sets=())
        final = trace.final
        error = error_metric(sets, candidate(final, n), rng)
        first_block = error_metric(sets, final[:n], rng)
    else:
        op = {
            Method.CYCLIC: CyclicDR,
            Method.AVERAGED: AveragedDR,
            Method.MAP: AlternatingProjections,
        }[method](sets)
        trace = iterate(op, x0, eps, cap, rng, error_sets=())
        error = error_metric(sets, trace.final, rng)
    return TrialRecord(
        method=method,
        n=n,
        N=N,
        eps=eps,
        seed=instance.seed,
        iterations=trace.iterations,
        elapsed_s=trace.elapsed,
        error=error,
        termination=trace.termination,
        first_block_error=first_block,
    )


def aggregate(records: Sequence[TrialRecord]) -> ReportRow:
    """Mean and max of iterations, time and error over one cell's records."""
    if not records:
        raise ValueError("no records to aggregate")
    r0 = records[0]
    its = [r.iterations for r in records]
    ts = [r.elapsed_s for r in records]
    errs = [r.error for r in records]
    return ReportRow(
        n=r0.n,
        N=r0.N,
        method=Method(r0.method).value,
        eps=r0.eps,
        iter_mean=float(np.mean(its)),
        iter_max=int(max(its)),
        time_mean=float(np.mean(ts)),
        time_max=float(max(ts)),
        err_mean=float(np.mean(errs)),
        err_max=float(max(errs)),
        trials=len(records),
    )


_GENERATORS = {InstanceKind.BALLS: gen_balls, InstanceKind.SPHERES: gen_spheres}


def run_suite(
    kind,
    sizes: Iterable[tuple],
    eps_list: Iterable[float],
    methods: Iterable,
    trials: int = 10,
    base_seed: int = 0,
    cap: int = 1000,
) -> BenchmarkReport:
    """Run every ``(n, N) x eps x method`` cell for `trials` seeded trials."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    kind = InstanceKind(kind)
    if kind not in _GENERATORS:
        raise ValueError(f"cannot generate {kind.value!r} instances")
    gen = _GENERATORS[kind]
    methods = [Method(m) for m in methods]
    eps_list = [float(e) for e in eps_list]
    seeds = [base_seed + k for k in range(trials)]
    rows, records = [], []
    for n, N in sizes:
        pairs = [(gen(n, N, s), gen_x0(n, s)) for s in seeds]
        for eps in eps_list:
            for method in methods:
                cell = []
                for k, (inst, x0) in enumerate(pairs):
                    rng = substream(seeds[k], "projection")
                    try:
                        rec = run_trial(method, inst, x0, eps, cap, rng)
                    except (NonFiniteIterateError, GeometryError) as exc:
                        raise BenchmarkError(
                            f"cell=({n},{N},{method.value},{eps}) trial={k} seed={seeds[k]}: {exc}"
                        ) from exc
                    log.info("cell=%d,%d,%s,%g trial=%d iters=%d", n, N, method.value, eps, k, rec.iterations)
                    cell.append(rec)
                records.extend(cell)
                rows.append(aggregate(cell))
    metadata = {
        "problem": kind.value,
        "cap": cap,
        "base_seed": base_seed,
        "pairing": "trial k shares its (instance, x0) across all methods and eps values",
    }
    return BenchmarkReport(rows=rows, trials=trials, seeds=seeds, metadata=metadata, records=records)


def _num(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def emit_table(report: BenchmarkReport, format: str = "csv") -> bytes:
    """Render `report` as CSV (one row per cell) or JSON, at full precision."""
    if not report.rows:
        raise ValueError("empty report")
    format = format.lower()
    if format == "json":
        return json.dumps(report.to_dict(), indent=1).encode("utf-8")
    if format != "csv":
        raise ValueError(f"unknown format {format!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        d = asdict(r)
        w.writerow([_num(d[c]) for c in CSV_COLUMNS])
    return buf.getvalue().encode("utf-8")
