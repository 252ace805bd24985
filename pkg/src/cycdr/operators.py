"""Douglas-Rachford operators, combinators and the fixed-point driver.

The two-set operator is ``T_{A,B} = (I + R_B R_A) / 2``. The cyclic
operator runs ``T_{1,2}``, ``T_{2,3}``, ..., ``T_{N,1}`` in that order; the
averaged operator takes the mean of the same N maps, each evaluated at the
same input point.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import GeometryError, SetSpec, as_vector, common_dim, project, reflect

__all__ = [
    "NonFiniteIterateError",
    "Operator",
    "Projection",
    "TwoSetDR",
    "CyclicDR",
    "AveragedDR",
    "AlternatingProjections",
    "Relaxation",
    "Composition",
    "Termination",
    "IterationTrace",
    "dr_step",
    "cyclic_step",
    "averaged_step",
    "map_step",
    "relax",
    "compose",
    "iterate",
    "error_metric",
]


class NonFiniteIterateError(ArithmeticError):
    """Raised when an iterate acquires NaN or infinite coordinates."""

    def __init__(self, iteration: int, message: str = ""):
        self.iteration = iteration
        super().__init__(message or f"non-finite iterate at iteration {iteration}")


def _finite(x: np.ndarray, where: str) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise GeometryError(f"non-finite intermediate in {where}")
    return x


def dr_step(A: SetSpec, B: SetSpec, x, rng=None) -> np.ndarray:
    """Apply the two-set Douglas-Rachford map ``(x + R_B R_A x) / 2``."""
    x = as_vector(x)
    y = reflect(B, _finite(reflect(A, x, rng), "R_A"), rng)
    return _finite(0.5 * (x + y), "T_{A,B}")


def _need_two(sets):
    sets = tuple(sets)
    if len(sets) < 2:
        raise GeometryError("at least two sets are required")
    common_dim(sets)
    return sets


def cyclic_step(sets: Sequence[SetSpec], x, rng=None, record_substeps: bool = False):
    """One full pass ``T_{N,1} ... T_{2,3} T_{1,2}`` of the cyclic scheme.

    Returns
    -------
    (numpy.ndarray, list or None)
        The new point and, when `record_substeps` is set, the N
        intermediate outputs (the last one equals the new point).
    """
    sets = _need_two(sets)
    x = as_vector(x)
    subs = [] if record_substeps else None
    n = len(sets)
    for i in range(n):
        x = dr_step(sets[i], sets[(i + 1) % n], x, rng)
        if subs is not None:
            subs.append(x)
    return x, subs


def averaged_step(sets: Sequence[SetSpec], x, rng=None) -> np.ndarray:
    """Mean of ``T_{i,i+1} x`` over the cycle, every summand taken at `x`."""
    sets = _need_two(sets)
    x = as_vector(x)
    n = len(sets)
    acc = np.zeros_like(x)
    for i in range(n):
        acc += dr_step(sets[i], sets[(i + 1) % n], x, rng)
    return acc / n


def map_step(sets: Sequence[SetSpec], x, rng=None) -> np.ndarray:
    """Sequential projections ``P_N ... P_2 P_1 x`` (alternating projections)."""
    sets = tuple(sets)
    common_dim(sets)
    x = as_vector(x)
    for s in sets:
        x = project(s, x, rng)
    return x


def error_metric(sets: Sequence[SetSpec], x, rng=None) -> float:
    """Shadow disagreement ``sum_{i>=2} ||P_1 x - P_i x||^2`` (0 for one set)."""
    sets = tuple(sets)
    common_dim(sets)
    p1 = project(sets[0], x, rng)
    total = 0.0
    for s in sets[1:]:
        d = p1 - project(s, x, rng)
        total += float(d @ d)
    return total


class Operator:
    """A self-map of R^n evaluated as ``op(x, rng)``."""

    dim: int

    def __call__(self, x, rng=None) -> np.ndarray:
        return self.apply(x, rng)[0]

    def apply(self, x, rng=None, record: bool = False):
        """Evaluate at `x`; returns ``(point, substeps or None)``."""
        raise NotImplementedError

    @property
    def sets(self) -> tuple:
        """Constraint sets the operator is built from (used for error reporting)."""
        return ()


class Projection(Operator):
    def __init__(self, set: SetSpec):
        self.set = set
        self.dim = set.dim

    def apply(self, x, rng=None, record=False):
        return project(self.set, x, rng), None

    @property
    def sets(self):
        return (self.set,)

    def __repr__(self):
        return f"Projection({self.set!r})"


class TwoSetDR(Operator):
    def __init__(self, A: SetSpec, B: SetSpec):
        self.dim = common_dim([A, B])
        self.A, self.B = A, B

    def apply(self, x, rng=None, record=False):
        y = dr_step(self.A, self.B, x, rng)
        return y, ([y] if record else None)

    @property
    def sets(self):
        return (self.A, self.B)


class _CycleOperator(Operator):
    def __init__(self, sets: Sequence[SetSpec]):
        self._sets = _need_two(sets)
        self.dim = common_dim(self._sets)

    @property
    def sets(self):
        return self._sets


class CyclicDR(_CycleOperator):
    def apply(self, x, rng=None, record=False):
        return cyclic_step(self._sets, x, rng, record_substeps=record)


class AveragedDR(_CycleOperator):
    def apply(self, x, rng=None, record=False):
        y = averaged_step(self._sets, x, rng)
        return y, ([y] if record else None)


class AlternatingProjections(_CycleOperator):
    def apply(self, x, rng=None, record=False):
        if not record:
            return map_step(self._sets, x, rng), None
        subs = []
        x = as_vector(x)
        for s in self._sets:
            x = project(s, x, rng)
            subs.append(x)
        return x, subs


class Relaxation(Operator):
    """``alpha I + (1 - alpha) inner``."""

    def __init__(self, alpha: float, inner: Operator):
        alpha = float(alpha)
        if not 0.0 <= alpha < 1.0:
            raise ValueError(f"relaxation parameter must lie in [0, 1), got {alpha}")
        self.alpha, self.inner, self.dim = alpha, inner, inner.dim

    def apply(self, x, rng=None, record=False):
        x = as_vector(x)
        y = self.alpha * x + (1.0 - self.alpha) * self.inner(x, rng)
        return y, ([y] if record else None)

    @property
    def sets(self):
        return self.inner.sets


class Composition(Operator):
    """Applies `ops` left to right: the first listed acts first."""

    def __init__(self, ops: Sequence[Operator]):
        ops = tuple(ops)
        if not ops:
            raise ValueError("composition of an empty operator list")
        dims = {op.dim for op in ops}
        if len(dims) != 1:
            raise GeometryError(f"composed operators differ in dimension: {sorted(dims)}")
        self.ops, self.dim = ops, dims.pop()

    def apply(self, x, rng=None, record=False):
        subs = [] if record else None
        for op in self.ops:
            x, inner = op.apply(x, rng, record)
            if record:
                subs.extend(inner if inner is not None else [x])
        return x, subs

    @property
    def sets(self):
        seen = []
        for op in self.ops:
            seen.extend(s for s in op.sets if not any(s is t for t in seen))
        return tuple(seen)


def relax(op: Operator, alpha: float) -> Relaxation:
    return Relaxation(alpha, op)


def compose(ops: Sequence[Operator]) -> Operator:
    ops = tuple(ops)
    return ops[0] if len(ops) == 1 else Composition(ops)


class Termination(str, enum.Enum):
    CONVERGED = "converged"
    ITERATION_CAP = "iteration_cap"


@dataclass
class IterationTrace:
    """Record of one run of :func:`iterate`.

    When the run was not recorded, `iterates` holds only the start and end
    points and `substeps` is None.
    """

    iterates: list
    step_norms: list
    termination: Termination
    iterations: int
    elapsed: float
    final_error: float
    substeps: Optional[list] = None
    recorded: bool = field(default=False)

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]

    def rows(self):
        """Yield ``(iter, substep, coords, step_norm)`` rows.

        Outer iterates carry ``substep = 0``; the sub-steps of the pass that
        produced iterate k are listed after it as ``substep = 1..m``.
        """
        if self.recorded:
            per = None
            if self.substeps is not None and self.iterations:
                per = len(self.substeps) // self.iterations
            for k, x in enumerate(self.iterates):
                yield k, 0, x, (self.step_norms[k - 1] if k else None)
                if per and k:
                    for j, s in enumerate(self.substeps[(k - 1) * per:k * per], 1):
                        yield k, j, s, None
        else:
            yield 0, 0, self.iterates[0], None
            if self.iterations:
                yield self.iterations, 0, self.iterates[-1], self.step_norms[-1]

    def to_csv(self) -> str:
        n = self.iterates[0].size
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "substep"] + [f"coord_{i}" for i in range(n)] + ["step_norm"])
        for k, j, x, s in self.rows():
            w.writerow([k, j] + [repr(float(c)) for c in x] + ["" if s is None else repr(s)])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "termination": self.termination.value,
            "iterations": self.iterations,
            "elapsed": self.elapsed,
            "final_error": self.final_error,
            "rows": [
                {"iter": k, "substep": j, "coords": [float(c) for c in x], "step_norm": s}
                for k, j, x, s in self.rows()
            ],
        }
        return json.dumps(doc, indent=1)


def iterate(
    op: Operator,
    x0,
    eps: float,
    max_iter: int = 1000,
    rng=None,
    record: bool = False,
    error_sets: Optional[Sequence[SetSpec]] = None,
) -> IterationTrace:
    """Run ``x_{k+1} = op(x_k)`` until ``||x_{k+1} - x_k|| < eps`` or `max_iter` steps.

    Parameters
    ----------
    op : Operator
        Map to iterate.
    x0 : array_like
        Finite starting point.
    eps : float
        Step-norm threshold; the step that falls below it is included.
    max_iter : int
        Iteration cap (number of applications of `op`).
    rng : numpy.random.Generator, optional
        Stream handed to every projection.
    record : bool
        Keep every iterate (and sub-step, where the operator has them).
    error_sets : sequence of SetSpec, optional
        Sets for the final error; defaults to ``op.sets``.

    Returns
    -------
    IterationTrace

    Raises
    ------
    NonFiniteIterateError
        If any iterate (or intermediate reflection) is not finite.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be a positive integer")
    x = as_vector(x0, "x0")
    if x.size != op.dim:
        raise GeometryError(f"dimension mismatch: x0 has {x.size}, operator acts on {op.dim}")
    iterates = [x]
    substeps = [] if record else None
    steps = []
    termination = Termination.ITERATION_CAP
    start = time.perf_counter()
    for k in range(1, max_iter + 1):
        try:
            y, subs = op.apply(x, rng, record)
        except GeometryError as exc:
            raise NonFiniteIterateError(k, f"iteration {k}: {exc}") from exc
        if not np.all(np.isfinite(y)):
            raise NonFiniteIterateError(k)
        step = float(np.linalg.norm(y - x))
        steps.append(step)
        if record:
            iterates.append(y)
            substeps.extend(subs if subs is not None else [y])
        x = y
        if step < eps:
            termination = Termination.CONVERGED
            break
    elapsed = time.perf_counter() - start
    if not record:
        iterates.append(x)
    sets = tuple(error_sets) if error_sets is not None else op.sets
    err = error_metric(sets, x, rng) if sets else float("nan")
    return IterationTrace(
        iterates=iterates,
        step_norms=steps,
        termination=termination,
        iterations=len(steps),
        elapsed=elapsed,
        final_error=err,
        substeps=substeps,
        recorded=record,
    )
