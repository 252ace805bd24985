"""Closed sets with exact nearest-point projections and reflections.

Points are plain 1-D ``numpy.float64`` arrays. Every set is an immutable
value object exposing ``dim`` and a ``_project`` kernel; callers go through
the module-level :func:`project`, :func:`reflect` and :func:`contains`,
which validate their input before dispatching.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

__all__ = [
    "GeometryError",
    "SetSpec",
    "Ball",
    "Sphere",
    "Hyperplane",
    "HalfSpace",
    "AffineSubspace",
    "Box",
    "Singleton",
    "Product",
    "Diagonal",
    "as_vector",
    "project",
    "reflect",
    "contains",
]

# relative threshold under which a Gram-Schmidt residual counts as dependent
_RANK_TOL = 1e-12
# inputs already unit / orthonormal to this tolerance are stored untouched,
# so normalisation is idempotent and instances round-trip bit-exactly
_UNIT_TOL = 4 * np.finfo(np.float64).eps


class GeometryError(ValueError):
    """Invalid set construction, dimension mismatch or non-finite input."""


def as_vector(x, name: str = "x") -> np.ndarray:
    """Return `x` as a finite 1-D float64 array (a fresh, writable copy)."""
    arr = np.array(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise GeometryError(f"{name} must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name} contains non-finite entries")
    return arr


def _frozen(x, name: str) -> np.ndarray:
    arr = as_vector(x, name)
    arr.flags.writeable = False
    return arr


class SetSpec:
    """Base class of the set catalogue.

    Subclasses are frozen dataclasses; equality compares array fields
    exactly, element by element.
    """

    convex: bool = True

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def _project(self, x: np.ndarray, rng) -> np.ndarray:
        raise NotImplementedError

    def __eq__(self, other):
        if type(self) is not type(other):
            return NotImplemented
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray):
                if a.shape != b.shape or not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Ball(SetSpec):
    """Closed ball ``{y : ||y - center|| <= radius}``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center, "center"))
        r = float(self.radius)
        if not np.isfinite(r) or r <= 0:
            raise GeometryError(f"ball radius must be positive and finite, got {self.radius}")
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        return self.center.size

    def _project(self, x, rng):
        d = x - self.center
        dist = np.linalg.norm(d)
        if dist <= self.radius:
            return x.copy()
        return self.center + (self.radius / dist) * d


@dataclass(frozen=True, eq=False)
class Sphere(SetSpec):
    """Sphere ``{y : ||y - center|| = radius}`` (not convex).

    At the exact center every point of the sphere is nearest; one is drawn
    uniformly by normalising a standard Gaussian vector taken from `rng`.
    """

    center: np.ndarray
    radius: float
    convex = False

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center, "center"))
        r = float(self.radius)
        if not np.isfinite(r) or r <= 0:
            raise GeometryError(f"sphere radius must be positive and finite, got {self.radius}")
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        return self.center.size

    def _project(self, x, rng):
        d = x - self.center
        dist = np.linalg.norm(d)
        if dist == 0.0:
            if rng is None:
                raise GeometryError("a random stream is required to project a sphere's center")
            u = rng.standard_normal(self.dim)
            while not np.any(u):
                u = rng.standard_normal(self.dim)
            return self.center + self.radius * (u / np.linalg.norm(u))
        return self.center + (self.radius / dist) * d


def _unit_normal(normal, offset):
    a = as_vector(normal, "normal")
    b = float(offset)
    if not np.isfinite(b):
        raise GeometryError("offset must be finite")
    nrm = np.linalg.norm(a)
    if nrm == 0.0:
        raise GeometryError("normal must be nonzero")
    if abs(nrm - 1.0) > _UNIT_TOL:
        a, b = a / nrm, b / nrm
    a.flags.writeable = False
    return a, b


@dataclass(frozen=True, eq=False)
class Hyperplane(SetSpec):
    """Hyperplane ``{y : <normal, y> = offset}``; the normal is rescaled to unit length."""

    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        a, b = _unit_normal(self.normal, self.offset)
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", b)

    @property
    def dim(self) -> int:
        return self.normal.size

    def _project(self, x, rng):
        return x - (self.normal @ x - self.offset) * self.normal


@dataclass(frozen=True, eq=False)
class HalfSpace(SetSpec):
    """Half-space ``{y : <normal, y> <= offset}``; the normal is rescaled to unit length."""

    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        a, b = _unit_normal(self.normal, self.offset)
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", b)

    @property
    def dim(self) -> int:
        return self.normal.size

    def _project(self, x, rng):
        excess = self.normal @ x - self.offset
        if excess <= 0:
            return x.copy()
        return x - excess * self.normal


def _orthonormalize(basis: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt, dropping numerically dependent rows."""
    kept = []
    for v in basis:
        w = v.copy()
        for q in kept:
            w -= (q @ w) * q
        nrm = np.linalg.norm(w)
        if nrm >= _RANK_TOL * max(np.linalg.norm(v), np.finfo(np.float64).tiny):
            kept.append(w / nrm)
    return np.array(kept, dtype=np.float64).reshape(len(kept), basis.shape[1])


@dataclass(frozen=True, eq=False)
class AffineSubspace(SetSpec):
    """``anchor + span(basis)``; the basis rows are stored orthonormalised."""

    anchor: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        anchor = _frozen(self.anchor, "anchor")
        n = anchor.size
        raw = np.array(self.basis, dtype=np.float64)
        if raw.size == 0:
            raw = raw.reshape(0, n)
        if raw.ndim != 2 or raw.shape[1] != n:
            raise GeometryError(f"basis must be a list of {n}-vectors, got shape {raw.shape}")
        if not np.all(np.isfinite(raw)):
            raise GeometryError("basis contains non-finite entries")
        gram = raw @ raw.T
        if not np.allclose(gram, np.eye(raw.shape[0]), rtol=0, atol=_UNIT_TOL):
            raw = _orthonormalize(raw)
        raw.flags.writeable = False
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "basis", raw)

    @property
    def dim(self) -> int:
        return self.anchor.size

    def _project(self, x, rng):
        d = x - self.anchor
        return self.anchor + self.basis.T @ (self.basis @ d)


@dataclass(frozen=True, eq=False)
class Box(SetSpec):
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo, hi = _frozen(self.lower, "lower"), _frozen(self.upper, "upper")
        if lo.shape != hi.shape:
            raise GeometryError("box bounds differ in dimension")
        if np.any(lo > hi):
            raise GeometryError("box requires lower <= upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    def _project(self, x, rng):
        return np.clip(x, self.lower, self.upper)


@dataclass(frozen=True, eq=False)
class Singleton(SetSpec):
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", _frozen(self.point, "point"))

    @property
    def dim(self) -> int:
        return self.point.size

    def _project(self, x, rng):
        return self.point.copy()


@dataclass(frozen=True, eq=False)
class Product(SetSpec):
    """Cartesian product of `blocks`, acting on the concatenation of their coordinates.

    Random streams are consumed block by block in index order.
    """

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise GeometryError("product needs at least one block")
        if not all(isinstance(b, SetSpec) for b in blocks):
            raise GeometryError("product blocks must be sets")
        object.__setattr__(self, "blocks", blocks)
        dims = tuple(b.dim for b in blocks)
        object.__setattr__(self, "block_dims", dims)
        object.__setattr__(self, "_offsets", np.concatenate([[0], np.cumsum(dims)]))
        # stacked centers/radii when every block is the same radial set type
        radial = None
        kinds = {type(b) for b in blocks}
        if len(kinds) == 1 and kinds <= {Ball, Sphere} and len(set(dims)) == 1:
            radial = (
                np.stack([b.center for b in blocks]),
                np.array([b.radius for b in blocks]),
            )
        object.__setattr__(self, "_radial", radial)

    @property
    def convex(self) -> bool:
        return all(b.convex for b in self.blocks)

    @property
    def dim(self) -> int:
        return int(self._offsets[-1])

    def _project_radial(self, x, rng):
        centers, radii = self._radial
        xb = x.reshape(centers.shape)
        d = xb - centers
        dist = np.linalg.norm(d, axis=1)
        if isinstance(self.blocks[0], Ball):
            inside = dist <= radii
            scale = radii / np.where(inside, 1.0, dist)
            return np.where(inside[:, None], xb, centers + scale[:, None] * d).ravel()
        hit = dist == 0.0
        scale = radii / np.where(hit, 1.0, dist)
        out = centers + scale[:, None] * d
        for i in np.flatnonzero(hit):
            out[i] = self.blocks[i]._project(x[self._offsets[i]:self._offsets[i + 1]], rng)
        return out.ravel()

    def _project(self, x, rng):
        if self._radial is not None:
            return self._project_radial(x, rng)
        out = np.empty_like(x)
        off = self._offsets
        for i, block in enumerate(self.blocks):
            out[off[i]:off[i + 1]] = block._project(x[off[i]:off[i + 1]], rng)
        return out

    def __eq__(self, other):
        if type(other) is not Product:
            return NotImplemented
        return len(self.blocks) == len(other.blocks) and all(
            a == b for a, b in zip(self.blocks, other.blocks)
        )


@dataclass(frozen=True, eq=False)
class Diagonal(SetSpec):
    """``{(x, x, ..., x)}`` with `copies` blocks of size `block_dim`."""

    block_dim: int
    copies: int

    def __post_init__(self):
        if int(self.block_dim) < 1 or int(self.copies) < 1:
            raise GeometryError("diagonal needs block_dim >= 1 and copies >= 1")
        object.__setattr__(self, "block_dim", int(self.block_dim))
        object.__setattr__(self, "copies", int(self.copies))

    @property
    def dim(self) -> int:
        return self.block_dim * self.copies

    def _project(self, x, rng):
        mean = x.reshape(self.copies, self.block_dim).mean(axis=0)
        return np.tile(mean, self.copies)


def _check(s: SetSpec, x) -> np.ndarray:
    x = as_vector(x)
    if x.size != s.dim:
        raise GeometryError(f"dimension mismatch: point has {x.size}, set has {s.dim}")
    return x


def project(s: SetSpec, x, rng=None) -> np.ndarray:
    """Nearest point of `s` to `x`.

    Parameters
    ----------
    s : SetSpec
        Target set.
    x : array_like
        Finite point of matching dimension.
    rng : numpy.random.Generator, optional
        Only consumed when a sphere is projected from its exact center.

    Returns
    -------
    numpy.ndarray
        A new array; `x` is never modified.
    """
    return s._project(_check(s, x), rng)


def reflect(s: SetSpec, x, rng=None) -> np.ndarray:
    """Reflection ``2 P_s(x) - x``."""
    x = _check(s, x)
    return 2.0 * s._project(x, rng) - x


def contains(s: SetSpec, x, tol: float = 0.0) -> bool:
    """True iff the distance from `x` to `s` is at most `tol`."""
    if tol < 0:
        raise GeometryError("tol must be nonnegative")
    x = _check(s, x)
    p = s._project(x, np.random.default_rng(0))
    return bool(np.linalg.norm(x - p) <= tol)


def common_dim(sets: Sequence[SetSpec]) -> int:
    """Shared ambient dimension of `sets`, raising on any disagreement."""
    if not sets:
        raise GeometryError("at least one set is required")
    dims = {s.dim for s in sets}
    if len(dims) != 1:
        raise GeometryError(f"sets live in different dimensions: {sorted(dims)}")
    return dims.pop()
