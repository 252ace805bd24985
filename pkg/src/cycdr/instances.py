"""Random ball/sphere feasibility instances and the instance JSON format.

Randomness comes from :func:`substream`: a Philox (counter-based, 64-bit)
generator keyed by ``(seed, crc32(purpose), index)``. Each purpose/index
pair gets its own stream, so adding a set or changing N never perturbs
the draws for other sets, and results are identical on every platform.

JSON layout (UTF-8)::

    {"dim": 2, "kind": "custom", "seed": 0,
     "sets": [{"type": "ball", "center": [0, 0], "radius": 1.0},
              {"type": "sphere", "center": [...], "radius": r},
              {"type": "hyperplane", "normal": [...], "offset": b},
              {"type": "halfspace", "normal": [...], "offset": b},
              {"type": "affine", "anchor": [...], "basis": [[...], ...]},
              {"type": "box", "lower": [...], "upper": [...]},
              {"type": "singleton", "point": [...]}]}

``kind`` and ``seed`` are optional on input.
"""

from __future__ import annotations

import enum
import json
import zlib
from dataclasses import dataclass

import numpy as np

from .geometry import (
    AffineSubspace,
    Ball,
    Box,
    GeometryError,
    HalfSpace,
    Hyperplane,
    SetSpec,
    Singleton,
    Sphere,
)

__all__ = [
    "InstanceKind",
    "ProblemInstance",
    "SchemaError",
    "substream",
    "gen_balls",
    "gen_spheres",
    "gen_x0",
    "read_instance",
    "write_instance",
]


def substream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Independent generator for one ``(purpose, index)`` under `seed`."""
    ss = np.random.SeedSequence(
        entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
        spawn_key=(zlib.crc32(purpose.encode("utf-8")), int(index)),
    )
    return np.random.Generator(np.random.Philox(ss))


class InstanceKind(str, enum.Enum):
    BALLS = "balls"
    SPHERES = "spheres"
    CUSTOM = "custom"


class SchemaError(ValueError):
    """Malformed instance document."""


@dataclass(frozen=True)
class ProblemInstance:
    dim: int
    sets: tuple
    seed: int = 0
    kind: InstanceKind = InstanceKind.CUSTOM

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(self.sets))
        object.__setattr__(self, "kind", InstanceKind(self.kind))
        for i, s in enumerate(self.sets):
            if s.dim != self.dim:
                raise GeometryError(f"set {i} has dimension {s.dim}, instance has {self.dim}")

    @property
    def N(self) -> int:
        return len(self.sets)


def _centers(n, N, seed):
    return [substream(seed, "center", i).uniform(-5.0, 5.0, size=n) for i in range(N)]


def gen_balls(n: int, N: int, seed: int) -> ProblemInstance:
    """N balls with centers in ``[-5, 5]^n`` and radii in ``[||c||, ||c|| + 0.1]``.

    Every ball contains the origin.
    """
    if n < 1 or N < 1:
        raise ValueError("n and N must be positive")
    sets = []
    for i, c in enumerate(_centers(n, N, seed)):
        norm = np.linalg.norm(c)
        r = norm + substream(seed, "radius", i).uniform(0.0, 0.1)
        sets.append(Ball(c, r))
    return ProblemInstance(n, sets, seed, InstanceKind.BALLS)


def gen_spheres(n: int, N: int, seed: int) -> ProblemInstance:
    """N spheres with centers in ``[-5, 5]^n`` passing through the origin."""
    if n < 1 or N < 1:
        raise ValueError("n and N must be positive")
    sets = [Sphere(c, np.linalg.norm(c)) for c in _centers(n, N, seed)]
    return ProblemInstance(n, sets, seed, InstanceKind.SPHERES)


def gen_x0(n: int, seed: int) -> np.ndarray:
    """Starting point uniform on ``[-10, 10]^n``."""
    if n < 1:
        raise ValueError("n must be positive")
    return substream(seed, "x0").uniform(-10.0, 10.0, size=n)


def _set_to_dict(s: SetSpec) -> dict:
    def lst(a):
        return [float(v) for v in np.ravel(a)]

    if isinstance(s, Ball):
        return {"type": "ball", "center": lst(s.center), "radius": s.radius}
    if isinstance(s, Sphere):
        return {"type": "sphere", "center": lst(s.center), "radius": s.radius}
    if isinstance(s, Hyperplane):
        return {"type": "hyperplane", "normal": lst(s.normal), "offset": s.offset}
    if isinstance(s, HalfSpace):
        return {"type": "halfspace", "normal": lst(s.normal), "offset": s.offset}
    if isinstance(s, AffineSubspace):
        return {"type": "affine", "anchor": lst(s.anchor), "basis": [lst(b) for b in s.basis]}
    if isinstance(s, Box):
        return {"type": "box", "lower": lst(s.lower), "upper": lst(s.upper)}
    if isinstance(s, Singleton):
        return {"type": "singleton", "point": lst(s.point)}
    raise SchemaError(f"{type(s).__name__} sets are not serialisable")


_BUILDERS = {
    "ball": (Ball, ("center", "radius")),
    "sphere": (Sphere, ("center", "radius")),
    "hyperplane": (Hyperplane, ("normal", "offset")),
    "halfspace": (HalfSpace, ("normal", "offset")),
    "affine": (AffineSubspace, ("anchor", "basis")),
    "box": (Box, ("lower", "upper")),
    "singleton": (Singleton, ("point",)),
}


def write_instance(instance: ProblemInstance) -> bytes:
    doc = {
        "dim": instance.dim,
        "kind": instance.kind.value,
        "seed": instance.seed,
        "sets": [_set_to_dict(s) for s in instance.sets],
    }
    return json.dumps(doc, indent=1).encode("utf-8")


def read_instance(data) -> ProblemInstance:
    """Parse an instance document (bytes or str)."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("instance must be a JSON object")
    if "dim" not in doc:
        raise SchemaError("missing required field 'dim'")
    if not isinstance(doc["dim"], int) or doc["dim"] < 1:
        raise SchemaError("'dim' must be a positive integer")
    entries = doc.get("sets")
    if not isinstance(entries, list) or not entries:
        raise SchemaError("'sets' must be a non-empty list")
    sets = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise SchemaError(f"sets[{i}] is not an object")
        kind = entry.get("type")
        if kind not in _BUILDERS:
            raise SchemaError(f"sets[{i}]: unknown set type {kind!r}")
        cls, keys = _BUILDERS[kind]
        missing = [k for k in keys if k not in entry]
        if missing:
            raise SchemaError(f"sets[{i}] ({kind}): missing field(s) {', '.join(missing)}")
        try:
            s = cls(*(entry[k] for k in keys))
        except (GeometryError, TypeError, ValueError) as exc:
            raise SchemaError(f"sets[{i}] ({kind}): {exc}") from exc
        if s.dim != doc["dim"]:
            raise SchemaError(f"sets[{i}] ({kind}): dimension {s.dim} does not match dim={doc['dim']}")
        sets.append(s)
    try:
        kind = InstanceKind(doc.get("kind", "custom"))
    except ValueError as exc:
        raise SchemaError(f"unknown instance kind {doc.get('kind')!r}") from exc
    return ProblemInstance(doc["dim"], sets, int(doc.get("seed", 0)), kind)
