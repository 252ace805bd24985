"""Cyclic and averaged Douglas-Rachford projection schemes for N-set feasibility."""

from .geometry import (
    AffineSubspace,
    Ball,
    Box,
    Diagonal,
    GeometryError,
    HalfSpace,
    Hyperplane,
    Product,
    SetSpec,
    Singleton,
    Sphere,
    contains,
    project,
    reflect,
)
from .operators import (
    AlternatingProjections,
    AveragedDR,
    Composition,
    CyclicDR,
    IterationTrace,
    NonFiniteIterateError,
    Projection,
    Relaxation,
    Termination,
    TwoSetDR,
    averaged_step,
    compose,
    cyclic_step,
    dr_step,
    error_metric,
    iterate,
    map_step,
    relax,
)
from .product import candidate, embed_diagonal, lift

__version__ = "0.1.0"
