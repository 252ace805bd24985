"""Product-space reformulation of an N-set problem as a 2-set problem.

A point of ``(R^n)^N`` is stored as the flat concatenation of its N blocks.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .geometry import Diagonal, GeometryError, Product, SetSpec, as_vector, common_dim

__all__ = ["lift", "embed_diagonal", "candidate"]


def lift(sets: Sequence[SetSpec]) -> tuple[Product, Diagonal]:
    """Return ``(C, D)``: the product of `sets` and the diagonal subspace."""
    sets = tuple(sets)
    n = common_dim(sets)
    return Product(sets), Diagonal(block_dim=n, copies=len(sets))


def embed_diagonal(x, copies: int) -> np.ndarray:
    """Concatenate `copies` copies of `x`."""
    if int(copies) < 1:
        raise GeometryError("copies must be at least 1")
    return np.tile(as_vector(x), int(copies))


def candidate(X, block_dim: int) -> np.ndarray:
    """Blockwise mean of a product-space point, i.e. a block of its diagonal projection."""
    X = as_vector(X, "X")
    if block_dim < 1 or X.size % block_dim:
        raise GeometryError(f"length {X.size} is not a multiple of block_dim={block_dim}")
    return X.reshape(-1, block_dim).mean(axis=0)
