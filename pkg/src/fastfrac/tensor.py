"""
Tensor-product grids and interior-node fields.

A field is a plain ``numpy.ndarray`` whose shape equals ``grid.interior_shape``;
boundary nodes carry the homogeneous Dirichlet value and are never stored.
Arrays are C-ordered, so the last axis is contiguous.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Grid:
    """Uniform grid on the box prod_k (a_k, b_k) with N_k intervals per axis."""

    bounds: tuple[tuple[float, float], ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.bounds) != len(self.counts):
            raise ConfigError("bounds and counts must have the same length")
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"dimension must be 1, 2 or 3, got {self.dim}")
        for (a, b), n in zip(self.bounds, self.counts):
            if not a < b:
                raise ConfigError(f"degenerate interval ({a}, {b})")
            if int(n) != n or n < 2:
                raise ConfigError(f"interval count must be an integer >= 2, got {n}")

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple((b - a) / n for (a, b), n in zip(self.bounds, self.counts))

    @property
    def interior_shape(self) -> tuple[int, ...]:
        return tuple(n - 1 for n in self.counts)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def nodes(self, axis: int) -> np.ndarray:
        """Interior node coordinates a_k + i h_k, i = 1..N_k-1, along one axis."""
        a, _ = self.bounds[axis]
        return a + np.arange(1, self.counts[axis]) * self.h[axis]

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Broadcastable (open) coordinate arrays, one per axis."""
        return tuple(np.ix_(*[self.nodes(k) for k in range(self.dim)]))

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.bounds, tuple(n * factor for n in self.counts))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.interior_shape)


def make_grid(d: int, bounds, counts) -> Grid:
    """Build a :class:`Grid`.

    ``bounds`` is either a single ``(a, b)`` pair applied to every axis or one
    pair per axis; ``counts`` is an int or one int per axis.
    """
    if d not in (1, 2, 3):
        raise ConfigError(f"dimension must be 1, 2 or 3, got {d}")
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape == (2,):
        bounds = np.tile(bounds, (d, 1))
    if bounds.shape != (d, 2):
        raise ConfigError(f"expected {d} (a, b) pairs, got shape {bounds.shape}")
    if np.isscalar(counts):
        counts = (counts,) * d
    counts = tuple(int(n) if float(n).is_integer() else n for n in counts)
    if len(counts) != d:
        raise ConfigError(f"expected {d} interval counts, got {len(counts)}")
    return Grid(tuple((float(a), float(b)) for a, b in bounds), counts)


def unit_grid(d: int, n: int) -> Grid:
    return make_grid(d, (0.0, 1.0), n)


def mode_apply(W: np.ndarray, R: np.ndarray, axis: int) -> np.ndarray:
    """Apply the square matrix ``W`` along ``axis`` of ``R``.

    result[..., i, ...] = sum_j W[i, j] R[..., j, ...]
    """
    W = np.asarray(W)
    R = np.asarray(R)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[1] != R.shape[axis]:
        raise ValueError(
            f"matrix of shape {W.shape} cannot act on axis {axis} of a field of shape {R.shape}"
        )
    out = np.tensordot(W, R, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def hadamard(A: np.ndarray, R: np.ndarray) -> np.ndarray:
    if np.shape(A) != np.shape(R):
        raise ValueError(f"shape mismatch: {np.shape(A)} vs {np.shape(R)}")
    return np.multiply(A, R)


def discrete_l2_norm(e: np.ndarray, grid: Grid | Sequence[float]) -> float:
    """sqrt(prod_k h_k * sum e^2) over interior nodes."""
    h = grid.h if isinstance(grid, Grid) else tuple(grid)
    e = np.asarray(e, dtype=float)
    return float(np.sqrt(np.prod(h) * np.sum(e * e)))


def discrete_max_norm(e: np.ndarray) -> float:
    e = np.asarray(e)
    if e.size == 0:
        return 0.0
    return float(np.max(np.abs(e)))
