"""
Type-I discrete sine transforms on interior-node fields.

The forward transform is the unnormalised sine sum

    y_i = sum_{j=1}^{N-1} sin(i j pi / N) x_j,

i.e. multiplication by the symmetric sine matrix P.  Since P @ P = (N/2) I,
the inverse is (2/N) P.  Fast transforms go through ``scipy.fft.dst``
(pocketfft, O(N log N)); the dense O(N^2) path is kept for testing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft

from .tensor import mode_apply


@lru_cache(maxsize=64)
def _sine_matrix_cached(n: int) -> np.ndarray:
    idx = np.arange(1, n)
    P = np.sin(np.outer(idx, idx) * np.pi / n)
    P.setflags(write=False)
    return P


def sine_matrix(n: int) -> np.ndarray:
    """Dense (n-1) x (n-1) matrix with entries sin(i j pi / n)."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    return _sine_matrix_cached(int(n))


def _check_1d(x, n):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("expected a 1-D vector")
    if n is not None and x.shape[0] != n - 1:
        raise ValueError(f"vector of length {x.shape[0]} does not match N = {n}")
    return x


def dst_1d(x, n: int | None = None, dense: bool = False) -> np.ndarray:
    x = _check_1d(x, n)
    n = x.shape[0] + 1
    if dense:
        return sine_matrix(n) @ x
    return 0.5 * scipy.fft.dst(x, type=1)


def idst_1d(y, n: int | None = None, dense: bool = False) -> np.ndarray:
    y = _check_1d(y, n)
    n = y.shape[0] + 1
    return (2.0 / n) * dst_1d(y, dense=dense)


@dataclass(frozen=True)
class DstPlan:
    """Transform plan for fields of a fixed interior shape.

    ``shape`` is the interior shape (N_k - 1 per axis).  ``workers`` is handed
    to pocketfft for pencil-parallel execution.
    """

    shape: tuple[int, ...]
    dense: bool = False
    workers: int | None = None
    _scale: float = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(m) for m in self.shape))
        if any(m < 1 for m in self.shape):
            raise ValueError(f"invalid interior shape {self.shape}")
        # inverse normalisation prod_k 2/N_k
        object.__setattr__(self, "_scale", float(np.prod([2.0 / (m + 1) for m in self.shape])))

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(m + 1 for m in self.shape)

    def _check(self, R):
        R = np.asarray(R, dtype=float)
        if R.shape != self.shape:
            raise ValueError(f"field shape {R.shape} does not match plan shape {self.shape}")
        return R

    def _sine_sum(self, R):
        if self.dense:
            for k, m in enumerate(self.shape):
                R = mode_apply(sine_matrix(m + 1), R, k)
            return R
        out = scipy.fft.dstn(R, type=1, workers=self.workers)
        out *= 0.5 ** R.ndim
        return out

    def forward(self, R) -> np.ndarray:
        return self._sine_sum(self._check(R))

    def inverse(self, R) -> np.ndarray:
        out = self._sine_sum(self._check(R))
        out *= self._scale
        return out


def plan_for(grid_or_shape, dense: bool = False, workers: int | None = None) -> DstPlan:
    shape = getattr(grid_or_shape, "interior_shape", grid_or_shape)
    return DstPlan(tuple(shape), dense=dense, workers=workers)


def dst_nd(R, plan: DstPlan | None = None) -> np.ndarray:
    if plan is None:
        plan = DstPlan(np.shape(R))
    return plan.forward(R)


def idst_nd(R, plan: DstPlan | None = None) -> np.ndarray:
    if plan is None:
        plan = DstPlan(np.shape(R))
    return plan.inverse(R)
