"""
Sine-diagonalised discrete operators for the shifted spectral fractional Laplacian.

Every 1-D stiffness matrix A_k = tridiag(b, a, b) and mass matrix
M_k = tridiag(d, c, d) used here shares the sine eigenvectors, so
(M^{-1} S + gamma I)^s acts as an entrywise multiplier ("symbol") between an
inverse and a forward DST.
"""
from __future__ import annotations

from enum import Enum
from functools import lru_cache

import numpy as np

from .dst import DstPlan, plan_for
from .errors import ConfigError
from .tensor import Grid


class Kind(str, Enum):
    FEM = "fem"        # linear finite elements
    CDM4 = "cdm4"      # fourth-order compact differences
    FD2 = "fd2"        # second-order central differences (CDM4 stiffness, identity mass)


class RhsMode(str, Enum):
    NODAL = "nodal"              # F holds f at the nodes, K = I
    LOAD_VECTOR = "load_vector"  # F holds (f, phi_i), K = M^{-1} (FEM only)


def as_kind(kind) -> Kind:
    try:
        return Kind(kind.lower() if isinstance(kind, str) else kind)
    except ValueError:
        raise ConfigError(f"unknown discretization {kind!r}; expected one of fem, cdm4, fd2")


def as_rhs_mode(mode) -> RhsMode:
    try:
        return RhsMode(mode.lower() if isinstance(mode, str) else mode)
    except ValueError:
        raise ConfigError(f"unknown rhs mode {mode!r}; expected nodal or load_vector")


def tridiag_coefficients(kind, h: float) -> tuple[float, float, float, float]:
    """(a, b, c, d) with A = tridiag(b, a, b) and M = tridiag(d, c, d)."""
    kind = as_kind(kind)
    if kind is Kind.FEM:
        return 2.0 / h, -1.0 / h, 4.0 * h / 6.0, h / 6.0
    if kind is Kind.CDM4:
        return 2.0 / h**2, -1.0 / h**2, 10.0 / 12.0, 1.0 / 12.0
    return 2.0 / h**2, -1.0 / h**2, 1.0, 0.0


def tridiag_matrices(kind, n: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Dense A_k and M_k; used by tests and small oracles only."""
    a, b, c, d = tridiag_coefficients(kind, h)
    m = n - 1
    off = np.ones(m - 1)
    A = a * np.eye(m) + b * (np.diag(off, 1) + np.diag(off, -1))
    M = c * np.eye(m) + d * (np.diag(off, 1) + np.diag(off, -1))
    return A, M


def stiffness_mass_eigenvalues(kind, n: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    if n < 2:
        raise ConfigError(f"need N >= 2, got {n}")
    a, b, c, d = tridiag_coefficients(kind, h)
    cos = np.cos(np.arange(1, n) * np.pi / n)
    return a - 2.0 * abs(b) * cos, c + 2.0 * abs(d) * cos


def mode_eigenvalues(kind, grid: Grid, gamma: float = 0.0) -> list[np.ndarray]:
    """Per-axis eigenvalues of M_k^{-1} A_k + (gamma / d) I_k."""
    if gamma < 0:
        raise ConfigError(f"gamma must be non-negative, got {gamma}")
    out = []
    for n, h in zip(grid.counts, grid.h):
        ls, lm = stiffness_mass_eigenvalues(kind, n, h)
        out.append(ls / lm + gamma / grid.dim)
    return out


def _outer_sum(vectors) -> np.ndarray:
    d = len(vectors)
    total = np.zeros([len(v) for v in vectors])
    for k, v in enumerate(vectors):
        shape = [1] * d
        shape[k] = len(v)
        total = total + v.reshape(shape)
    return total


def _outer_prod(vectors) -> np.ndarray:
    d = len(vectors)
    total = np.ones([len(v) for v in vectors])
    for k, v in enumerate(vectors):
        shape = [1] * d
        shape[k] = len(v)
        total = total * v.reshape(shape)
    return total


@lru_cache(maxsize=32)
def _mode_sum(grid: Grid, kind: Kind, gamma: float) -> np.ndarray:
    total = _outer_sum(mode_eigenvalues(kind, grid, gamma))
    total.setflags(write=False)
    return total


def mode_sum(grid: Grid, kind, gamma: float = 0.0) -> np.ndarray:
    """Array of sum_k lambda_{i_k}^{(k)}: eigenvalues of M^{-1} S + gamma I."""
    return _mode_sum(grid, as_kind(kind), float(gamma))


@lru_cache(maxsize=32)
def _build_H(grid: Grid, kind: Kind, s: float, gamma: float) -> np.ndarray:
    lam = _mode_sum(grid, kind, gamma)
    if not np.all(lam > 0):
        raise ConfigError("non-positive mode sum; operator is not positive definite")
    H = np.exp(s * np.log(lam))
    H.setflags(write=False)
    return H


def build_H(grid: Grid, kind, s: float, gamma: float = 0.0) -> np.ndarray:
    """Symbol of (M^{-1} S + gamma I)^s: (sum_k lambda_{i_k}^{(k)})^s.

    The returned array is cached and read-only.
    """
    if not s > 0:
        raise ConfigError(f"fractional order s must be positive, got {s}")
    return _build_H(grid, as_kind(kind), float(s), float(gamma))


def build_V(grid: Grid, kind, rhs_mode=RhsMode.NODAL) -> np.ndarray:
    """Symbol of K: ones for nodal data, prod_k 1/lambda^{(m_k)} for FEM load vectors."""
    kind, rhs_mode = as_kind(kind), as_rhs_mode(rhs_mode)
    if rhs_mode is RhsMode.NODAL:
        return np.ones(grid.interior_shape)
    if kind is not Kind.FEM:
        raise ConfigError("load-vector right-hand sides are only defined for the FEM discretization")
    inv = [1.0 / stiffness_mass_eigenvalues(kind, n, h)[1] for n, h in zip(grid.counts, grid.h)]
    return _outer_prod(inv)


def apply_fractional_op(U: np.ndarray, H: np.ndarray, plan: DstPlan | None = None) -> np.ndarray:
    """Matrix-free (M^{-1} S + gamma I)^s U  =  D(H * D^{-1}(U))."""
    if np.shape(U) != np.shape(H):
        raise ValueError(f"shape mismatch: field {np.shape(U)} vs symbol {np.shape(H)}")
    plan = plan or DstPlan(np.shape(U))
    return plan.forward(H * plan.inverse(U))


def solve_steady(
    F: np.ndarray,
    grid: Grid,
    kind,
    s: float,
    gamma: float = 0.0,
    kappa: float = 1.0,
    rhs_mode=RhsMode.NODAL,
    plan: DstPlan | None = None,
) -> np.ndarray:
    """Solve kappa (M^{-1} S + gamma I)^s U = K F by one DST pair.

    ``F`` is the nodal source when ``rhs_mode`` is nodal and the load vector
    (f, phi_i) otherwise.
    """
    if not kappa > 0:
        raise ConfigError(f"kappa must be positive, got {kappa}")
    F = np.asarray(F, dtype=float)
    if F.shape != grid.interior_shape:
        raise ValueError(f"field shape {F.shape} does not match grid {grid.interior_shape}")
    plan = plan or plan_for(grid)
    H = build_H(grid, kind, s, gamma)
    V = build_V(grid, kind, rhs_mode)
    return plan.forward(V * plan.inverse(F) / (kappa * H))


# --- right-hand side assembly -------------------------------------------------

_GAUSS_XI = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])  # on [0, 1]


def _gauss_points(grid: Grid, axis: int) -> np.ndarray:
    a, _ = grid.bounds[axis]
    h = grid.h[axis]
    left = a + np.arange(grid.counts[axis]) * h
    return (left[:, None] + h * _GAUSS_XI[None, :]).ravel()


def _gauss_to_nodes(vals: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Contract 2-point Gauss values along ``axis`` against hat functions."""
    vals = np.moveaxis(vals, axis, -1)
    n_el = vals.shape[-1] // 2
    vals = vals.reshape(vals.shape[:-1] + (n_el, 2))
    w = 0.5 * h
    # hat function phi_{e+1} rises on element e, phi_e falls on it
    rising = w * (vals @ _GAUSS_XI)
    falling = w * (vals @ (1.0 - _GAUSS_XI))
    out = rising[..., :-1] + falling[..., 1:]
    return np.moveaxis(out, -1, axis)


def load_vector(f, grid: Grid, quadrature: str = "gauss") -> np.ndarray:
    """Load vector (f, prod_k phi_{i_k}) for the tensor-product hat basis.

    ``f`` takes a tuple of broadcastable coordinate arrays.  ``"gauss"`` uses
    2-point Gauss per element and axis (exact for f piecewise linear);
    ``"lumped"`` uses nodal quadrature, (f, phi_i) ~ prod_k h_k f(x_i).
    """
    if quadrature == "lumped":
        return grid.cell_volume * np.broadcast_to(f(grid.mesh()), grid.interior_shape)
    if quadrature != "gauss":
        raise ConfigError(f"unknown quadrature {quadrature!r}; expected gauss or lumped")
    pts = np.ix_(*[_gauss_points(grid, k) for k in range(grid.dim)])
    vals = np.broadcast_to(f(pts), tuple(2 * n for n in grid.counts)).astype(float)
    for k in range(grid.dim):
        vals = _gauss_to_nodes(vals, k, grid.h[k])
    return vals


def assemble_rhs(f, grid: Grid, kind, rhs_mode=RhsMode.NODAL, quadrature: str = "gauss") -> np.ndarray:
    """Right-hand side array F matching :func:`build_V` for the given mode."""
    if as_rhs_mode(rhs_mode) is RhsMode.NODAL:
        return np.array(np.broadcast_to(f(grid.mesh()), grid.interior_shape), dtype=float)
    if as_kind(kind) is not Kind.FEM:
        raise ConfigError("load-vector right-hand sides are only defined for the FEM discretization")
    return load_vector(f, grid, quadrature)
