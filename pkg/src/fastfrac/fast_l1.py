"""
Fast L1 time stepping for the Caputo derivative of order alpha in (0, 1].

The L1 operator at t_n is split into a local part

    (u^n - alpha u^{n-1} - (1 - alpha) n^{-alpha} u^0) / tau,   tau = dt^alpha Gamma(2 - alpha),

and a history integral whose kernel t^{-1-alpha} / Gamma(-alpha) is replaced
by a sum of Q decaying exponentials sum_j w_j exp(xi_j t).  Each exponential
carries an auxiliary field Y_j obeying an exact one-step recurrence, so the
memory cost is O(Q) fields regardless of the number of steps taken.

alpha = 1 is accepted and reduces to backward Euler (no history terms).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import gamma as gamma_fn
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import blas

from .dst import DstPlan, plan_for
from .errors import ConfigError, SolverError
from .operators import RhsMode, assemble_rhs, build_H, build_V
from .tensor import Grid

EPS0 = 1e-16
DEFAULT_Q = 128


@dataclass(frozen=True)
class SoeQuadrature:
    """Exponential-sum approximation of t^{-1-alpha} / Gamma(-alpha) on [dt, T]."""

    nodes: np.ndarray     # xi_j < 0
    weights: np.ndarray   # w_j
    alpha: float
    dt: float
    T: float
    eps: float = EPS0

    @property
    def Q(self) -> int:
        return len(self.nodes)

    def kernel(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.exp(np.multiply.outer(t, self.nodes)) @ self.weights


def soe_build(alpha: float, dt: float, T: float, Q: int = DEFAULT_Q, eps0: float = EPS0) -> SoeQuadrature:
    """Trapezoidal rule in y = log(xi) for the integral representation

        t^{-1-alpha} / Gamma(-alpha) = -(sin(alpha pi) / pi) int exp((1 + alpha) y - t e^y) dy.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1) for the exponential sum, got {alpha}")
    if not 0.0 < dt < T:
        raise ConfigError(f"need 0 < dt < T, got dt={dt}, T={T}")
    if Q < 2:
        raise ConfigError(f"need Q >= 2, got {Q}")
    y_min = np.log(eps0) / (1.0 + alpha) - np.log(T)
    arg = (-np.log(eps0) + (1.0 + alpha) * np.log(dt)) / (0.5 * dt)
    if arg <= 0 or np.log(arg) <= y_min:
        raise ConfigError(f"empty quadrature interval for dt={dt}, T={T}, alpha={alpha}")
    y_max = np.log(arg)
    dy = (y_max - y_min) / (Q - 1)
    y = y_min + np.arange(Q) * dy
    w = -(np.sin(alpha * np.pi) / np.pi) * dy * np.exp((1.0 + alpha) * y)
    xi = -np.exp(y)
    w.setflags(write=False)
    xi.setflags(write=False)
    return SoeQuadrature(xi, w, float(alpha), float(dt), float(T), float(eps0))


_TAYLOR_CUTOFF = 0.1
_TAYLOR_TERMS = 16


def _phi1_phi2(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """phi1 = (e^z - 1)/z and phi2 = (e^z - 1 - z)/z^2 without cancellation."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < _TAYLOR_CUTOFF
    zs = np.where(small, 1.0, z)
    phi1 = np.expm1(zs) / zs
    phi2 = (np.expm1(zs) - zs) / (zs * zs)
    if np.any(small):
        zt = z[small] if z.ndim else z
        p1 = np.zeros_like(zt)
        p2 = np.zeros_like(zt)
        fact1, fact2 = 1.0, 2.0
        for k in range(_TAYLOR_TERMS):
            p1 = p1 + zt**k / fact1
            p2 = p2 + zt**k / fact2
            fact1 *= k + 2
            fact2 *= k + 3
        if z.ndim:
            phi1[small] = p1
            phi2[small] = p2
        else:
            phi1, phi2 = p1, p2
    return phi1, phi2


def kappa_coefficients(xi, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact one-step coefficients of Y' = xi Y + (linear interpolant of u).

    With z = xi dt:  kappa1 = e^z,
    kappa3 = (e^z - z - 1) / (z xi) = dt phi2(z),
    kappa2 = (e^z - 1) / xi - kappa3 = dt (phi1(z) - phi2(z)).
    """
    xi = np.asarray(xi, dtype=float)
    z = xi * dt
    phi1, phi2 = _phi1_phi2(z)
    ez = np.exp(z)
    # phi1 - phi2 = (1 + (z - 1) e^z) / z^2; the right side avoids cancellation once |z| > 1
    zs = np.where(np.abs(z) > 1.0, z, -2.0)
    diff = np.where(np.abs(z) > 1.0, (1.0 + (zs - 1.0) * np.exp(zs)) / (zs * zs), phi1 - phi2)
    return ez, dt * diff, dt * phi2


@dataclass
class FastL1State:
    """Everything step n needs: u^0, u^{n-1}, and the Q history fields Y_j(t_{n-1}).

    ``n`` counts completed steps; ``u_prev`` is u^n after ``n`` steps.
    """

    alpha: float
    dt: float
    u0: np.ndarray
    u_prev: np.ndarray
    history: np.ndarray                      # (Q,) + field shape
    quadrature: SoeQuadrature | None
    n: int = 0
    kappa1: np.ndarray = field(default=None, repr=False)
    kappa2: np.ndarray = field(default=None, repr=False)
    kappa3: np.ndarray = field(default=None, repr=False)
    decay: np.ndarray = field(default=None, repr=False)   # w_j exp(xi_j dt)

    def __post_init__(self):
        if self.quadrature is not None:
            q = self.quadrature
            self.kappa1, self.kappa2, self.kappa3 = kappa_coefficients(q.nodes, self.dt)
            self.decay = q.weights * np.exp(q.nodes * self.dt)
        else:
            empty = np.zeros(0)
            self.kappa1 = self.kappa2 = self.kappa3 = self.decay = empty

    @property
    def tau(self) -> float:
        return self.dt**self.alpha * gamma_fn(2.0 - self.alpha)

    @property
    def Q(self) -> int:
        return 0 if self.quadrature is None else self.quadrature.Q

    @property
    def nbytes(self) -> int:
        return self.u0.nbytes + self.u_prev.nbytes + self.history.nbytes


def init_state(u0, alpha: float, dt: float, T: float, Q: int = DEFAULT_Q) -> FastL1State:
    """Fresh state at t_0 with all history fields zero."""
    if not 0.0 < alpha <= 1.0:
        raise ConfigError(f"alpha must lie in (0, 1], got {alpha}")
    u0 = np.array(u0, dtype=float)
    quad = None if alpha == 1.0 else soe_build(alpha, dt, T, Q)
    q = 0 if quad is None else quad.Q
    return FastL1State(
        alpha=float(alpha),
        dt=float(dt),
        u0=u0,
        u_prev=u0.copy(),
        history=np.zeros((q,) + u0.shape),
        quadrature=quad,
    )


def history_update(state: FastL1State, u_old: np.ndarray, u_new: np.ndarray) -> None:
    """Advance every Y_j by one step in place:
    Y_j <- kappa1 Y_j + kappa2 u_old + kappa3 u_new."""
    if state.Q == 0:
        return
    if np.shape(u_old) != state.u0.shape or np.shape(u_new) != state.u0.shape:
        raise ValueError("field shape does not match the state")
    if not state.history.flags.c_contiguous:
        state.history = np.ascontiguousarray(state.history)
    Y = state.history.reshape(state.Q, -1)
    Y *= state.kappa1[:, None]
    # rank-one updates straight into Y (viewed Fortran-ordered), no Q x N temporaries
    Yt = Y.T
    for k, u in ((state.kappa2, u_old), (state.kappa3, u_new)):
        out = blas.dger(1.0, np.ravel(u).astype(float, copy=False), k, a=Yt, overwrite_a=True)
        if not np.shares_memory(out, Yt):
            Yt[...] = out


def history_sum(state: FastL1State) -> np.ndarray:
    """sum_j w_j exp(xi_j dt) Y_j  (the compressed history integral)."""
    if state.Q == 0:
        return np.zeros_like(state.u0)
    return np.tensordot(state.decay, state.history, axes=(0, 0))


def assemble_g(state: FastL1State, n: int | None = None) -> np.ndarray:
    """Memory term g^n = alpha u^{n-1} + (1-alpha) n^{-alpha} u^0 - tau * history sum."""
    n = state.n + 1 if n is None else n
    if n < 1:
        raise ValueError(f"step index must be >= 1, got {n}")
    if n == 1:
        # alpha u^0 + (1 - alpha) u^0, without the round-off
        return state.u0.copy()
    a = state.alpha
    g = a * state.u_prev + (1.0 - a) * n ** (-a) * state.u0
    if n > 1 and state.Q:
        g -= state.tau * history_sum(state)
    return g


def caputo_estimate(state: FastL1State, u_new: np.ndarray) -> np.ndarray:
    """Fast L1 value of the Caputo derivative at t_{n}, given u^n = ``u_new``."""
    return (u_new - assemble_g(state)) / state.tau


def advance(state: FastL1State, u_new: np.ndarray) -> None:
    """Record u^n: update history with (u^{n-1}, u^n) and shift the state."""
    history_update(state, state.u_prev, u_new)
    state.u_prev = np.array(u_new, dtype=float)
    state.n += 1


@dataclass(frozen=True)
class StepOperator:
    """Precomputed transform-space multipliers for the linear fractional step."""

    H: np.ndarray
    V: np.ndarray
    L: np.ndarray        # 1 / (1 + tau kappa H)
    tau: float
    plan: DstPlan
    nodal: bool = True   # V == 1, so G and F can share one inverse transform


def make_step_operator(grid: Grid, kind, s: float, gamma: float, kappa: float, tau: float,
                       rhs_mode=RhsMode.NODAL, plan: DstPlan | None = None) -> StepOperator:
    H = build_H(grid, kind, s, gamma)
    V = build_V(grid, kind, rhs_mode)
    L = 1.0 / (1.0 + tau * kappa * H)
    nodal = bool(np.all(V == 1.0))
    return StepOperator(H, V, L, tau, plan or plan_for(grid), nodal)


def step(state: FastL1State, F: np.ndarray, op: StepOperator) -> np.ndarray:
    """One fully discrete step

        U^n = D(L * (D^{-1}(G^n) + tau V * D^{-1}(F^n))),

    after which the state holds U^n.  G^n is transformed along with F^n so both
    terms live in sine space before the multiplier is applied.
    """
    if np.shape(F) != state.u0.shape:
        raise ValueError(f"source shape {np.shape(F)} does not match state {state.u0.shape}")
    if state.alpha < 1.0 and state.quadrature is None:
        raise SolverError("state has no exponential-sum quadrature")
    g = assemble_g(state)
    plan = op.plan
    if op.nodal:
        rhs = plan.inverse(g + op.tau * np.asarray(F))
    else:
        rhs = plan.inverse(g) + op.tau * op.V * plan.inverse(F)
    u = plan.forward(op.L * rhs)
    advance(state, u)
    return u


def direct_l1_reference(u_hist: Sequence[np.ndarray], alpha: float, dt: float, n: int | None = None):
    """Classical L1 approximation of the Caputo derivative at t_n from the full history.

    (dt^{-alpha} / Gamma(2 - alpha)) sum_{k=0}^{n-1} b_k (u^{n-k} - u^{n-k-1}),
    b_k = (k+1)^{1-alpha} - k^{1-alpha}.  O(n) work per call.
    """
    u_hist = np.asarray(u_hist, dtype=float)
    n = len(u_hist) - 1 if n is None else n
    k = np.arange(n)
    b = (k + 1.0) ** (1.0 - alpha) - k ** (1.0 - alpha)
    diffs = u_hist[n - k] - u_hist[n - k - 1]
    return np.tensordot(b, diffs, axes=(0, 0)) / (dt**alpha * gamma_fn(2.0 - alpha))


# --- checkpointing ------------------------------------------------------------

def save_checkpoint(state: FastL1State, path) -> Path:
    """Write the state to an ``.npz`` archive sufficient for bitwise resume."""
    path = Path(path)
    q = state.quadrature
    np.savez(
        path,
        format=np.array("fastfrac-l1-state-v1"),
        n=np.array(state.n),
        alpha=np.array(state.alpha),
        dt=np.array(state.dt),
        T=np.array(q.T if q else np.nan),
        eps=np.array(q.eps if q else np.nan),
        Q=np.array(state.Q),
        nodes=np.asarray(q.nodes if q else np.zeros(0)),
        weights=np.asarray(q.weights if q else np.zeros(0)),
        u0=state.u0,
        u_prev=state.u_prev,
        history=state.history,
    )
    return path if path.suffix == ".npz" else path.with_suffix(path.suffix + ".npz")


def load_checkpoint(path) -> FastL1State:
    with np.load(path, allow_pickle=False) as z:
        if str(z["format"]) != "fastfrac-l1-state-v1":
            raise ConfigError(f"{path}: not a fast-L1 checkpoint")
        quad = None
        if int(z["Q"]) > 0:
            quad = SoeQuadrature(z["nodes"].copy(), z["weights"].copy(), float(z["alpha"]),
                                 float(z["dt"]), float(z["T"]), float(z["eps"]))
        return FastL1State(
            alpha=float(z["alpha"]),
            dt=float(z["dt"]),
            u0=z["u0"].copy(),
            u_prev=z["u_prev"].copy(),
            history=z["history"].copy(),
            quadrature=quad,
            n=int(z["n"]),
        )


# --- driver -------------------------------------------------------------------

@dataclass
class EvolutionResult:
    final: np.ndarray
    times: np.ndarray                         # t_n for n = 0..N
    snapshots: dict[float, np.ndarray]
    step_seconds: np.ndarray
    max_errors: np.ndarray | None = None      # max-norm error per step (n = 0..N)
    state_bytes: int = 0

    @property
    def final_error(self) -> float | None:
        return None if self.max_errors is None else float(self.max_errors[-1])


def snapshot_steps(times: Sequence[float], dt: float, n_steps: int) -> dict[int, float]:
    """Map requested times to the nearest step index."""
    out = {}
    for t in times:
        out[int(np.clip(round(t / dt), 0, n_steps))] = float(t)
    return out


def run(problem, grid: Grid, dt: float, n_steps: int, snapshot_times: Sequence[float] = (),
        Q: int = DEFAULT_Q, plan: DstPlan | None = None,
        on_step: Callable[[int, np.ndarray], None] | None = None) -> EvolutionResult:
    """Integrate ``problem`` (a :class:`fastfrac.problems.ProblemSpec`) for ``n_steps`` steps."""
    if n_steps < 1:
        raise ConfigError(f"need at least one time step, got {n_steps}")
    T = dt * n_steps
    plan = plan or plan_for(grid)
    x = grid.mesh()
    u0 = np.broadcast_to(problem.u0(x), grid.interior_shape)
    state = init_state(u0, problem.alpha, dt, T, Q)
    op = make_step_operator(grid, problem.kind, problem.s, problem.gamma, problem.kappa,
                            state.tau, problem.rhs_mode, plan)
    wanted = snapshot_steps(snapshot_times, dt, n_steps)
    snaps = {wanted[0]: state.u0.copy()} if 0 in wanted else {}
    errors = None
    if problem.exact is not None:
        errors = np.empty(n_steps + 1)
        errors[0] = np.max(np.abs(problem.exact(x, 0.0) - state.u0), initial=0.0)
    seconds = np.empty(n_steps)
    u = state.u0
    for n in range(1, n_steps + 1):
        t = n * dt
        start = time.perf_counter()
        F = assemble_rhs(lambda xx: problem.source(xx, t), grid, problem.kind,
                         problem.rhs_mode, problem.quadrature)
        u = step(state, F, op)
        seconds[n - 1] = time.perf_counter() - start
        if not np.all(np.isfinite(u)):
            raise SolverError(f"non-finite values at step {n}")
        if errors is not None:
            errors[n] = np.max(np.abs(problem.exact(x, t) - u))
        if n in wanted:
            snaps[wanted[n]] = u.copy()
        if on_step is not None:
            on_step(n, u)
    return EvolutionResult(u, dt * np.arange(n_steps + 1), snaps, seconds, errors, state.nbytes)
