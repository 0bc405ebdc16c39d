"""
Problem definitions: manufactured sine-mode solutions, a constant-source
singular problem, the stripe-domain profile problem, and the fractional
Cahn-Hilliard coarsening driver.

Callbacks take ``x``, a tuple of broadcastable coordinate arrays (see
:meth:`Grid.mesh`), and, for time-dependent data, a scalar ``t``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma as gamma_fn
from typing import Callable, Sequence

import numpy as np

from . import fast_l1
from .dst import DstPlan, plan_for
from .errors import ConfigError, SolverError
from .operators import Kind, RhsMode, as_kind, as_rhs_mode, assemble_rhs, mode_sum, solve_steady
from .tensor import Grid, make_grid

Field = np.ndarray
Coords = tuple


def _zero(x, t=0.0):
    return 0.0


@dataclass(frozen=True)
class ProblemSpec:
    """kappa-scaled shifted fractional diffusion problem on a box.

    For steady problems ``alpha`` is ignored and ``source`` is called with t=0.
    """

    name: str
    bounds: tuple[tuple[float, float], ...]
    kind: Kind = Kind.CDM4
    s: float = 1.0
    gamma: float = 0.0
    kappa: float = 1.0
    alpha: float = 1.0
    T: float = 1.0
    rhs_mode: RhsMode = RhsMode.NODAL
    quadrature: str = "gauss"
    u0: Callable = _zero
    source: Callable = _zero
    exact: Callable | None = None
    steady: bool = False
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", as_kind(self.kind))
        object.__setattr__(self, "rhs_mode", as_rhs_mode(self.rhs_mode))
        if not 0.0 < self.s:
            raise ConfigError(f"s must be positive, got {self.s}")
        if self.gamma < 0 or self.kappa <= 0 or self.T <= 0:
            raise ConfigError("need gamma >= 0, kappa > 0 and T > 0")
        if not self.steady and not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def grid(self, counts) -> Grid:
        """Grid on the problem domain.

        A scalar ``counts`` sets the intervals along the first axis; the other
        axes get proportionally many so the spacing is uniform.
        """
        if np.isscalar(counts):
            lengths = [b - a for a, b in self.bounds]
            counts = [max(2, int(round(counts * L / lengths[0]))) for L in lengths]
        return make_grid(self.dim, self.bounds, counts)


def caputo_power(mu: float, alpha: float, t):
    """Caputo derivative of order alpha of t^mu: Gamma(mu+1)/Gamma(mu+1-alpha) t^(mu-alpha)."""
    if mu <= 0:
        raise ValueError(f"exponent must be positive, got {mu}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    t = np.asarray(t, dtype=float)
    return gamma_fn(mu + 1.0) / gamma_fn(mu + 1.0 - alpha) * t ** (mu - alpha)


def _sine_product(x: Coords, n: int):
    out = 1.0
    for xk in x:
        out = out * np.sin(n * np.pi * xk)
    return out


def smooth_mode_problem(d: int = 3, n: int = 2, s: float = 0.5, gamma: float = 0.0, kind="cdm4",
                        kappa: float = 1.0, rhs_mode="nodal", quadrature: str = "gauss") -> ProblemSpec:
    """Steady problem with f = prod sin(n pi x_k) on (0,1)^d.

    Exact solution: prod sin(n pi x_k) / (kappa (d n^2 pi^2 + gamma)^s).
    """
    if n < 1:
        raise ConfigError(f"mode number must be positive, got {n}")
    amp = 1.0 / (kappa * (d * n * n * np.pi**2 + gamma) ** s)
    return ProblemSpec(
        name="smooth", bounds=((0.0, 1.0),) * d, kind=kind, s=s, gamma=gamma, kappa=kappa,
        rhs_mode=rhs_mode, quadrature=quadrature, steady=True,
        source=lambda x, t=0.0: _sine_product(x, n),
        exact=lambda x, t=0.0: amp * _sine_product(x, n),
        params={"d": d, "n": n},
    )


def constant_source_problem(kind="fem", s: float = 0.5, gamma: float = 1.0, d: int = 2,
                            rhs_mode="nodal", quadrature: str = "gauss") -> ProblemSpec:
    """Steady problem with f = 1: boundary layers, no closed form; use self-convergence."""
    return ProblemSpec(
        name="singular", bounds=((0.0, 1.0),) * d, kind=kind, s=s, gamma=gamma,
        rhs_mode=rhs_mode, quadrature=quadrature, steady=True,
        source=lambda x, t=0.0: np.ones(np.broadcast_shapes(*[np.shape(xk) for xk in x])),
        params={"d": d},
    )


def _signed_power(v, p):
    return np.sign(v) * np.abs(v) ** p


def stripe_source(x: Coords, s: float):
    """2^{2s} Gamma(1+s) (cos^{p}(a.x) + sin^{p}(b.x)) (cos(-|x|^2) + 1.2 sin(-|x|^2)), p = 2s/5.

    Powers of negative bases use the odd extension sign(v)|v|^p.
    """
    x1, x2 = x
    ax = -np.pi / 3 * x1 + np.pi / 5 * x2
    bx = np.pi / 5 * x1 - np.pi / 3 * x2
    r2 = x1**2 + x2**2
    p = 2.0 * s / 5.0
    first = _signed_power(np.cos(ax), p) + _signed_power(np.sin(bx), p)
    second = np.cos(-r2) + 1.2 * np.sin(-r2)
    return 2.0 ** (2 * s) * gamma_fn(1.0 + s) * first * second


def stripe_problem(s: float = 0.8, kind="cdm4") -> ProblemSpec:
    if not 0.0 < s <= 1.0:
        raise ConfigError(f"stripe problem takes s in (0, 1], got {s}")
    return ProblemSpec(
        name="stripe", bounds=((-5.0, 5.0), (-0.5, 0.5)), kind=kind, s=s, gamma=0.0,
        steady=True, source=lambda x, t=0.0: stripe_source(x, s),
    )


G_CHOICES = {"t": 1.0, "t^1.5": 1.5}


def manufactured_problem(g: str = "t", s: float = 1.0, alpha: float = 0.8, d: int = 2,
                         gamma: float = 1.0, n: int = 1, kappa: float = 0.1, T: float = 1.0,
                         kind="cdm4") -> ProblemSpec:
    """u = g(t) prod sin(n pi x_k) / (d n^2 pi^2 + gamma)^s with g(t) = t^mu.

    f = (D_t^alpha g / (d n^2 pi^2 + gamma)^s + kappa g) prod sin(n pi x_k).
    """
    if g not in G_CHOICES:
        raise ConfigError(f"unknown time profile {g!r}; expected one of {sorted(G_CHOICES)}")
    mu = G_CHOICES[g]
    lam_s = (d * n * n * np.pi**2 + gamma) ** s

    def source(x, t):
        return (caputo_power(mu, alpha, t) / lam_s + kappa * t**mu) * _sine_product(x, n)

    def exact(x, t):
        return t**mu / lam_s * _sine_product(x, n)

    return ProblemSpec(
        name="manufactured", bounds=((0.0, 1.0),) * d, kind=kind, s=s, gamma=gamma,
        kappa=kappa, alpha=alpha, T=T, source=source, exact=exact,
        u0=lambda x: exact(x, 0.0), params={"g": g, "d": d, "n": n},
    )


def solve_problem(problem: ProblemSpec, grid: Grid, plan: DstPlan | None = None) -> Field:
    """Steady solve of ``problem`` on ``grid``."""
    F = assemble_rhs(lambda x: problem.source(x, 0.0), grid, problem.kind,
                     problem.rhs_mode, problem.quadrature)
    return solve_steady(F, grid, problem.kind, problem.s, problem.gamma, problem.kappa,
                        problem.rhs_mode, plan)


def exact_field(problem: ProblemSpec, grid: Grid, t: float = 0.0) -> Field:
    if problem.exact is None:
        raise ConfigError(f"problem {problem.name!r} has no exact solution")
    return np.broadcast_to(problem.exact(grid.mesh(), t), grid.interior_shape)


def restrict(fine: Field) -> Field:
    """Values of a field on the grid refined by 2, taken at the coarse nodes."""
    return fine[tuple(slice(1, None, 2) for _ in range(fine.ndim))]


# --- fractional Cahn-Hilliard -------------------------------------------------

def double_well(u):
    return u**3 - u


@dataclass(frozen=True)
class CahnHilliardSpec:
    """Coarsening run for D_t^alpha u = -(-Lap)^beta (eps^{2s} (-Lap)^s u + F(u)), u = 0 on the boundary.

    ``stabilizer`` is the coefficient S of the linear term S (u^n - u^{n-1})
    added to the explicitly treated F; S = 0 gives the plain semi-implicit split.
    """

    eps: float = 0.02
    s: float = 0.8
    beta: float = 1.0
    alpha: float = 0.8
    dt: float = 1e-3
    n: int = 128                  # intervals per axis on (0,1)^2
    T: float = 0.5
    seed: int = 0
    amplitude: float = 0.05
    snapshot_times: tuple[float, ...] = (0.026, 0.06, 0.16, 0.5)
    kind: Kind = Kind.FEM
    stabilizer: float = 2.0
    blowup: float = 10.0
    nonlinearity: Callable = double_well

    def __post_init__(self):
        object.__setattr__(self, "kind", as_kind(self.kind))
        if self.eps <= 0:
            raise ConfigError("eps must be positive")
        if not (0.0 < self.s <= 1.0 and 0.0 < self.beta <= 1.0 and 0.0 < self.alpha <= 1.0):
            raise ConfigError("need s, beta, alpha in (0, 1]")
        if self.dt <= 0 or self.T < self.dt:
            raise ConfigError("need 0 < dt <= T")

    @property
    def grid(self) -> Grid:
        return make_grid(2, (0.0, 1.0), self.n)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


def initial_field(spec: CahnHilliardSpec, grid: Grid | None = None) -> Field:
    """Uniform perturbation in [-amplitude, amplitude] from a Philox counter-based stream."""
    grid = grid or spec.grid
    rng = np.random.Generator(np.random.Philox(key=int(spec.seed)))
    return rng.uniform(-spec.amplitude, spec.amplitude, size=grid.interior_shape)


@dataclass(frozen=True)
class CahnHilliardOperator:
    lap_beta: np.ndarray     # Lambda^beta
    denom: np.ndarray        # 1 + tau Lambda^beta (eps^{2s} Lambda^s + S)
    tau: float
    plan: DstPlan


def cahn_hilliard_operator(spec: CahnHilliardSpec, grid: Grid, tau: float,
                           plan: DstPlan | None = None) -> CahnHilliardOperator:
    lam = mode_sum(grid, spec.kind, 0.0)
    lap_beta = lam**spec.beta
    denom = 1.0 + tau * lap_beta * (spec.eps ** (2 * spec.s) * lam**spec.s + spec.stabilizer)
    return CahnHilliardOperator(lap_beta, denom, tau, plan or plan_for(grid))


def cahn_hilliard_step(state: fast_l1.FastL1State, spec: CahnHilliardSpec,
                       op: CahnHilliardOperator) -> Field:
    """Semi-implicit step: fractional term implicit, F(u) - S u explicit at u^{n-1}.

    In sine space: u^n = (g^n - tau Lambda^beta (F(u^{n-1}) - S u^{n-1})) / denom.
    """
    u_old = state.u_prev
    explicit = spec.nonlinearity(u_old) - spec.stabilizer * u_old
    plan = op.plan
    g = fast_l1.assemble_g(state)
    u_hat = (plan.inverse(g) - op.tau * op.lap_beta * plan.inverse(explicit)) / op.denom
    u = plan.forward(u_hat)
    peak = float(np.max(np.abs(u)))
    if not np.isfinite(peak) or peak > spec.blowup:
        raise SolverError(f"Cahn-Hilliard blow-up at step {state.n + 1}: max|u| = {peak:.3e}")
    fast_l1.advance(state, u)
    return u


@dataclass
class CahnHilliardResult:
    final: Field
    snapshots: dict[float, Field]
    max_norms: np.ndarray          # max|u^n| for n = 0..N
    grid: Grid


def cahn_hilliard_run(spec: CahnHilliardSpec, u0: Field | None = None,
                      Q: int = fast_l1.DEFAULT_Q) -> CahnHilliardResult:
    grid = spec.grid
    u0 = initial_field(spec, grid) if u0 is None else np.asarray(u0, dtype=float)
    n_steps = spec.n_steps
    state = fast_l1.init_state(u0, spec.alpha, spec.dt, spec.dt * n_steps, Q)
    op = cahn_hilliard_operator(spec, grid, state.tau)
    wanted = fast_l1.snapshot_steps(spec.snapshot_times, spec.dt, n_steps)
    snaps = {wanted[0]: u0.copy()} if 0 in wanted else {}
    norms = np.empty(n_steps + 1)
    norms[0] = np.max(np.abs(u0))
    u = u0
    for n in range(1, n_steps + 1):
        u = cahn_hilliard_step(state, spec, op)
        norms[n] = np.max(np.abs(u))
        if n in wanted:
            snaps[wanted[n]] = u.copy()
    return CahnHilliardResult(u, snaps, norms, grid)
