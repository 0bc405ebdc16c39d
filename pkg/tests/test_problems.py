import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from fastfrac import (CahnHilliardSpec, ConfigError, SolverError, caputo_power, cahn_hilliard_run,
                      constant_source_problem, manufactured_problem, smooth_mode_problem,
                      solve_problem, stripe_problem, unit_grid)
from fastfrac.problems import exact_field, initial_field, restrict, stripe_source


def test_caputo_power_closed_form():
    assert caputo_power(1.0, 0.5, 1.0) == pytest.approx(1.128379, abs=1e-6)
    assert caputo_power(2.0, 0.3, 0.0) == 0.0
    with pytest.raises(ValueError):
        caputo_power(0.0, 0.5, 1.0)


def test_caputo_power_against_quadrature():
    mu, alpha, t = 1.5, 0.8, 0.5
    with mp.workdps(30):
        # v = (t - s)^(1 - alpha) removes the endpoint singularity
        p = 1 / (1 - mp.mpf(alpha))
        s_of = lambda v: t - v**p
        integral = mp.quad(lambda v: mu * s_of(v) ** (mu - 1) * p, [0, t ** (1 - alpha)])
        ref = float(integral / mp.gamma(1 - alpha))
    assert caputo_power(mu, alpha, t) == pytest.approx(ref, rel=1e-10)


def test_smooth_mode_poisson_limit():
    p = smooth_mode_problem(d=1, n=1, s=1.0, gamma=0.0)
    x = (np.linspace(0.1, 0.9, 5),)
    np.testing.assert_allclose(p.exact(x), np.sin(np.pi * x[0]) / np.pi**2)


@pytest.mark.parametrize("kind,s,gamma", [("cdm4", 0.5, 1.0), ("fd2", 0.9, 0.0)])
def test_smooth_mode_errors_shrink(kind, s, gamma):
    p = smooth_mode_problem(d=2, n=1, s=s, gamma=gamma, kind=kind)
    errs = []
    for n in (8, 16):
        g = p.grid(n)
        errs.append(np.abs(solve_problem(p, g) - exact_field(p, g)).max())
    order = 4 if kind == "cdm4" else 2
    assert np.log2(errs[0] / errs[1]) == pytest.approx(order, abs=0.15)


def test_smooth_mode_rejects_bad_n():
    with pytest.raises(ConfigError):
        smooth_mode_problem(n=0)


def test_constant_source_has_no_exact_solution():
    p = constant_source_problem("fem", 0.5)
    assert p.exact is None
    with pytest.raises(ConfigError):
        exact_field(p, p.grid(8))
    u = solve_problem(p, p.grid(16))
    assert np.all(u > 0)
    # symmetric under x <-> 1 - x
    np.testing.assert_allclose(u, u[::-1, ::-1], atol=1e-14)


def test_restrict_picks_coarse_nodes():
    fine = unit_grid(2, 8)
    coarse = unit_grid(2, 4)
    x, y = fine.mesh()
    cx, cy = coarse.mesh()
    np.testing.assert_allclose(restrict(x + 10 * y), (cx + 10 * cy))


def test_stripe_grid_keeps_square_cells():
    p = stripe_problem(0.8)
    g = p.grid(200)
    assert g.counts == (200, 20)
    assert g.h[0] == pytest.approx(g.h[1])


def test_stripe_source_branch_is_odd_extension():
    x = (np.array([0.0]), np.array([0.0]))
    # cos(0) = 1, sin(0) = 0, cos(0) + 1.2 sin(0) = 1
    assert stripe_source(x, 0.5)[0] == pytest.approx(2.0 * math.gamma(1.5))
    # a point where sin(b.x) < 0: the sign is kept
    x = (np.array([0.0]), np.array([0.3]))
    s = 0.5
    bx = -np.pi / 3 * 0.3
    ax = np.pi / 5 * 0.3
    first = np.cos(ax) ** (2 * s / 5) - abs(np.sin(bx)) ** (2 * s / 5)
    second = np.cos(-0.09) + 1.2 * np.sin(-0.09)
    assert stripe_source(x, s)[0] == pytest.approx(2 ** (2 * s) * math.gamma(1 + s) * first * second)
    with pytest.raises(ConfigError):
        stripe_problem(1.5)


def test_stripe_solution_is_finite_and_nontrivial():
    p = stripe_problem(0.4)
    u = solve_problem(p, p.grid(200))
    assert np.all(np.isfinite(u)) and np.abs(u).max() > 0.1


@given(st.sampled_from(["t", "t^1.5"]), st.floats(0.1, 2.0), st.floats(0.1, 1.0))
def test_manufactured_initial_value_consistent(g, s, alpha):
    p = manufactured_problem(g, s, alpha)
    grid = p.grid(6)
    x = grid.mesh()
    np.testing.assert_allclose(np.broadcast_to(p.u0(x), grid.interior_shape),
                               exact_field(p, grid, 0.0), atol=1e-13)


def test_manufactured_source_balances_equation():
    # f = D^alpha u + kappa (-Lap + gamma)^s u on the single sine mode
    p = manufactured_problem("t^1.5", s=0.6, alpha=0.4, d=2, gamma=1.0, kappa=0.1)
    x = (np.array([0.3]), np.array([0.6]))
    lam = 2 * np.pi**2 + 1.0
    t = 0.7
    mode = np.sin(np.pi * 0.3) * np.sin(np.pi * 0.6)
    expect = (caputo_power(1.5, 0.4, t) / lam**0.6 + 0.1 * t**1.5) * mode
    assert p.source(x, t)[0] == pytest.approx(expect)


def test_manufactured_rejects_unknown_profile():
    with pytest.raises(ConfigError):
        manufactured_problem("t^2")


def test_problem_spec_validation():
    with pytest.raises(ConfigError):
        manufactured_problem("t", alpha=1.5)


def test_initial_field_range_and_determinism():
    spec = CahnHilliardSpec(n=32, seed=7)
    a = initial_field(spec)
    b = initial_field(CahnHilliardSpec(n=32, seed=7))
    assert a.shape == (31, 31)
    assert np.abs(a).max() <= 0.05
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, initial_field(CahnHilliardSpec(n=32, seed=8)))


def test_cahn_hilliard_short_run_is_bounded():
    spec = CahnHilliardSpec(n=32, T=0.05, snapshot_times=(0.0, 0.026))
    res = cahn_hilliard_run(spec)
    assert set(res.snapshots) == {0.0, 0.026}
    assert res.max_norms.max() < 1.5
    assert len(res.max_norms) == spec.n_steps + 1


def test_cahn_hilliard_blowup_is_reported():
    spec = CahnHilliardSpec(n=16, T=0.01, stabilizer=0.0, blowup=1e-3)
    with pytest.raises(SolverError, match="blow-up"):
        cahn_hilliard_run(spec)


@pytest.mark.parametrize("bad", [dict(eps=0.0), dict(s=1.5), dict(dt=0.0), dict(kind="spectral")])
def test_cahn_hilliard_spec_validation(bad):
    with pytest.raises(ConfigError):
        CahnHilliardSpec(**bad)
