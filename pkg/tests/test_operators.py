import numpy as np
import pytest
from hypothesis import given, strategies as st

from fastfrac import (ConfigError, Kind, apply_fractional_op, assemble_rhs, build_H, build_V,
                      load_vector, make_grid, mode_eigenvalues, plan_for, solve_steady,
                      stiffness_mass_eigenvalues, unit_grid)
from fastfrac.operators import tridiag_coefficients, tridiag_matrices

from oracles import dense_apply, kron_sum_operator

KINDS = ["fem", "cdm4", "fd2"]

small_grids = st.builds(
    lambda d, n: unit_grid(d, n),
    st.integers(1, 3), st.integers(2, 5),
)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("n", [2, 5, 9])
def test_closed_form_eigenvalues_match_dense(kind, n):
    h = 1.0 / n
    A, M = tridiag_matrices(kind, n, h)
    ls, lm = stiffness_mass_eigenvalues(kind, n, h)
    np.testing.assert_allclose(np.sort(ls), np.linalg.eigvalsh(A), rtol=1e-12)
    np.testing.assert_allclose(np.sort(lm), np.linalg.eigvalsh(M), rtol=1e-12)
    np.testing.assert_allclose(np.sort(ls / lm),
                               np.sort(np.linalg.eigvals(np.linalg.solve(M, A)).real), rtol=1e-10)


def test_coefficients():
    assert tridiag_coefficients("fem", 0.5) == pytest.approx((4.0, -2.0, 1 / 3, 1 / 12))
    assert tridiag_coefficients("cdm4", 0.5) == pytest.approx((8.0, -4.0, 10 / 12, 1 / 12))
    assert tridiag_coefficients("fd2", 0.5) == pytest.approx((8.0, -4.0, 1.0, 0.0))


def test_unknown_kind():
    with pytest.raises(ConfigError, match="unknown discretization"):
        tridiag_coefficients("spectral", 0.1)


def test_first_eigenvalue_approaches_pi_squared():
    # fourth-order compact scheme: error in the first eigenvalue is O(h^4)
    errs = []
    for n in (8, 16, 32):
        ls, lm = stiffness_mass_eigenvalues("cdm4", n, 1.0 / n)
        errs.append(abs(ls[0] / lm[0] - np.pi**2))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.1)
    assert np.log2(errs[1] / errs[2]) == pytest.approx(4.0, abs=0.05)


def test_gamma_is_split_across_axes():
    g = unit_grid(3, 4)
    lam0 = mode_eigenvalues("fd2", g, 0.0)
    lam3 = mode_eigenvalues("fd2", g, 3.0)
    for a, b in zip(lam0, lam3):
        np.testing.assert_allclose(b - a, 1.0)
    with pytest.raises(ConfigError):
        mode_eigenvalues("fd2", g, -1.0)


def test_H_is_cached_and_read_only():
    g = unit_grid(2, 6)
    H = build_H(g, "cdm4", 0.5, 1.0)
    assert H is build_H(g, Kind.CDM4, 0.5, 1.0)
    assert not H.flags.writeable
    with pytest.raises(ConfigError):
        build_H(g, "cdm4", 0.0)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("d,n", [(1, 9), (2, 6), (3, 4)])
def test_apply_matches_dense_power(kind, d, n):
    g = unit_grid(d, n)
    U = np.random.default_rng(d * n).standard_normal(g.interior_shape)
    for s, gamma in [(0.3, 0.0), (0.75, 1.0), (1.6, 2.0)]:
        got = apply_fractional_op(U, build_H(g, kind, s, gamma), plan_for(g))
        np.testing.assert_allclose(got, dense_apply(g, kind, s, gamma, U), atol=1e-10 * np.abs(got).max())


def test_s_equal_one_is_the_plain_operator():
    g = make_grid(2, [(0, 2), (-1, 0.5)], (5, 7))
    U = np.random.default_rng(0).standard_normal(g.interior_shape)
    B = kron_sum_operator(g, "cdm4", 0.5)
    got = apply_fractional_op(U, build_H(g, "cdm4", 1.0, 0.5))
    np.testing.assert_allclose(got.ravel(), B @ U.ravel(), rtol=1e-10, atol=1e-10)


@given(small_grids, st.sampled_from(KINDS), st.floats(0.05, 1.5), st.floats(0.05, 1.5),
       st.floats(0.0, 3.0))
def test_semigroup(g, kind, s1, s2, gamma):
    U = np.random.default_rng(0).standard_normal(g.interior_shape)
    plan = plan_for(g)
    two = apply_fractional_op(apply_fractional_op(U, build_H(g, kind, s2, gamma), plan),
                              build_H(g, kind, s1, gamma), plan)
    one = apply_fractional_op(U, build_H(g, kind, s1 + s2, gamma), plan)
    np.testing.assert_allclose(two, one, rtol=1e-10, atol=1e-10 * np.abs(one).max())


@given(small_grids, st.sampled_from(KINDS), st.floats(0.05, 2.0), st.floats(0.0, 3.0),
       st.integers(0, 2**32 - 1))
def test_symmetric_positive_definite(g, kind, s, gamma, seed):
    rng = np.random.default_rng(seed)
    U, W = rng.standard_normal((2,) + g.interior_shape)
    H = build_H(g, kind, s, gamma)
    AU, AW = apply_fractional_op(U, H), apply_fractional_op(W, H)
    assert np.vdot(AU, W) == pytest.approx(np.vdot(U, AW), rel=1e-9, abs=1e-9 * np.abs(AU).max())
    assert np.vdot(U, AU) > 0


@pytest.mark.parametrize("kind", KINDS)
def test_solve_inverts_apply(kind):
    g = make_grid(3, (0, 1), (6, 5, 4))
    U = np.random.default_rng(5).standard_normal(g.interior_shape)
    F = 2.5 * apply_fractional_op(U, build_H(g, kind, 0.7, 1.0))
    np.testing.assert_allclose(solve_steady(F, g, kind, 0.7, 1.0, kappa=2.5), U, atol=1e-11)


def test_solve_rejects_bad_input():
    g = unit_grid(2, 4)
    with pytest.raises(ConfigError):
        solve_steady(np.zeros(g.interior_shape), g, "fem", 0.5, kappa=0.0)
    with pytest.raises(ValueError, match="does not match grid"):
        solve_steady(np.zeros((2, 2)), g, "fem", 0.5)


def test_V_symbol():
    g = unit_grid(2, 5)
    np.testing.assert_array_equal(build_V(g, "cdm4"), np.ones((4, 4)))
    V = build_V(g, "fem", "load_vector")
    lm = stiffness_mass_eigenvalues("fem", 5, 0.2)[1]
    np.testing.assert_allclose(V, np.outer(1 / lm, 1 / lm))
    with pytest.raises(ConfigError, match="only defined for the FEM"):
        build_V(g, "cdm4", "load_vector")


def test_load_vector_solve_is_galerkin_solve():
    # with V = M^{-1} the load-vector solve equals S^{-1} b in 1-D
    n, h = 8, 1 / 8
    g = unit_grid(1, n)
    b = np.random.default_rng(2).standard_normal(n - 1)
    A, M = tridiag_matrices("fem", n, h)
    np.testing.assert_allclose(solve_steady(b, g, "fem", 1.0, rhs_mode="load_vector"),
                               np.linalg.solve(A, b), atol=1e-12)


def test_gauss_load_vector_exact_for_bilinear_f():
    g = make_grid(2, (0, 1), (4, 6))
    f = lambda x: 1 + 2 * x[0] - x[1] + 3 * x[0] * x[1]
    got = load_vector(f, g, "gauss")
    # hat functions integrate linear data exactly: (f, phi_i) = h_x h_y f(x_i) for bilinear f
    np.testing.assert_allclose(got, g.cell_volume * f(g.mesh()), rtol=1e-13)


def test_gauss_load_vector_against_quadrature_oracle():
    from scipy.integrate import quad

    n = 6
    g = unit_grid(1, n)
    f = lambda x: np.sin(3 * x[0]) ** 2
    got = load_vector(f, g, "gauss")
    h = 1 / n
    for i, xi in enumerate(g.nodes(0)):
        hat = lambda x: max(0.0, 1 - abs(x - xi) / h)
        ref = quad(lambda x: np.sin(3 * x) ** 2 * hat(x), xi - h, xi + h, points=[xi])[0]
        assert got[i] == pytest.approx(ref, rel=2e-3)


def test_assemble_rhs_modes():
    g = unit_grid(2, 4)
    f = lambda x: x[0] + 0 * x[1]
    np.testing.assert_allclose(assemble_rhs(f, g, "cdm4")[:, 0], g.nodes(0))
    np.testing.assert_allclose(assemble_rhs(f, g, "fem", "load_vector", "lumped"),
                               g.cell_volume * np.broadcast_to(f(g.mesh()), (3, 3)))
    with pytest.raises(ConfigError):
        assemble_rhs(f, g, "fem", "load_vector", "simpson")
    with pytest.raises(ConfigError):
        assemble_rhs(f, g, "fem", "weird")
