import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from liesync.groups import make_group, make_rng, random_algebra_ball
from liesync.lie_core import (
    ChartViolationError,
    InvalidInputError,
    ad,
    adjoint,
    bch_remainder,
    commutator,
    dexp,
    dexp_inv_left,
    dexp_inv_operator,
    dexp_inv_right,
    dexp_operator,
    group_exp,
    group_log,
    right_invariant_distance,
)

from conftest import GROUP_CASES, coords_in_ball


def _su2_unit_bracket_basis(g):
    # rescaled so that [f1, f2] = f3 cyclically
    return g.basis / np.sqrt(2)


# --- group_exp -------------------------------------------------------------
def test_exp_zero_is_identity(su2):
    assert np.array_equal(group_exp(su2, np.zeros((2, 2))), np.eye(2))


def test_exp_planar_rotation():
    so2 = make_group("so", 2).descriptor
    v = np.array([[0, -np.pi / 3], [np.pi / 3, 0]], dtype=complex)
    expected = np.array([[0.5, -np.sqrt(3) / 2], [np.sqrt(3) / 2, 0.5]])
    np.testing.assert_allclose(group_exp(so2, v), expected, atol=1e-14)
    taylor = sum(np.linalg.matrix_power(v, k) / scipy.special.factorial(k) for k in range(30))
    np.testing.assert_allclose(group_exp(so2, v), taylor, atol=1e-14)


def test_exp_diagonal(su2):
    v = 1j * np.diag([0.3, -0.3])
    np.testing.assert_allclose(group_exp(su2, v), np.diag(np.exp([0.3j, -0.3j])), atol=1e-15)


def test_exp_rejects_non_finite(su2):
    with pytest.raises(InvalidInputError):
        group_exp(su2, np.array([[np.nan, 0], [0, 0]]))


# --- group_log -------------------------------------------------------------
def test_log_identity(su2):
    np.testing.assert_allclose(group_log(su2, np.eye(2)), 0, atol=1e-15)


def test_log_diagonal(su2):
    X = np.diag(np.exp([0.3j, -0.3j]))
    np.testing.assert_allclose(group_log(su2, X), 1j * np.diag([0.3, -0.3]), atol=1e-15)


def test_log_outside_chart_raises(su2):
    X = group_exp(su2, 0.6 * su2.basis[0])
    with pytest.raises(ChartViolationError):
        group_log(su2, X)
    # without the chart check the principal log is still returned
    np.testing.assert_allclose(group_log(su2, X, check_chart=False), 0.6 * su2.basis[0], atol=1e-14)


def test_log_negative_eigenvalue_raises():
    gl = make_group("gl_c", 2).descriptor
    with pytest.raises(ChartViolationError):
        group_log(gl, np.diag([-0.5, -2.0]).astype(complex), check_chart=False)


@pytest.mark.parametrize("family,d", GROUP_CASES)
def test_round_trip_half_radius(family, d):
    g = make_group(family, d).descriptor
    v = random_algebra_ball(g, g.chart_radius / 2, make_rng(3), 500)
    back = group_log(g, group_exp(g, v))
    err = g.norm(back - v)
    assert np.all(err <= 1e-10 * (1 + g.norm(v)))


# --- ad / Adjoint ------------------------------------------------------------
def test_ad_zero_and_abelian(groups):
    su2 = groups["su2"].descriptor
    assert np.array_equal(ad(su2, np.zeros((2, 2))), np.zeros((3, 3)))
    circ = groups["circle1"].descriptor
    assert np.array_equal(ad(circ, np.array([[0.7j]])), np.zeros((1, 1)))


def test_ad_su2_cyclic(su2):
    f = _su2_unit_bracket_basis(su2)
    A = ad(su2, f[0])
    # coordinates are in the orthonormal basis e = sqrt(2) f; the map e2 -> e3, e3 -> -e2 is scale free
    expected = np.array([[0, 0, 0], [0, 0, -1], [0, 1, 0]], dtype=float)
    np.testing.assert_allclose(A, expected, atol=1e-15)


def test_adjoint_identity_and_abelian(groups):
    su2 = groups["su2"].descriptor
    np.testing.assert_allclose(adjoint(su2, np.eye(2)), np.eye(3), atol=1e-15)
    circ = groups["circle1"].descriptor
    np.testing.assert_allclose(adjoint(circ, np.array([[np.exp(0.4j)]])), [[1.0]], atol=1e-15)


def test_adjoint_singular_raises(su2):
    with pytest.raises(InvalidInputError):
        adjoint(su2, np.zeros((2, 2)))


@pytest.mark.parametrize("family,d", GROUP_CASES)
def test_adjoint_equals_exp_ad(family, d):
    g = make_group(family, d).descriptor
    w = random_algebra_ball(g, g.chart_radius / 2, make_rng(5), 50)
    lhs = adjoint(g, group_exp(g, w))
    rhs = np.array([scipy.linalg.expm(A) for A in ad(g, w)])
    assert np.max(np.abs(lhs - rhs)) <= 1e-9


# --- BCH -------------------------------------------------------------------
def test_bch_trivial_cases():
    gl = make_group("gl_c", 2).descriptor
    v = np.diag([0.1, -0.2]).astype(complex)
    w = np.diag([0.05j, 0.3]).astype(complex)
    np.testing.assert_allclose(bch_remainder(gl, v, np.zeros((2, 2))), 0, atol=1e-15)
    np.testing.assert_allclose(bch_remainder(gl, v, w), 0, atol=1e-15)


def test_bch_su2_frozen(su2):
    f = _su2_unit_bracket_basis(su2)
    a = bch_remainder(su2, 0.1 * f[0], 0.1 * f[1])
    # leading term 0.005 f3 = 0.005/sqrt(2) e3; third-order terms tilt e1, e2
    frozen = [-5.8955027868737714e-05, -5.895502786871809e-05, 0.003535532923138408]
    np.testing.assert_allclose(su2.coords(a), frozen, rtol=1e-10, atol=1e-16)
    # independent path: scipy logm of the product
    v, w = 0.1 * f[0], 0.1 * f[1]
    oracle = scipy.linalg.logm(scipy.linalg.expm(v) @ scipy.linalg.expm(w)) - v - w
    np.testing.assert_allclose(a, oracle, atol=1e-14)


@pytest.mark.parametrize("family,d", GROUP_CASES)
def test_bch_consistency(family, d):
    g = make_group(family, d).descriptor
    rng = make_rng(11)
    v = random_algebra_ball(g, g.chart_radius / 4, rng, 300)
    w = random_algebra_ball(g, g.chart_radius / 4, rng, 300)
    lhs = group_exp(g, v) @ group_exp(g, w)
    rhs = group_exp(g, v + w + bch_remainder(g, v, w))
    rel = np.linalg.norm(lhs - rhs, axis=(-2, -1)) / np.linalg.norm(lhs, axis=(-2, -1))
    assert rel.max() <= 1e-9


# --- functional calculus --------------------------------------------------
def test_dexp_inv_zero_and_abelian(groups):
    su2 = groups["su2"].descriptor
    h = su2.basis[1]
    np.testing.assert_allclose(dexp_inv_left(su2, np.zeros((2, 2)), h), h, atol=1e-15)
    circ = groups["circle1"].descriptor
    np.testing.assert_allclose(dexp_inv_left(circ, np.array([[1.2j]]), np.array([[0.3j]])), [[0.3j]])


def test_dexp_inv_su2_closed_form(su2):
    # ad_Y rotates the (e1, e2) plane with angle rate theta = 0.2 sqrt(2)
    Y = 0.2 * su2.basis[2]
    th = 0.2 * np.sqrt(2)
    c, s = (th / 2) / np.tan(th / 2), th / 2
    left = dexp_inv_left(su2, Y, su2.basis[0])
    np.testing.assert_allclose(su2.coords(left), [c, -s, 0], atol=1e-14)
    eig = dexp_inv_left(su2, Y, su2.basis[0], method="eig")
    np.testing.assert_allclose(left, eig, atol=1e-10)
    right = dexp_inv_right(su2, Y, su2.basis[1])
    np.testing.assert_allclose(su2.coords(right), [-s, c, 0], atol=1e-14)
    np.testing.assert_allclose(right, dexp_inv_right(su2, Y, su2.basis[1], method="eig"), atol=1e-10)


def test_dexp_inv_outside_chart_raises(su2):
    with pytest.raises(ChartViolationError):
        dexp_inv_left(su2, 0.6 * su2.basis[0], su2.basis[1])


@given(y=coords_in_ball(3, 0.25), h=coords_in_ball(3, 1.0))
def test_right_is_left_of_negative(y, h):
    g = make_group("su", 2).descriptor
    Y, H = g.from_coords(y), g.from_coords(h)
    np.testing.assert_allclose(dexp_inv_right(g, Y, H), dexp_inv_left(g, -Y, H), atol=1e-15)


@pytest.mark.parametrize("family,d", [c for c in GROUP_CASES if c[0] != "circle"])
def test_psi_phi1_inverse_pair(family, d):
    g = make_group(family, d).descriptor
    Y = random_algebra_ball(g, g.chart_radius / 2, make_rng(2), 40)
    P = dexp_inv_operator(g, Y) @ dexp_operator(g, Y)
    assert np.max(np.linalg.norm(P - np.eye(g.dim), 2, axis=(-2, -1))) <= 1e-10
    h = random_algebra_ball(g, 1.0, make_rng(4), 40)
    np.testing.assert_allclose(dexp_inv_left(g, Y, dexp(g, Y, h)), h, atol=1e-12)


def test_operator_matches_action(su2):
    Y = random_algebra_ball(su2, 0.2, make_rng(8), 10)
    h = random_algebra_ball(su2, 1.0, make_rng(9), 10)
    op = dexp_inv_operator(su2, Y)
    via_op = su2.from_coords(np.einsum("kab,kb->ka", op, su2.coords(h)))
    np.testing.assert_allclose(via_op, dexp_inv_left(su2, Y, h), atol=1e-14)
    op_r = dexp_inv_operator(su2, Y, side="right")
    via_r = su2.from_coords(np.einsum("kab,kb->ka", op_r, su2.coords(h)))
    np.testing.assert_allclose(via_r, dexp_inv_right(su2, Y, h), atol=1e-14)


def _psi_lipschitz_ratios(g, seed, n=2000):
    rng = make_rng(seed)
    v = random_algebra_ball(g, g.chart_radius / 2, rng, n)
    w = random_algebra_ball(g, g.chart_radius / 2, rng, n)
    diff = np.linalg.norm(dexp_inv_operator(g, v) - dexp_inv_operator(g, w), 2, axis=(-2, -1))
    return diff / g.norm(v - w)


@pytest.mark.parametrize("family,d", [c for c in GROUP_CASES if c[0] != "circle"])
def test_psi_lipschitz_constant_calibrated(family, d):
    g = make_group(family, d).descriptor
    K = _psi_lipschitz_ratios(g, 21).max()
    # calibrated on one sample set, verified on an independent one
    assert _psi_lipschitz_ratios(g, 22).max() <= 1.1 * K
    assert K < 2.0


def test_derivative_formula_second_order(su2):
    # d/dt exp(Y(t)) = dexp(Y, Y') exp(Y) along Y(t) = t A + t^2 B
    A, B = 0.2 * su2.basis[0], 0.15 * su2.basis[1]
    t = 0.7
    Y = t * A + t * t * B
    Yd = A + 2 * t * B
    exact = dexp(su2, Y, Yd) @ group_exp(su2, Y)
    errs = []
    for h in (1e-2, 5e-3):
        Yp = (t + h) * A + (t + h) ** 2 * B
        Ym = (t - h) * A + (t - h) ** 2 * B
        fd = (group_exp(su2, Yp) - group_exp(su2, Ym)) / (2 * h)
        errs.append(np.abs(fd - exact).max())
    assert errs[1] < errs[0] / 3.5  # O(h^2)


# --- distance -------------------------------------------------------------
def test_distance_zero_and_circle():
    c = make_group("circle", 1).descriptor
    X = np.array([[np.exp(0.4j)]])
    assert right_invariant_distance(c, X, X) == 0
    Z = np.array([[np.exp(-2.1j)]])
    assert right_invariant_distance(c, X, Z) == pytest.approx(2.5, abs=1e-14)


def test_distance_outside_chart_message(su2):
    X = group_exp(su2, 0.45 * su2.basis[0])
    Z = group_exp(su2, -0.45 * su2.basis[0])
    with pytest.raises(ChartViolationError, match="distance undefined"):
        right_invariant_distance(su2, X, Z)


@given(x=coords_in_ball(3, 0.1), z=coords_in_ball(3, 0.1), gg=coords_in_ball(3, 1.0))
def test_distance_right_invariant_and_symmetric(x, z, gg):
    g = make_group("su", 2).descriptor
    X, Z, G = (group_exp(g, g.from_coords(c)) for c in (x, z, gg))
    d = right_invariant_distance(g, X, Z)
    assert abs(right_invariant_distance(g, X @ G, Z @ G) - d) <= 1e-12
    assert abs(right_invariant_distance(g, Z, X) - d) <= 1e-12


def test_commutator_antisymmetric(su2):
    a, b = su2.basis[0], su2.basis[1]
    np.testing.assert_allclose(commutator(a, b), -commutator(b, a))
