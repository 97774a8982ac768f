import warnings

import numpy as np
import pytest

from liesync.groups import ConfigurationError, make_group, make_rng, random_algebra_ball
from liesync.interactions import (
    AdaptedMetric,
    ConditioningWarning,
    InteractionFunction,
    build_adapted_metric,
    check_hypothesis_H,
    deville_interaction,
    get_phi,
    jacobian_at_identity,
    phi_catalog,
)
from liesync.lie_core import group_exp

PAIRS = [(phi.id, fam) for phi in phi_catalog() for fam in phi.families]
DIM_FOR = {"circle": 1, "u": 2, "su": 2, "gl_c": 2, "sl_c": 2, "so": 3}


def _entry(fam):
    return make_group(fam, DIM_FOR[fam])


def test_catalog_ids():
    ids = {phi.id for phi in phi_catalog()}
    assert {"kuramoto_sin", "lohe_unitary", "lohe_matrix", "sl_traceless", "deville_f"} <= ids


def test_unknown_phi():
    with pytest.raises(ConfigurationError):
        get_phi("cucker_smale")


@pytest.mark.parametrize("theta", [-3.0, -1.0, 0.0, 0.4, 2.5])
def test_kuramoto_is_sine(theta):
    circ = make_group("circle", 1)
    val = get_phi("kuramoto_sin").evaluate(circ, np.array([[np.exp(1j * theta)]]))
    assert val[0, 0] == pytest.approx(1j * np.sin(theta), abs=1e-15)


def test_unitary_at_identity():
    u2 = make_group("u", 2)
    assert np.array_equal(get_phi("lohe_unitary").evaluate(u2, np.eye(2)), np.zeros((2, 2)))


def test_sl_traceless_output():
    sl = make_group("sl_c", 2).descriptor
    E = np.array([[1.0, 2.0], [0.5, -1.0]], dtype=complex)
    out = get_phi("sl_traceless").evaluate(sl, group_exp(sl, 0.1 * E))
    assert abs(np.trace(out)) <= 1e-12


@pytest.mark.parametrize("phi_id,fam", PAIRS)
def test_catalog_invariants(phi_id, fam):
    entry = _entry(fam)
    g = entry.descriptor
    phi = get_phi(phi_id)
    assert np.linalg.norm(phi.evaluate(g, g.identity)) <= 1e-12
    X = group_exp(g, random_algebra_ball(g, 0.4, make_rng(1), 20))
    assert g.projection_residual(phi.evaluate(g, X)).max() <= 1e-10
    rep = check_hypothesis_H(phi, entry)
    assert rep.passed, rep.reason
    assert build_adapted_metric(rep.jacobian).lam > 0


@pytest.mark.parametrize("phi_id,fam,expected", [
    ("kuramoto_sin", "circle", 1.0),
    ("lohe_unitary", "u", 1.0),
    ("lohe_matrix", "gl_c", 1.0),
    ("sl_traceless", "su", 1.0),
    ("deville_f", "gl_c", 2.0),
])
def test_jacobian_oracles(phi_id, fam, expected):
    g = _entry(fam).descriptor
    J = jacobian_at_identity(get_phi(phi_id), g)
    np.testing.assert_allclose(J, expected * np.eye(g.dim), atol=1e-8)


def test_jacobian_incompatible_family():
    with pytest.raises(ConfigurationError):
        jacobian_at_identity(get_phi("kuramoto_sin"), make_group("su", 2))


def test_gradient_check_second_order():
    g = make_group("u", 2).descriptor
    phi = get_phi("lohe_unitary")
    # (U - U^H)/2 at exp(eps e) is sinh-like: error of central differences scales as eps^2
    J = jacobian_at_identity(phi, g)
    errs = []
    for eps in (1e-1, 5e-2):
        plus = phi.evaluate(g, group_exp(g, eps * g.basis))
        minus = phi.evaluate(g, group_exp(g, -eps * g.basis))
        fd = (g.coords(plus) - g.coords(minus)).T / (2 * eps)
        errs.append(np.abs(fd - J).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_zero_phi_fails():
    zero = InteractionFunction("zero", lambda X: np.zeros_like(X), ("su",))
    rep = check_hypothesis_H(zero, make_group("su", 2))
    assert not rep.passed
    np.testing.assert_allclose(rep.spectrum, 0, atol=1e-12)


def test_phi_not_vanishing_fails():
    shifted = InteractionFunction("shift", lambda X: 0.5 * (X - np.linalg.inv(X)) + 0.1j * np.eye(2), ("u",))
    rep = check_hypothesis_H(shifted, make_group("u", 2))
    assert not rep.passed and "phi(e)" in rep.reason


def test_kuramoto_report():
    rep = check_hypothesis_H(get_phi("kuramoto_sin"), make_group("circle", 1))
    assert rep.passed
    np.testing.assert_allclose(rep.spectrum, [1.0], atol=1e-9)


def test_metric_identity():
    m = build_adapted_metric(np.eye(3))
    np.testing.assert_allclose(m.P, np.eye(3), atol=1e-14)
    assert m.lam == pytest.approx(1.0)
    assert AdaptedMetric.identity(3).lam == 1.0


def test_metric_diagonal():
    m = build_adapted_metric(np.diag([1.0, 2.0]))
    np.testing.assert_allclose(m.P, np.diag([1.0, 0.5]), atol=1e-14)
    assert m.lam == pytest.approx(1.0, abs=1e-12)


def test_metric_non_normal():
    A = np.array([[1.0, 4.0], [0.0, 1.0]])
    m = build_adapted_metric(A)
    assert m.lam > 0
    assert np.linalg.eigvalsh(m.P).min() > 0
    np.testing.assert_allclose(np.linalg.eigvalsh(0.5 * (A + A.T)), [-1.0, 3.0])
    # the defining inequality on the basis and on random vectors
    S = 0.5 * (m.P @ A + A.T @ m.P)
    v = make_rng(0).standard_normal((200, 2))
    lhs = np.einsum("ki,ij,kj->k", v, S, v)
    rhs = m.lam * np.einsum("ki,ij,kj->k", v, m.P, v)
    assert np.all(lhs >= rhs - 1e-10)


def test_metric_rejects_unstable():
    with pytest.raises(ValueError):
        build_adapted_metric(np.diag([1.0, -1.0]))


def test_metric_conditioning_warning():
    # Jordan block close to the imaginary axis
    A = np.array([[1e-4, 1.0], [0.0, 1e-4]])
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        m = build_adapted_metric(A)
    assert any(issubclass(w.category, ConditioningWarning) for w in rec)
    assert 0 < m.lam < 1e-10


@pytest.mark.parametrize("phi_id,fam", [p for p in PAIRS if get_phi(p[0]).equivariant])
def test_equivariance(phi_id, fam):
    g = _entry(fam).descriptor
    phi = get_phi(phi_id)
    rng = make_rng(13)
    G = group_exp(g, random_algebra_ball(g, 0.45, rng, 100))
    H = group_exp(g, random_algebra_ball(g, 0.45, rng, 100))
    Gi = np.linalg.inv(G)
    lhs = G @ phi.evaluate(g, H) @ Gi
    rhs = phi.evaluate(g, G @ H @ Gi)
    assert np.abs(lhs - rhs).max() <= 1e-9


def test_custom_deville():
    phi = deville_interaction(lambda X: X @ X @ X, "cube")
    J = jacobian_at_identity(phi, make_group("gl_c", 2))
    np.testing.assert_allclose(J, 3 * np.eye(8), atol=1e-8)
