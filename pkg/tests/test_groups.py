import numpy as np
import pytest
from scipy import stats

from liesync.groups import (
    ConfigurationError,
    Family,
    closure_residual,
    make_group,
    make_rng,
    random_algebra_ball,
    random_near_identity,
    repair_membership,
    validate_membership,
)
from liesync.lie_core import commutator, group_exp, group_log

from conftest import GROUP_CASES

DIMS = {("circle", 1): 1, ("u", 2): 4, ("su", 2): 3, ("su", 3): 8, ("gl_c", 2): 8,
        ("sl_c", 2): 6, ("so", 3): 3, ("u", 3): 9, ("so", 4): 6}


@pytest.mark.parametrize("family,d", sorted(DIMS))
def test_algebra_dimension(family, d):
    assert make_group(family, d).descriptor.dim == DIMS[(family, d)]


def test_family_enum_accepted():
    assert make_group(Family.SPECIAL_UNITARY, 2).descriptor.family == "su"


@pytest.mark.parametrize("family,d", [("spin", 2), ("su", 0), ("u", 1.5), ("circle", 2)])
def test_unsupported_combinations(family, d):
    with pytest.raises(ConfigurationError):
        make_group(family, d)


@pytest.mark.parametrize("family,d", GROUP_CASES)
def test_basis_orthonormal(family, d):
    g = make_group(family, d).descriptor
    gram = np.array([[g.inner(a, b) for b in g.basis] for a in g.basis])
    np.testing.assert_allclose(gram, np.eye(g.dim), atol=1e-12)


@pytest.mark.parametrize("family,d", GROUP_CASES)
def test_commutator_closure(family, d):
    g = make_group(family, d).descriptor
    E = g.basis
    C = commutator(E[:, None], E[None, :])
    assert np.max(g.projection_residual(C)) <= 1e-10


def test_closure_flags():
    assert make_group("u", 2).closure_flag
    assert make_group("su", 2).closure_flag
    assert make_group("gl_c", 2).closure_flag
    # X - X^{-1} has nonzero trace on SU(3) in general
    assert not make_group("su", 3).closure_flag


def test_sampler_deterministic(su2):
    a = random_near_identity(su2, 0.2, seed=4, size=5)
    b = random_near_identity(su2, 0.2, seed=4, size=5)
    assert np.array_equal(a, b)
    c = random_near_identity(su2, 0.2, seed=4, size=5, index=1)
    assert not np.array_equal(a, c)


def test_sampler_shrinking_radius(su2):
    X = random_near_identity(su2, 1e-8, seed=0, size=20)
    assert np.max(su2.norm(group_log(su2, X))) <= 1e-8


@pytest.mark.parametrize("radius", [0.0, -0.1, 0.51])
def test_sampler_radius_out_of_range(su2, radius):
    with pytest.raises(ConfigurationError):
        random_near_identity(su2, radius, seed=0)


def test_sampler_radial_law(su2):
    X = random_near_identity(su2, 0.2, seed=1, size=1000)
    r = su2.norm(group_log(su2, X))
    assert r.max() <= 0.2 + 1e-12
    ks = stats.kstest(r, lambda x: np.clip(x / 0.2, 0, 1) ** 3)
    assert ks.statistic < 0.05


def test_make_rng_rejects_negative():
    with pytest.raises(ConfigurationError):
        make_rng(-1)


def test_membership_examples(groups, su2):
    u2 = groups["u2"].descriptor
    assert validate_membership(u2, np.eye(2)) == 0
    assert validate_membership(su2, np.diag([2.0, 1.0])) >= 1.0
    X = group_exp(su2, random_algebra_ball(su2, 0.5, make_rng(2), 50))
    assert validate_membership(su2, X).max() <= 1e-12
    assert validate_membership(su2, np.full((2, 2), np.nan)) == np.inf


def test_membership_circle_fast_path(groups):
    c = groups["circle1"]
    X = np.exp(1j * np.linspace(0, 3, 7))[:, None, None]
    assert validate_membership(c, X).max() <= 1e-15
    assert validate_membership(c, np.array([[2.0 + 0j]])) == pytest.approx(3.0)


def test_gl_membership_cond_ceiling(groups):
    gl = groups["gl_c2"].descriptor
    assert validate_membership(gl, np.diag([1.0, 2.0])) == 0
    assert validate_membership(gl, np.diag([1.0, 1e-10])) > 1


@pytest.mark.parametrize("name", ["u2", "su2", "so3"])
def test_repair_restores_membership(groups, name):
    entry = groups[name]
    g = entry.descriptor
    X = group_exp(g, random_algebra_ball(g, 0.4, make_rng(6), 10))
    noisy = X + 1e-6 * make_rng(7).standard_normal(X.shape)
    assert validate_membership(g, repair_membership(g, noisy)).max() <= 1e-12
    assert np.abs(repair_membership(g, noisy) - X).max() <= 1e-5


def test_closure_residual_zero_on_unitary(groups):
    g = groups["u2"].descriptor
    X = group_exp(g, random_algebra_ball(g, 0.25, make_rng(3), 100))
    assert closure_residual(g, X).max() <= 1e-9
