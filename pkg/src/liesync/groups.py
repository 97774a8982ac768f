"""Concrete matrix groups: bases, membership checks and reproducible sampling."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .lie_core import (
    ChartViolationError,
    GroupDescriptor,
    group_exp,
    group_log,
)

__all__ = [
    "ConfigurationError",
    "Family",
    "GroupCatalogEntry",
    "make_group",
    "make_rng",
    "random_algebra_ball",
    "random_near_identity",
    "validate_membership",
    "repair_membership",
    "calibrate_chart_radius",
    "closure_residual",
]

DEFAULT_CHART_RADIUS = 0.5
# exp is injective on the open interval (-pi, pi) of u(1) = iR
CIRCLE_CHART_RADIUS = np.pi
# condition-number ceiling used as the membership bound for GL-type families
GL_COND_CEILING = 1e8


class ConfigurationError(ValueError):
    pass


class Family(str, enum.Enum):
    CIRCLE = "circle"
    UNITARY = "u"
    SPECIAL_UNITARY = "su"
    GENERAL_LINEAR_COMPLEX = "gl_c"
    SPECIAL_LINEAR = "sl_c"
    SPECIAL_ORTHOGONAL = "so"


@dataclass(frozen=True)
class GroupCatalogEntry:
    """A shipped group: descriptor, closure flag and sampler description."""

    descriptor: GroupDescriptor
    closure_flag: bool
    sampler: str = "philox"

    @property
    def family(self) -> Family:
        return Family(self.descriptor.family)

    @property
    def group_id(self) -> str:
        return self.descriptor.family


def _unit(d, k, l):
    E = np.zeros((d, d), dtype=complex)
    E[k, l] = 1.0
    return E


def _antihermitian_basis(d, traceless):
    mats = []
    for k in range(d):
        for l in range(k + 1, d):
            mats.append((_unit(d, k, l) - _unit(d, l, k)) / np.sqrt(2))
            mats.append(1j * (_unit(d, k, l) + _unit(d, l, k)) / np.sqrt(2))
    if traceless:
        mats.extend(_traceless_diagonal(d, 1j))
    else:
        mats.extend(1j * _unit(d, k, k) for k in range(d))
    return mats


def _traceless_diagonal(d, scale):
    # orthonormalized i(E_kk - E_{k+1,k+1}) chain (generalized Gell-Mann)
    out = []
    for m in range(1, d):
        diag = np.zeros(d)
        diag[:m] = 1.0
        diag[m] = -m
        diag /= np.sqrt(m * (m + 1))
        out.append(scale * np.diag(diag).astype(complex))
    return out


def _gl_basis(d, traceless):
    mats = []
    for k in range(d):
        for l in range(d):
            if k != l:
                mats.append(_unit(d, k, l))
                mats.append(1j * _unit(d, k, l))
    if traceless:
        mats.extend(_traceless_diagonal(d, 1.0))
        mats.extend(_traceless_diagonal(d, 1j))
    else:
        mats.extend(_unit(d, k, k) for k in range(d))
        mats.extend(1j * _unit(d, k, k) for k in range(d))
    return mats


def _so_basis(d):
    return [(_unit(d, k, l) - _unit(d, l, k)) / np.sqrt(2)
            for k in range(d) for l in range(k + 1, d)]


def _basis_for(family: Family, d: int):
    if family is Family.CIRCLE:
        if d != 1:
            raise ConfigurationError("the circle group is realized with d = 1")
        return [np.array([[1j]])]
    if family is Family.UNITARY:
        return _antihermitian_basis(d, traceless=False)
    if family is Family.SPECIAL_UNITARY:
        if d < 2:
            raise ConfigurationError("SU(d) requires d >= 2")
        return _antihermitian_basis(d, traceless=True)
    if family is Family.GENERAL_LINEAR_COMPLEX:
        return _gl_basis(d, traceless=False)
    if family is Family.SPECIAL_LINEAR:
        if d < 2:
            raise ConfigurationError("SL_d(C) requires d >= 2")
        return _gl_basis(d, traceless=True)
    if family is Family.SPECIAL_ORTHOGONAL:
        if d < 2:
            raise ConfigurationError("SO(d) requires d >= 2")
        return _so_basis(d)
    raise ConfigurationError(f"unsupported family {family!r}")


def make_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, index)``; bit-reproducible."""
    if seed < 0 or index < 0:
        raise ConfigurationError("seed and index must be non-negative")
    return np.random.Generator(np.random.Philox(key=int(seed) + (int(index) << 64)))


def random_algebra_ball(group: GroupDescriptor, radius: float, rng, size=None) -> np.ndarray:
    """Algebra elements uniform on the ball of ``radius`` in the descriptor metric."""
    n = group.dim
    shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
    z = rng.standard_normal(shape + (n,))
    z /= np.linalg.norm(z, axis=-1, keepdims=True)
    rad = radius * rng.random(shape + (1,)) ** (1.0 / n)
    # map the Euclidean ball onto the P-ball: c = L^{-T} x with P = L L^T
    L = np.linalg.cholesky(group.inner_product)
    c = np.linalg.solve(L.T, (z * rad)[..., None])[..., 0]
    return group.from_coords(c)


def random_near_identity(entry, radius: float, seed: int, size=None, index: int = 0) -> np.ndarray:
    """``exp(v)`` with ``v`` uniform on ``B_radius``; deterministic in ``(seed, index)``."""
    group = entry.descriptor if isinstance(entry, GroupCatalogEntry) else entry
    if not 0 < radius <= group.chart_radius:
        raise ConfigurationError(
            f"radius must lie in (0, {group.chart_radius}], got {radius}")
    v = random_algebra_ball(group, radius, make_rng(seed, index), size=size)
    return group_exp(group, v)


def validate_membership(group, X) -> np.ndarray:
    """Family-specific membership residual (0 for exact members).

    Unitary families use ``||X^H X - I||_F``; special families add
    ``|det X - 1|``; GL-type families report ``cond(X) / 1e8`` once the
    condition number exceeds that ceiling (0 below it).  Non-finite input
    gives ``inf``.
    """
    group = group.descriptor if isinstance(group, GroupCatalogEntry) else group
    X = np.asarray(X, dtype=complex)
    d = group.matrix_size
    if d == 1 and group.family == Family.CIRCLE.value:
        with np.errstate(invalid="ignore"):
            res = np.abs(np.abs(X[..., 0, 0]) ** 2 - 1.0)
        return np.where(np.isfinite(res), res, np.inf)
    finite = np.all(np.isfinite(X), axis=(-2, -1))
    Xs = np.where(finite[..., None, None], X, np.eye(d))
    fam = Family(group.family)
    eye = np.eye(d)
    res = np.zeros(X.shape[:-2])
    if fam in (Family.CIRCLE, Family.UNITARY, Family.SPECIAL_UNITARY, Family.SPECIAL_ORTHOGONAL):
        res = res + np.linalg.norm(np.swapaxes(Xs.conj(), -1, -2) @ Xs - eye, axis=(-2, -1))
    if fam is Family.SPECIAL_ORTHOGONAL:
        res = res + np.linalg.norm(Xs.imag, axis=(-2, -1))
    if fam in (Family.SPECIAL_UNITARY, Family.SPECIAL_LINEAR, Family.SPECIAL_ORTHOGONAL):
        res = res + np.abs(np.linalg.det(Xs) - 1.0)
    if fam in (Family.GENERAL_LINEAR_COMPLEX, Family.SPECIAL_LINEAR):
        cond = np.linalg.cond(Xs)
        res = res + np.where(cond > GL_COND_CEILING, cond / GL_COND_CEILING, 0.0)
    return np.where(finite, res, np.inf)


def repair_membership(group, X) -> np.ndarray:
    """Project (near-)members back onto the group."""
    group = group.descriptor if isinstance(group, GroupCatalogEntry) else group
    X = np.asarray(X, dtype=complex)
    fam = Family(group.family)
    d = group.matrix_size
    if fam in (Family.CIRCLE, Family.UNITARY, Family.SPECIAL_UNITARY, Family.SPECIAL_ORTHOGONAL):
        if fam is Family.SPECIAL_ORTHOGONAL:
            X = X.real.astype(complex)
        U, _, Vh = np.linalg.svd(X)
        X = U @ Vh
    if fam in (Family.SPECIAL_UNITARY, Family.SPECIAL_LINEAR, Family.SPECIAL_ORTHOGONAL):
        det = np.linalg.det(X)
        X = X / (det ** (1.0 / d))[..., None, None]
    return X


def closure_residual(group: GroupDescriptor, X) -> np.ndarray:
    """Relative residual of projecting ``X - X^{-1}`` onto the algebra."""
    D = X - np.linalg.inv(X)
    scale = np.maximum(1.0, np.linalg.norm(D, axis=(-2, -1)))
    return group.projection_residual(D) / scale


def calibrate_chart_radius(group: GroupDescriptor, samples: int = 200, seed: int = 0,
                           tol: float = 1e-10, min_radius: float = 1e-3) -> GroupDescriptor:
    """Halve the chart radius until ``log(exp(v)) = v`` on sampled ``v`` in B_r."""
    r = group.chart_radius
    while r >= min_radius:
        g = group.with_chart_radius(r)
        v = random_algebra_ball(g, r * (1 - 1e-9), make_rng(seed), size=samples)
        try:
            back = group_log(g, group_exp(g, v), check_chart=False)
        except ChartViolationError:
            back = None
        if back is not None:
            err = g.norm(back - v) / (1 + g.norm(v))
            if np.max(err) <= tol:
                return g
        r /= 2
    raise ConfigurationError("could not calibrate a chart radius")


def make_group(family, d: int, chart_radius: float | None = None) -> GroupCatalogEntry:
    """Build a catalog entry for ``family`` in dimension ``d``.

    ``family`` is a :class:`Family` or its string id (``"circle"``, ``"u"``,
    ``"su"``, ``"gl_c"``, ``"sl_c"``, ``"so"``).
    """
    try:
        fam = Family(family)
    except ValueError:
        raise ConfigurationError(f"unknown group family {family!r}") from None
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise ConfigurationError(f"matrix size must be a positive integer, got {d!r}")
    basis = np.array(_basis_for(fam, int(d)))
    if chart_radius is None:
        chart_radius = CIRCLE_CHART_RADIUS if fam is Family.CIRCLE else DEFAULT_CHART_RADIUS
    group = GroupDescriptor(fam.value, int(d), basis, chart_radius=chart_radius)
    group = calibrate_chart_radius(group)

    rng = make_rng(12345)
    v = random_algebra_ball(group, group.chart_radius / 2, rng, size=100)
    closure = bool(np.max(closure_residual(group, group_exp(group, v))) <= 1e-9)
    return GroupCatalogEntry(group, closure)
