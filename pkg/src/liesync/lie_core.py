"""Matrix Lie group and Lie algebra primitives.

Algebra elements and group elements are plain complex ``ndarray`` objects of
shape ``(..., d, d)``; the :class:`GroupDescriptor` that interprets them is
passed alongside.  Every function accepts arbitrary leading batch dimensions.

Coordinates are taken with respect to a basis of the algebra that is
orthonormal for the real Frobenius pairing ``Re Tr(A^H B)``.  The descriptor
may carry a different inner product ``P`` on those coordinates (for example
the adapted metric built in :mod:`liesync.interactions`); all norms,
distances and chart checks use it.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.special import bernoulli, factorial

__all__ = [
    "LieError",
    "InvalidInputError",
    "ChartViolationError",
    "GroupDescriptor",
    "group_exp",
    "group_log",
    "ad",
    "adjoint",
    "commutator",
    "bch_remainder",
    "dexp",
    "dexp_inv_left",
    "dexp_inv_right",
    "dexp_inv_operator",
    "dexp_operator",
    "right_invariant_distance",
]

# Tail of the psi series is dropped once its rigorous bound is below this.
SERIES_TOL = 1e-14
# Eigenvector condition number above which the eigen path of log is abandoned.
_EIG_COND_MAX = 1e6


class LieError(ValueError):
    """Base class for errors raised by the Lie-group primitives."""


class InvalidInputError(LieError):
    pass


class ChartViolationError(LieError):
    """Raised when a group element leaves the logarithmic chart exp(B_r).

    ``where`` optionally names the offending entries (e.g. particle pairs).
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


@dataclass(frozen=True, eq=False)
class GroupDescriptor:
    """Matrix Lie group ``G`` together with an inner product on its algebra.

    Parameters
    ----------
    family : str
        Stable family id: ``"circle"``, ``"u"``, ``"su"``, ``"gl_c"``,
        ``"sl_c"`` or ``"so"``.
    matrix_size : int
        Size ``d`` of the defining matrices.
    basis : ndarray, shape (n, d, d)
        Real basis of the algebra, orthonormal for ``Re Tr(A^H B)``.
    inner_product : ndarray, shape (n, n), optional
        Symmetric positive-definite form on basis coordinates.  Defaults to
        the identity (Frobenius metric).
    chart_radius : float
        Radius ``r`` of the ball on which ``exp`` is used as a chart.
    """

    family: str
    matrix_size: int
    basis: np.ndarray
    inner_product: np.ndarray | None = None
    chart_radius: float = 0.5
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=complex)
        object.__setattr__(self, "basis", basis)
        n = basis.shape[0]
        if self.inner_product is None:
            object.__setattr__(self, "inner_product", np.eye(n))
        P = np.asarray(self.inner_product, dtype=float)
        if P.shape != (n, n):
            raise InvalidInputError(f"inner product must be {n}x{n}, got {P.shape}")
        if not np.allclose(P, P.T, atol=1e-12 * max(1.0, np.abs(P).max())):
            raise InvalidInputError("inner product is not symmetric")
        if np.linalg.eigvalsh(P).min() <= 0:
            raise InvalidInputError("inner product is not positive definite")
        object.__setattr__(self, "inner_product", P)
        if not self.chart_radius > 0:
            raise InvalidInputError("chart radius must be positive")

    # -- basic attributes -------------------------------------------------
    @property
    def dim(self) -> int:
        """Real dimension of the algebra."""
        return self.basis.shape[0]

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.matrix_size, dtype=complex)

    @property
    def structure_constants(self) -> np.ndarray:
        """``f[a, b, c]`` with ``[e_a, e_b] = sum_c f[a, b, c] e_c``."""
        if "f" not in self._cache:
            E = self.basis
            br = np.einsum("aij,bjk->abik", E, E) - np.einsum("bij,ajk->abik", E, E)
            self._cache["f"] = self.coords(br)
        return self._cache["f"]

    @property
    def is_abelian(self) -> bool:
        if "abelian" not in self._cache:
            self._cache["abelian"] = bool(np.abs(self.structure_constants).max(initial=0.0) < 1e-13)
        return self._cache["abelian"]

    def with_inner_product(self, P) -> "GroupDescriptor":
        """Copy of this descriptor carrying the inner product ``P``."""
        return dataclasses.replace(self, inner_product=np.asarray(P, dtype=float), _cache={})

    def with_chart_radius(self, r: float) -> "GroupDescriptor":
        return dataclasses.replace(self, chart_radius=float(r), _cache={})

    # -- coordinates ------------------------------------------------------
    def coords(self, v) -> np.ndarray:
        """Basis coordinates of (the projection onto the algebra of) ``v``."""
        v = np.asarray(v)
        d = self.matrix_size
        flat = v.reshape(v.shape[:-2] + (d * d,))
        return (flat @ self._flat_basis_conj_t).real

    def from_coords(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        d = self.matrix_size
        return (c @ self._flat_basis).reshape(c.shape[:-1] + (d, d))

    @property
    def _flat_basis(self) -> np.ndarray:
        if "flat" not in self._cache:
            self._cache["flat"] = self.basis.reshape(self.dim, -1)
            self._cache["flat_ct"] = self._cache["flat"].conj().T.copy()
        return self._cache["flat"]

    @property
    def _flat_basis_conj_t(self) -> np.ndarray:
        self._flat_basis
        return self._cache["flat_ct"]

    def project(self, v) -> np.ndarray:
        """Frobenius-orthogonal projection of ambient matrices onto the algebra."""
        if self.family == "circle":
            # u(1) = i R
            return 1j * np.asarray(v).imag
        return self.from_coords(self.coords(v))

    def projection_residual(self, v) -> np.ndarray:
        v = np.asarray(v)
        return np.linalg.norm(v - self.project(v), axis=(-2, -1))

    def inner(self, v, w) -> np.ndarray:
        cv, cw = self.coords(v), self.coords(w)
        return np.einsum("...a,ab,...b->...", cv, self.inner_product, cw)

    def coord_norm(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        q = np.einsum("...a,ab,...b->...", c, self.inner_product, c)
        return np.sqrt(np.maximum(q, 0.0))

    def norm(self, v) -> np.ndarray:
        """Norm of algebra elements in the descriptor inner product."""
        return self.coord_norm(self.coords(v))


def _check_finite(x, what="input"):
    x = np.asarray(x)
    if not np.isfinite(x).all():
        raise InvalidInputError(f"non-finite entries in {what}")
    return x


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a


def group_exp(group: GroupDescriptor, v) -> np.ndarray:
    """Matrix exponential of algebra elements (Pade scaling and squaring)."""
    v = _check_finite(np.asarray(v, dtype=complex), "algebra element")
    if group.matrix_size == 1:
        return np.exp(v)
    return scipy.linalg.expm(v)


def _log_flat(X: np.ndarray) -> np.ndarray:
    """Principal logarithm of a stack ``(m, d, d)`` of matrices."""
    out = np.empty_like(X)
    w, V = np.linalg.eig(X)
    neg = (np.abs(w.imag) <= 1e-14 * np.abs(w)) & (w.real < 0)
    if np.any(neg):
        bad = np.flatnonzero(neg.any(axis=-1))
        raise ChartViolationError(
            "eigenvalue on the negative real axis: no principal logarithm", where=bad.tolist())
    cond = np.linalg.cond(V)
    good = np.isfinite(cond) & (cond < _EIG_COND_MAX)
    if np.any(good):
        Vg = V[good]
        L = (Vg * np.log(w[good])[..., None, :]) @ np.linalg.inv(Vg)
        out[good] = L
    for k in np.flatnonzero(~good):
        # defective or nearly defective: inverse scaling and squaring
        out[k] = scipy.linalg.logm(X[k])
    return out


def group_log(group: GroupDescriptor, X, check_chart: bool = True) -> np.ndarray:
    """Principal logarithm of group elements, projected onto the algebra.

    Raises
    ------
    ChartViolationError
        If an eigenvalue lies on the closed negative real axis, or if
        ``check_chart`` is set and the logarithm has norm ``>= chart_radius``.
    """
    X = _check_finite(np.asarray(X, dtype=complex), "group element")
    shape = X.shape
    if group.matrix_size == 1:
        if np.any((X.real < 0) & (np.abs(X.imag) <= 1e-14 * np.abs(X))):
            raise ChartViolationError("element on the negative real axis")
        L = np.log(X)
    else:
        L = _log_flat(X.reshape((-1,) + shape[-2:])).reshape(shape)
    L = group.project(L)
    if check_chart:
        nrm = group.norm(L)
        if np.any(nrm >= group.chart_radius):
            where = np.argwhere(np.atleast_1d(nrm >= group.chart_radius)).tolist()
            raise ChartViolationError(
                f"log norm {np.max(nrm):.4g} outside chart radius {group.chart_radius:.4g}",
                where=where)
    return L


def ad(group: GroupDescriptor, v) -> np.ndarray:
    """Matrix of ``ad_v = [v, .]`` in basis coordinates, shape (..., n, n)."""
    c = group.coords(v)
    # ad_v e_b = sum_a c_a [e_a, e_b] = sum_a c_a f[a, b, :]
    return np.einsum("...a,abc->...cb", c, group.structure_constants)


def adjoint(group: GroupDescriptor, g) -> np.ndarray:
    """Matrix of ``Ad_g : v -> g v g^{-1}`` in basis coordinates."""
    g = _check_finite(np.asarray(g, dtype=complex), "group element")
    if np.any(np.abs(np.linalg.det(g)) < 1e-300):
        raise InvalidInputError("singular group element")
    ginv = np.linalg.inv(g)
    conj = np.einsum("...ij,bjk,...kl->...bil", g, group.basis, ginv)
    return np.swapaxes(group.coords(conj), -1, -2)


def bch_remainder(group: GroupDescriptor, v, w) -> np.ndarray:
    """``a(v, w) = log(exp(v) exp(w)) - v - w``: BCH terms of degree >= 2."""
    prod = group_exp(group, v) @ group_exp(group, w)
    return group_log(group, prod, check_chart=False) - group.project(v) - group.project(w)


# --------------------------------------------------------------------------
# functional calculus of ad_Y
# --------------------------------------------------------------------------
@lru_cache(maxsize=None)
def _psi_coefficients(n_max: int = 80) -> np.ndarray:
    """Taylor coefficients of z / (e^z - 1): B_k / k!."""
    k = np.arange(n_max + 1)
    return bernoulli(n_max) / factorial(k)


def _psi_terms_needed(rho: float) -> int:
    """Terms so that the tail bound sum_{k>M} 4 (rho/2pi)^k is below SERIES_TOL.

    Uses |B_k / k!| <= 2 zeta(k) / (2 pi)^k <= 4 / (2 pi)^k.
    """
    q = rho / (2 * np.pi)
    if q >= 0.95:
        raise ChartViolationError("||ad_Y|| too close to 2*pi for the psi series")
    if q == 0:
        return 1
    m = 1
    while 4 * q ** (m + 1) / (1 - q) > SERIES_TOL:
        m += 1
    return m


def _phi1_terms_needed(rho: float) -> int:
    m, term = 0, 1.0
    # tail of sum rho^k/(k+1)! bounded by twice the first dropped term for rho < k
    while 2 * term > SERIES_TOL or m < rho:
        m += 1
        term *= rho / (m + 1)
    return m


def _ad_norm_bound(Y: np.ndarray) -> float:
    # ||[Y, h]||_F <= 2 ||Y||_2 ||h||_F <= 2 ||Y||_F ||h||_F
    return 2.0 * float(np.max(np.linalg.norm(Y, axis=(-2, -1)), initial=0.0))


def _check_in_chart(group, Y):
    nrm = group.norm(Y)
    if np.any(nrm >= group.chart_radius):
        raise ChartViolationError(
            f"|Y| = {np.max(nrm):.4g} not below chart radius {group.chart_radius:.4g}")


def _psi_series(Y, h):
    rho = _ad_norm_bound(Y)
    m = _psi_terms_needed(rho)
    coef = _psi_coefficients(max(m, 2))
    term = h
    out = h.copy()
    for k in range(1, m + 1):
        term = commutator(Y, term)
        if coef[k] != 0.0:
            out = out + coef[k] * term
    return out


def _psi_eig(group, Y, h):
    A = ad(group, Y)
    mu, V = np.linalg.eig(A)
    small = np.abs(mu) < 1e-6
    safe = np.where(small, 1.0, mu)
    psi = np.where(small, 1 - mu / 2 + mu ** 2 / 12, safe / np.expm1(safe))
    c = group.coords(h)
    Vinv_c = np.linalg.solve(V, c[..., None].astype(complex))
    res = (V @ (psi[..., None] * Vinv_c))[..., 0].real
    return group.from_coords(res)


def dexp_inv_left(group: GroupDescriptor, Y, h, method: str = "series") -> np.ndarray:
    """Apply ``psi(ad_Y) = ad_Y / (e^{ad_Y} - 1)`` to ``h``.

    This converts a right-trivialized velocity of ``exp(Y)`` into the
    velocity of ``Y``.  ``method="series"`` sums the Bernoulli series until the
    rigorous tail bound drops below 1e-14; ``method="eig"`` diagonalizes
    ``ad_Y`` in coordinates and is meant as an independent cross-check.
    """
    Y = np.asarray(Y, dtype=complex)
    h = np.asarray(h, dtype=complex)
    _check_in_chart(group, Y)
    if group.is_abelian:
        return group.project(h)
    if method == "series":
        return group.project(_psi_series(Y, h))
    if method == "eig":
        return _psi_eig(group, Y, h)
    raise ValueError(f"unknown method {method!r}")


def dexp_inv_right(group: GroupDescriptor, Y, h, method: str = "series") -> np.ndarray:
    """Apply ``ad_Y / (1 - e^{-ad_Y})`` to ``h``; equals ``dexp_inv_left(-Y, h)``."""
    return dexp_inv_left(group, -np.asarray(Y, dtype=complex), h, method=method)


def dexp(group: GroupDescriptor, Y, h) -> np.ndarray:
    """Apply ``phi1(ad_Y) = (e^{ad_Y} - 1) / ad_Y`` to ``h``.

    ``d/dt exp(Y(t)) = dexp(Y, Y') exp(Y)``.
    """
    Y = np.asarray(Y, dtype=complex)
    h = np.asarray(h, dtype=complex)
    if group.is_abelian:
        return group.project(h)
    m = _phi1_terms_needed(_ad_norm_bound(Y))
    term = h
    out = h.copy()
    for k in range(1, m + 1):
        term = commutator(Y, term) / (k + 1)
        out = out + term
    return group.project(out)


def _operator_series(A: np.ndarray, coef) -> np.ndarray:
    n = A.shape[-1]
    out = np.broadcast_to(np.eye(n), A.shape).copy() * coef[0]
    power = np.broadcast_to(np.eye(n), A.shape).copy()
    for c in coef[1:]:
        power = power @ A
        if c != 0.0:
            out = out + c * power
    return out


def dexp_inv_operator(group: GroupDescriptor, Y, side: str = "left") -> np.ndarray:
    """Coordinate matrix of ``psi(ad_Y)`` (``side="left"``) or ``psi(-ad_Y)``."""
    Y = np.asarray(Y, dtype=complex)
    _check_in_chart(group, Y)
    A = ad(group, Y if side == "left" else -Y)
    # spectral norm of ad in coordinates bounds the operator series
    rho = float(np.max(np.linalg.norm(A, 2, axis=(-2, -1)), initial=0.0))
    m = _psi_terms_needed(rho)
    return _operator_series(A, _psi_coefficients(max(m, 2))[: m + 1])


def dexp_operator(group: GroupDescriptor, Y) -> np.ndarray:
    """Coordinate matrix of ``phi1(ad_Y)``."""
    A = ad(group, np.asarray(Y, dtype=complex))
    rho = float(np.max(np.linalg.norm(A, 2, axis=(-2, -1)), initial=0.0))
    m = _phi1_terms_needed(rho)
    coef = 1.0 / factorial(np.arange(1, m + 2))
    return _operator_series(A, coef)


def right_invariant_distance(group: GroupDescriptor, X, Z) -> np.ndarray:
    """``|log(X Z^{-1})|`` in the descriptor metric.

    Right-invariant by construction.  Raises :class:`ChartViolationError`
    when the ratio leaves ``exp(B_r)``: the distance is undefined there.
    """
    X = np.asarray(X, dtype=complex)
    Z = np.asarray(Z, dtype=complex)
    ratio = X @ np.linalg.inv(Z)
    try:
        return group.norm(group_log(group, ratio))
    except ChartViolationError as exc:
        raise ChartViolationError("distance undefined at this separation", where=exc.where) from exc
