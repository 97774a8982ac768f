"""Interaction functions phi: G -> g, hypothesis (H) and the adapted metric."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .groups import ConfigurationError, GroupCatalogEntry
from .lie_core import GroupDescriptor, group_exp

__all__ = [
    "InteractionFunction",
    "AdaptedMetric",
    "HypothesisReport",
    "phi_catalog",
    "get_phi",
    "deville_interaction",
    "jacobian_at_identity",
    "check_hypothesis_H",
    "build_adapted_metric",
    "ConditioningWarning",
]


class ConditioningWarning(UserWarning):
    pass


def _descriptor(group) -> GroupDescriptor:
    return group.descriptor if isinstance(group, GroupCatalogEntry) else group


@dataclass(frozen=True)
class InteractionFunction:
    """A pairwise interaction ``phi``.

    ``func`` maps a stack of group matrices ``(..., d, d)`` to ambient
    matrices; :meth:`evaluate` projects the result onto the algebra.  A
    user-supplied ``func`` must be deterministic.  ``families`` lists the
    compatible group ids (empty means any).
    """

    id: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    families: tuple = ()
    equivariant: bool = False

    def supports(self, group) -> bool:
        return not self.families or _descriptor(group).family in self.families

    def evaluate(self, group, X) -> np.ndarray:
        group = _descriptor(group)
        return group.project(self.func(np.asarray(X, dtype=complex)))

    def __call__(self, group, X) -> np.ndarray:
        return self.evaluate(group, X)


def _inv(X):
    if X.shape[-1] == 1:
        return 1.0 / X
    return np.linalg.inv(X)


def _half_difference(X):
    return 0.5 * (X - _inv(X))


def _lohe_unitary(U):
    return 0.5 * (U - np.swapaxes(U.conj(), -1, -2))


def _sl_traceless(X):
    D = 0.5 * (X - _inv(X))
    d = X.shape[-1]
    tr = np.trace(D, axis1=-2, axis2=-1)
    return D - (tr / d)[..., None, None] * np.eye(d)


def _kuramoto_sin(X):
    # X = e^{i theta} -> i sin(theta), the u(1) image of sin(theta)
    return 1j * (X.imag / np.abs(X))


def deville_interaction(f: Callable[[np.ndarray], np.ndarray], id: str = "deville_f",
                        equivariant: bool = True) -> InteractionFunction:
    """All-to-all DeVille-type interaction ``phi(X) = (f(X) - f(X^{-1})) / 2``.

    With coupling ``kappa / N`` this reproduces the pair term
    ``(gamma / 2) (f(X_j X_i^{-1}) - f(X_i X_j^{-1}))`` with ``gamma = kappa / N``.
    """
    return InteractionFunction(
        id, lambda X: 0.5 * (f(X) - f(_inv(X))), families=("gl_c", "sl_c"),
        equivariant=equivariant)


def phi_catalog() -> list[InteractionFunction]:
    """The shipped interaction functions."""
    return [
        InteractionFunction("kuramoto_sin", _kuramoto_sin, ("circle",), equivariant=True),
        InteractionFunction("lohe_unitary", _lohe_unitary, ("circle", "u", "su", "so"),
                            equivariant=True),
        InteractionFunction("lohe_matrix", _half_difference, ("circle", "u", "gl_c", "so", "sl_c"),
                            equivariant=True),
        InteractionFunction("sl_traceless", _sl_traceless, ("su", "sl_c"), equivariant=True),
        # f(X) = X^2, so (d phi)_e = 2 id
        deville_interaction(lambda X: X @ X, "deville_f"),
    ]


def get_phi(phi_id: str) -> InteractionFunction:
    for phi in phi_catalog():
        if phi.id == phi_id:
            return phi
    raise ConfigurationError(f"unknown interaction function {phi_id!r}")


def _central_difference(phi, group, eps):
    E = group.basis
    plus = phi.evaluate(group, group_exp(group, eps * E))
    minus = phi.evaluate(group, group_exp(group, -eps * E))
    # column a holds the coordinates of the derivative along e_a
    return (group.coords(plus) - group.coords(minus)).T / (2 * eps)


def jacobian_at_identity(phi: InteractionFunction, group, eps: float = 1e-3) -> np.ndarray:
    """``(d phi)_e`` in basis coordinates.

    Central differences of ``phi o exp`` along each basis direction, with one
    Richardson extrapolation step (error O(eps^4)).
    """
    group = _descriptor(group)
    if not phi.supports(group):
        raise ConfigurationError(f"{phi.id} is not defined on {group.family}")
    coarse = _central_difference(phi, group, eps)
    fine = _central_difference(phi, group, eps / 2)
    return (4 * fine - coarse) / 3


@dataclass
class HypothesisReport:
    passed: bool
    spectrum: np.ndarray
    phi_at_identity: float
    jacobian: np.ndarray | None = None
    reason: str = ""


def check_hypothesis_H(phi: InteractionFunction, group, tol: float = 1e-12,
                       spectral_margin: float = 1e-8) -> HypothesisReport:
    """Check ``phi(e) = 0`` and that ``(d phi)_e`` has spectrum in Re z > 0.

    Eigenvalues with real part below ``spectral_margin`` count as failures so
    that finite-difference noise cannot turn a zero eigenvalue into a pass.
    """
    group = _descriptor(group)
    if not phi.supports(group):
        return HypothesisReport(False, np.array([]), np.nan, None,
                                f"{phi.id} is not defined on {group.family}")
    try:
        at_e = float(np.linalg.norm(phi.evaluate(group, group.identity)))
        jac = jacobian_at_identity(phi, group)
    except Exception as exc:  # failures are report contents
        return HypothesisReport(False, np.array([]), np.nan, None, f"evaluation failed: {exc}")
    spectrum = np.linalg.eigvals(jac)
    reasons = []
    if at_e > tol:
        reasons.append(f"phi(e) = {at_e:.3g} != 0")
    if not np.all(spectrum.real > spectral_margin):
        reasons.append(f"min Re spectrum = {spectrum.real.min():.3g}")
    return HypothesisReport(not reasons, spectrum, at_e, jac, "; ".join(reasons))


@dataclass(frozen=True)
class AdaptedMetric:
    """Inner product ``P`` on algebra coordinates with ``<v, A v>_P >= lam |v|_P^2``."""

    P: np.ndarray
    lam: float

    @classmethod
    def identity(cls, n: int) -> "AdaptedMetric":
        return cls(np.eye(n), 1.0)


def build_adapted_metric(A, cond_warn: float = 1e8) -> AdaptedMetric:
    """Solve ``P A + A^T P = 2 I`` and return ``P`` with its rate ``lam``.

    ``lam`` is the smallest eigenvalue of the pencil
    ``((P A + A^T P) / 2, P)``, i.e. the largest constant with
    ``<v, A v>_P >= lam <v, v>_P``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    eig = np.linalg.eigvals(A)
    if not np.all(eig.real > 0):
        raise ValueError(f"A must have spectrum in the open right half-plane, got {eig}")
    # solve_continuous_lyapunov solves a X + X a^H = q
    P = scipy.linalg.solve_continuous_lyapunov(A.T, 2 * np.eye(n))
    P = 0.5 * (P + P.T)
    S = 0.5 * (P @ A + A.T @ P)
    lam = float(scipy.linalg.eigh(S, P, eigvals_only=True).min())
    cond = np.linalg.cond(P)
    if cond > cond_warn:
        warnings.warn(
            f"adapted metric is ill-conditioned (cond P = {cond:.3g}); "
            f"spectrum of A is close to the imaginary axis, lambda = {lam:.3g}",
            ConditioningWarning, stacklevel=2)
    return AdaptedMetric(P, lam)
