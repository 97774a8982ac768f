"""Phase-locked states: Newton solver, gauge alignment and persistence.

A phase-locked state is a solution ``X_i(t) = X_i^inf exp(Lambda t)``; the
unknowns satisfy the algebraic system

    Ad_{X_i} Lambda = H_i + (kappa/N) sum_j phi(X_j X_i^{-1}),   i = 1..N.

Solutions come in orbits of right multiplication ``X_i -> X_i g``,
``Lambda -> Ad_{g^{-1}} Lambda``; the solver fixes the gauge ``X_1 = e``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import (
    EnsembleState,
    IntegratorConfig,
    ModelSpec,
    default_dt,
    integrate,
    ratios,
    rhs_group,
)
from .groups import random_near_identity
from .lie_core import (
    ChartViolationError,
    group_exp,
    group_log,
    right_invariant_distance,
)

__all__ = [
    "SolverError",
    "LockInconsistencyError",
    "PhaseLockedState",
    "GaugeAlignment",
    "pls_residual",
    "solve_pls",
    "gauge_align",
    "lambda_from_locked_ratios",
    "continuation",
    "locked_diameter",
    "save_pls",
    "load_pls",
]

GAUGE = "X1=e"


class SolverError(RuntimeError):
    def __init__(self, message, best_residual=float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


class LockInconsistencyError(ValueError):
    pass


@dataclass(eq=False)
class PhaseLockedState:
    elements: np.ndarray
    Lambda: np.ndarray
    residual: float
    kappa: float
    gauge: str = GAUGE
    iterations: int = 0

    @property
    def N(self) -> int:
        return self.elements.shape[0]


def _field(spec: ModelSpec, X) -> np.ndarray:
    # F_i = H_i + (kappa/N) sum_j phi(X_j X_i^{-1})
    return rhs_group(spec, X)


def _equations(spec: ModelSpec, X, Lam) -> np.ndarray:
    conj = X @ Lam @ np.linalg.inv(X)
    return spec.group.project(conj - _field(spec, X))


def pls_residual(spec: ModelSpec, X, Lam) -> float:
    """``max_i |Ad_{X_i} Lambda - H_i - (kappa/N) sum_j phi(X_j X_i^{-1})|``."""
    X = np.asarray(X, dtype=complex)
    return float(spec.group.norm(_equations(spec, X, np.asarray(Lam, dtype=complex))).max())


def _unpack(spec, x):
    group = spec.group
    n = group.dim
    N = spec.N
    c = x.reshape(N, n)
    Y = group.from_coords(c[:-1])
    X = np.concatenate([group.identity[None], group_exp(group, Y)])
    return X, group.from_coords(c[-1])


def _pack(spec, X, Lam):
    group = spec.group
    # gauge: right-multiply by X_1^{-1}
    Xg = X @ np.linalg.inv(X[0])
    Y = group_log(group, Xg[1:], check_chart=False)
    return np.concatenate([group.coords(Y).ravel(), group.coords(Lam)])


def _residual_vector(spec, x):
    X, Lam = _unpack(spec, x)
    return spec.group.coords(_equations(spec, X, Lam)).ravel()


def _initial_guess(spec: ModelSpec, seed: int, radius: float | None) -> EnsembleState:
    group = spec.group
    r = radius if radius is not None else min(0.2, group.chart_radius)
    X0 = random_near_identity(group, r, seed, size=spec.N)
    t_final = 5.0 / spec.rate if spec.rate > 0 else 5.0
    dt = max(default_dt(spec.kappa), t_final / 2000)
    traj = integrate(spec, EnsembleState(0.0, X0), IntegratorConfig(dt=dt, t_final=t_final,
                                                                      stride=10 ** 9))
    if traj.event is not None:
        raise SolverError(f"seeding integration stopped: {traj.event.reason}")
    return traj.final


def solve_pls(spec: ModelSpec, initial_guess: EnsembleState | None = None, *,
              Lambda_guess=None, seed: int = 0, seed_radius: float | None = None,
              tol: float = 1e-10, max_iter: int = 50) -> PhaseLockedState:
    """Newton iteration for the locked system in the gauge ``X_1 = e``.

    Unknowns are the coordinates of ``Y_2..Y_N`` (with ``X_i = exp(Y_i)``) and of
    ``Lambda``.  The Jacobian is a forward-difference matrix with step
    ``1e-6 (1 + |x_k|)``, and each step is damped by backtracking on the
    residual norm.  Without ``initial_guess`` the solver integrates from
    random near-identity data (deterministic in ``seed``) for ``5/(kappa*lambda)``
    and starts from the final state.

    Raises
    ------
    SolverError
        On non-convergence within ``max_iter`` or on a chart violation; the
        error carries the best residual reached.
    """
    if initial_guess is None:
        initial_guess = _initial_guess(spec, seed, seed_radius)
    X = np.asarray(initial_guess.elements, dtype=complex)
    if Lambda_guess is None:
        # average of Ad_{X_i^{-1}} F_i, exact on locked states
        F = _field(spec, X)
        Lambda_guess = spec.group.project(np.linalg.inv(X) @ F @ X).mean(axis=0)
    try:
        x = _pack(spec, X, np.asarray(Lambda_guess, dtype=complex))
    except ChartViolationError as exc:
        raise SolverError(f"initial guess outside the chart: {exc}") from exc

    def norm_of(r):
        return float(np.max(np.abs(r))) if r.size else 0.0

    best = math.inf
    try:
        r = _residual_vector(spec, x)
        for it in range(max_iter + 1):
            X, Lam = _unpack(spec, x)
            res = pls_residual(spec, X, Lam)
            best = min(best, res)
            if res <= tol:
                return PhaseLockedState(X, Lam, res, spec.kappa, GAUGE, it)
            if it == max_iter:
                break
            J = np.empty((r.size, x.size))
            for k in range(x.size):
                h = 1e-6 * (1.0 + abs(x[k]))
                xp = x.copy()
                xp[k] += h
                J[:, k] = (_residual_vector(spec, xp) - r) / h
            dx = np.linalg.lstsq(J, -r, rcond=None)[0]
            step, r0 = 1.0, norm_of(r)
            while step > 1e-4:
                x_new = x + step * dx
                r_new = _residual_vector(spec, x_new)
                if norm_of(r_new) < r0 or step < 2e-4:
                    break
                step *= 0.5
            x, r = x_new, r_new
            if not np.all(np.isfinite(x)):
                break
    except (ChartViolationError, np.linalg.LinAlgError) as exc:
        raise SolverError(f"Newton iteration failed: {exc}", best) from exc
    raise SolverError(f"no convergence in {max_iter} iterations (best residual {best:.3g})", best)


@dataclass(frozen=True)
class GaugeAlignment:
    g: np.ndarray
    mismatch: float
    lambda_mismatch: float


def gauge_align(a: PhaseLockedState, b: PhaseLockedState, group) -> GaugeAlignment:
    """Right multiplication ``g`` taking ``a`` to ``b``.

    ``g = a_1^{-1} b_1``; ``mismatch = max_i d(a_i g, b_i)`` and
    ``lambda_mismatch = |Lambda_b - Ad_{g^{-1}} Lambda_a|``.
    """
    group = getattr(group, "descriptor", group)
    if a.elements.shape != b.elements.shape:
        raise ValueError(f"locked states differ in shape: {a.elements.shape} vs {b.elements.shape}")
    g = np.linalg.inv(a.elements[0]) @ b.elements[0]
    mismatch = float(np.max(right_invariant_distance(group, a.elements @ g, b.elements)))
    lam_a = np.linalg.inv(g) @ a.Lambda @ g
    lam_mis = float(group.norm(b.Lambda - lam_a))
    return GaugeAlignment(g, mismatch, lam_mis)


def lambda_from_locked_ratios(spec: ModelSpec, ratios_or_elements, tol: float = 1e-6):
    """Common value ``Lambda = Ad_{X_i}^{-1}(H_i + (kappa/N) sum_k phi(X_k X_i^{-1}))``.

    Accepts either an ``(N, d, d)`` stack of representatives ``X_i`` or an
    ``(N, N, d, d)`` ratio array ``R_ij = X_i X_j^{-1}`` (then ``X_i = R_i1``).
    Returns ``(Lambda, deviation)`` with the mean over ``i`` and the largest
    deviation from it.

    Raises
    ------
    LockInconsistencyError
        If the per-particle values disagree by more than ``tol``.
    """
    A = np.asarray(ratios_or_elements, dtype=complex)
    if A.ndim == 4:
        d = A.shape[-1]
        cocycle = np.linalg.norm(A @ np.swapaxes(A, 0, 1) - np.eye(d), axis=(-2, -1)).max()
        if cocycle > tol:
            raise LockInconsistencyError(f"ratios violate R_ij R_ji = e by {cocycle:.3g}")
        X = A[:, 0]
    else:
        X = A
    F = _field(spec, X)
    per = spec.group.project(np.linalg.inv(X) @ F @ X)
    Lam = per.mean(axis=0)
    dev = float(spec.group.norm(per - Lam).max())
    if dev > tol:
        raise LockInconsistencyError(
            f"per-particle Lambda values differ by {dev:.3g} > {tol:.3g}: ratios are not locked")
    return Lam, dev


def locked_diameter(pls: PhaseLockedState, group) -> float:
    """``max_{i,j} d(X_i^inf, X_j^inf)``."""
    group = getattr(group, "descriptor", group)
    R = ratios(pls.elements)
    iu = np.triu_indices(pls.N, 1)
    return float(group.norm(group_log(group, R[iu])).max())


def continuation(spec: ModelSpec, kappas, **solver_kw) -> list:
    """Solve along a decreasing sequence of couplings, warm-starting each solve.

    Returns ``(kappa, PhaseLockedState | SolverError)`` pairs; the walk stops
    at the first failure, which is reported rather than raised.
    """
    out = []
    guess, lam = None, None
    for kappa in sorted(kappas, reverse=True):
        sp = spec.with_kappa(kappa)
        try:
            sol = solve_pls(sp, guess, Lambda_guess=lam, **solver_kw)
        except SolverError as exc:
            out.append((kappa, exc))
            break
        out.append((kappa, sol))
        guess, lam = EnsembleState(0.0, sol.elements), sol.Lambda
    return out


def _cjson(A):
    A = np.asarray(A, dtype=complex)
    return {"re": A.real.tolist(), "im": A.imag.tolist()}


def _from_cjson(obj):
    return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)


def save_pls(path, pls: PhaseLockedState, spec: ModelSpec, group_id: str | None = None) -> None:
    """Write a locked state as JSON (group id, N, kappa, residual, Lambda, X_i)."""
    group = spec.group
    doc = {
        "group": group_id or f"{group.family}{group.matrix_size}",
        "family": group.family,
        "d": group.matrix_size,
        "N": pls.N,
        "kappa": pls.kappa,
        "phi": spec.phi.id,
        "gauge": pls.gauge,
        "residual": pls.residual,
        "iterations": pls.iterations,
        "lambda_coords": group.coords(pls.Lambda).tolist(),
        "Lambda": _cjson(pls.Lambda),
        "elements": _cjson(pls.elements),
    }
    Path(path).write_text(json.dumps(doc, indent=2))


def load_pls(path) -> PhaseLockedState:
    doc = json.loads(Path(path).read_text())
    return PhaseLockedState(_from_cjson(doc["elements"]), _from_cjson(doc["Lambda"]),
                            float(doc["residual"]), float(doc["kappa"]), doc.get("gauge", GAUGE),
                            int(doc.get("iterations", 0)))
