"""Lyapunov functionals, synchronization diagnostics and decay-rate fits.

All norms are taken in the inner product carried by the group descriptor.
For a :class:`~liesync.dynamics.ModelSpec` built with ``adapted=True`` this is
the adapted metric, so measured rates compare directly with ``kappa*lambda``.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Callable, Sequence

import numpy as np

from .dynamics import (
    EnsembleState,
    LogState,
    ModelSpec,
    Trajectory,
    ratios,
    rhs_group,
    rhs_ratio,
)
from .interactions import AdaptedMetric
from .lie_core import (
    ChartViolationError,
    GroupDescriptor,
    bch_remainder,
    group_log,
)

__all__ = [
    "FitError",
    "DecayFit",
    "DiagnosticsRecord",
    "log_state",
    "diameter",
    "lyapunov_y_inf",
    "lyapunov_diff",
    "compat_residual",
    "fit_decay_rate",
    "lock_residual",
    "normalized_speed_mismatch",
    "left_velocities",
    "diagnostics",
    "difference_quotients",
    "gronwall_excess",
    "CauchyReport",
    "cauchy_test",
    "calibrate_basin",
    "calibrate_coupling",
    "y_inf_series",
    "lyapunov_diff_series",
]


class FitError(ValueError):
    pass


def _metric_group(group: GroupDescriptor, metric: AdaptedMetric | None) -> GroupDescriptor:
    return group if metric is None else group.with_inner_product(metric.P)


def log_state(group: GroupDescriptor, state: EnsembleState, check_chart: bool = True) -> LogState:
    """``Y_ij = log(X_i X_j^{-1})`` for an ensemble."""
    return LogState.from_ensemble(group, state, check_chart=check_chart)


def _pair_norms(group, Y):
    N = Y.shape[0]
    iu = np.triu_indices(N, 1)
    return group.norm(Y[iu])


def lyapunov_y_inf(state: LogState, group: GroupDescriptor,
                   metric: AdaptedMetric | None = None) -> float:
    """``||Y||_inf = max_{i,j} |Y_ij|``.

    ``metric`` overrides the descriptor's inner product when given.

    Raises
    ------
    ChartViolationError
        If some ``|Y_ij|`` is not below the chart radius.
    """
    g = _metric_group(group, metric)
    nrm = _pair_norms(g, state.Y)
    if nrm.size == 0:
        return 0.0
    if np.any(_pair_norms(group, state.Y) >= group.chart_radius):
        raise ChartViolationError("log state outside the chart")
    return float(nrm.max())


def lyapunov_diff(a: LogState, b: LogState, group: GroupDescriptor,
                  metric: AdaptedMetric | None = None) -> float:
    """``||Y - Y~||_inf = max_{i,j} |Y_ij - Y~_ij|``."""
    if a.Y.shape != b.Y.shape:
        raise ValueError(f"log states differ in shape: {a.Y.shape} vs {b.Y.shape}")
    g = _metric_group(group, metric)
    nrm = _pair_norms(g, a.Y - b.Y)
    return float(nrm.max()) if nrm.size else 0.0


def diameter(group: GroupDescriptor, X) -> float:
    """Largest pairwise right-invariant distance ``max |log(X_i X_j^{-1})|``.

    Returns ``inf`` when some ratio leaves the chart, since the distance is
    undefined there.
    """
    X = np.asarray(X, dtype=complex)
    N = X.shape[0]
    R = ratios(X)
    iu = np.triu_indices(N, 1)
    try:
        L = group_log(group, R[iu], check_chart=True)
    except ChartViolationError:
        return float("inf")
    return float(group.norm(L).max()) if N > 1 else 0.0


def compat_residual(group: GroupDescriptor, state: LogState) -> float:
    """``max |Y_ik - Y_ij - Y_jk - a(Y_ij, Y_jk)|`` over all triples.

    Zero for log states that come from an ensemble.
    """
    Y = state.Y
    N = Y.shape[0]
    if N < 3:
        return 0.0
    i, j, k = np.meshgrid(np.arange(N), np.arange(N), np.arange(N), indexing="ij")
    keep = (i != j) & (j != k) & (i != k)
    i, j, k = i[keep], j[keep], k[keep]
    a = bch_remainder(group, Y[i, j], Y[j, k])
    res = Y[i, k] - Y[i, j] - Y[j, k] - a
    return float(group.norm(res).max())


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float
    intercept: float
    n: int


def fit_decay_rate(t, values, window: tuple[float, float] | None = None,
                   min_samples: int = 10) -> DecayFit:
    """Least-squares fit of ``log(value) = c - rate * t``.

    ``rate`` is reported as a positive decay constant.

    Raises
    ------
    FitError
        If a value in the window is not positive, or fewer than
        ``min_samples`` samples fall inside it.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, v = t[sel], v[sel]
    if t.size < min_samples:
        raise FitError(f"need at least {min_samples} samples, got {t.size}")
    if not np.all(v > 0) or not np.all(np.isfinite(v)):
        raise FitError("series has non-positive values: decay stopped or hit the floating-point floor")
    y = np.log(v)
    if np.ptp(y) == 0:
        return DecayFit(0.0, 1.0, float(y[0]), int(t.size))
    slope, intercept = np.polyfit(t, y, 1)
    pred = slope * t + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return DecayFit(float(-slope) + 0.0, r2, float(intercept), int(t.size))


def lock_residual(spec: ModelSpec, state) -> float:
    """Largest ratio velocity ``max_{i,j} |d/dt(X_i X_j^{-1}) (X_i X_j^{-1})^{-1}|``.

    Zero exactly on phase-locked states.
    """
    X = state.elements if isinstance(state, EnsembleState) else np.asarray(state, dtype=complex)
    V = rhs_ratio(spec, ratios(X))
    return float(spec.group.norm(V).max())


def left_velocities(spec: ModelSpec, state) -> np.ndarray:
    """Left-trivialized velocities ``X_i^{-1} X_i' = Ad_{X_i^{-1}} xi_i``."""
    X = state.elements if isinstance(state, EnsembleState) else np.asarray(state, dtype=complex)
    xi = rhs_group(spec, X)
    return spec.group.project(np.linalg.inv(X) @ xi @ X)


def normalized_speed_mismatch(spec: ModelSpec, state, M) -> float:
    """``max_i |Ad_{X_i^{-1}} xi_i - M|``."""
    W = left_velocities(spec, state)
    return float(spec.group.norm(W - np.asarray(M, dtype=complex)).max())


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One row of the diagnostics table.

    ``y_inf`` and ``compat_residual`` are ``nan`` when a ratio leaves the
    chart; ``diameter`` is then ``inf``.
    """

    t: float
    diameter: float
    y_inf: float
    lock_residual: float
    speed_mismatch: float
    compat_residual: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in self.columns())


def diagnostics(spec: ModelSpec, traj: Trajectory, M=None) -> list[DiagnosticsRecord]:
    """Diagnostics at every recorded state.

    ``M`` is the reference normalized speed.  By default the mean of the
    left-trivialized velocities at each sample is used.
    """
    group = spec.group
    out = []
    for k in range(len(traj)):
        st = traj.state(k)
        try:
            ls = log_state(group, st)
            y_inf = lyapunov_y_inf(ls, group)
            diam = y_inf
            compat = compat_residual(group, ls)
        except ChartViolationError:
            y_inf, compat = float("nan"), float("nan")
            diam = diameter(group, st.elements)
        W = left_velocities(spec, st)
        Mk = W.mean(axis=0) if M is None else np.asarray(M, dtype=complex)
        speed = float(group.norm(W - Mk).max())
        out.append(DiagnosticsRecord(st.t, diam, y_inf, lock_residual(spec, st), speed, compat))
    return out


def difference_quotients(t, values) -> tuple[np.ndarray, np.ndarray]:
    """Forward difference quotients ``(v_{k+1} - v_k) / (t_{k+1} - t_k)`` at ``t_k``."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    return t[:-1], np.diff(v) / np.diff(t)


def gronwall_excess(t, values, rate: float, forcing: float = 0.0) -> np.ndarray:
    """Per-sample ``eps_k`` in ``D+ v <= -rate*v + eps_k*v + forcing``.

    A first-Gronwall inequality holds with ``eps`` when ``eps_k <= eps`` for all
    samples; the returned values are ``(D+ v_k + rate*v_k - forcing) / v_k``.
    """
    tk, dq = difference_quotients(t, values)
    v = np.asarray(values, dtype=float)[:-1]
    return (dq + rate * v - forcing) / v


@dataclass(frozen=True)
class CauchyReport:
    converged: bool
    increments: np.ndarray
    rate: float
    tail_bound: float


def cauchy_test(t, series, distance: Callable, min_rate: float = 0.0) -> CauchyReport:
    """Cauchy-convergence check of a sampled series.

    ``distance(a, b)`` measures consecutive increments.  The series is deemed
    convergent when the increments decay exponentially at a positive rate;
    ``tail_bound`` is the geometric-series bound on the distance from the
    last sample to the limit.
    """
    t = np.asarray(t, dtype=float)
    inc = np.array([distance(series[k], series[k + 1]) for k in range(len(series) - 1)])
    positive = inc > 0
    if positive.sum() < 3:
        return CauchyReport(bool(np.all(inc == 0)), inc, float("inf"), 0.0)
    fit = fit_decay_rate(t[:-1][positive], inc[positive], min_samples=3)
    dt = float(np.mean(np.diff(t)))
    q = np.exp(-fit.rate * dt)
    tail = float(inc[-1] * q / (1 - q)) if q < 1 else float("inf")
    return CauchyReport(bool(fit.rate > min_rate), inc, fit.rate, tail)


def calibrate_basin(holds: Callable[[float], bool], lo: float, hi: float,
                    iterations: int = 20) -> float:
    """Bisection for the largest radius in ``[lo, hi]`` at which ``holds`` is true.

    ``holds(radius)`` typically integrates from initial data of that diameter
    and checks global existence on ``[0, 50/(kappa*lambda)]``.  ``holds(lo)``
    must be true.
    """
    if not holds(lo):
        raise ValueError("the property fails at the lower end of the bracket")
    if holds(hi):
        return hi
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return lo


def calibrate_coupling(holds: Callable[[float], bool], kappa0: float,
                       max_doublings: int = 2) -> tuple[float | None, list[float]]:
    """Double ``kappa`` until ``holds(kappa)`` or the doubling budget runs out.

    Returns the first passing coupling (``None`` when none passed) and the
    list of couplings tried.
    """
    tried = []
    kappa = float(kappa0)
    for _ in range(max_doublings + 1):
        tried.append(kappa)
        if holds(kappa):
            return kappa, tried
        kappa *= 2
    return None, tried


def y_inf_series(group: GroupDescriptor, traj: Trajectory) -> np.ndarray:
    """``||Y||_inf`` at each recorded state (``nan`` outside the chart)."""
    out = np.empty(len(traj))
    for k in range(len(traj)):
        try:
            out[k] = lyapunov_y_inf(log_state(group, traj.state(k)), group)
        except ChartViolationError:
            out[k] = np.nan
    return out


def lyapunov_diff_series(group: GroupDescriptor, a: Trajectory, b: Trajectory) -> np.ndarray:
    """``||Y - Y~||_inf`` along two trajectories recorded at the same times."""
    if len(a) != len(b) or not np.allclose(a.times, b.times):
        raise ValueError("trajectories are not sampled at the same times")
    return np.array([
        lyapunov_diff(log_state(group, a.state(k)), log_state(group, b.state(k)), group)
        for k in range(len(a))
    ])
