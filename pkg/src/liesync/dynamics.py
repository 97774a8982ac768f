"""Right-hand sides and integrators for the generalized Kuramoto-Lohe model.

Three coordinate systems are supported:

* group coordinates, ``X_i' = xi_i X_i`` with the right-trivialized velocity
  ``xi_i = H_i + (kappa/N) sum_j phi(X_j X_i^{-1})``;
* ratio coordinates ``R_ij = X_i X_j^{-1}``;
* logarithm coordinates ``Y_ij = log(X_i X_j^{-1})``.

Group-coordinate integration uses Lie-Euler or a fourth-order
Runge-Kutta-Munthe-Kaas scheme, so the iterates stay on the group up to
round-off.  Logarithm coordinates are integrated with classical RK4.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .groups import (
    ConfigurationError,
    GroupCatalogEntry,
    repair_membership,
    validate_membership,
)
from .interactions import (
    AdaptedMetric,
    InteractionFunction,
    build_adapted_metric,
    jacobian_at_identity,
)
from .lie_core import (
    ChartViolationError,
    GroupDescriptor,
    LieError,
    commutator,
    dexp_inv_left,
    group_exp,
    group_log,
)

__all__ = [
    "ModelSpec",
    "EnsembleState",
    "LogState",
    "Scheme",
    "ChartPolicy",
    "IntegratorConfig",
    "Event",
    "Trajectory",
    "LogTrajectory",
    "RHSError",
    "IntegrationError",
    "ratios",
    "rhs_group",
    "rhs_ratio",
    "rhs_log",
    "step",
    "integrate",
    "integrate_log",
    "detect_blowup",
    "splitting_transform",
    "default_dt",
]


class RHSError(RuntimeError):
    def __init__(self, message, pairs=None):
        super().__init__(message)
        self.pairs = pairs


class IntegrationError(RuntimeError):
    pass


def _inv(X):
    if X.shape[-1] == 1:
        return 1.0 / X
    return np.linalg.inv(X)


# --------------------------------------------------------------------------
# data types
# --------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Parameters of the model on one group.

    ``group`` carries the inner product used for every norm and distance; by
    default :meth:`build` installs the adapted metric ``P`` of ``phi``.
    """

    group: GroupDescriptor
    kappa: float
    hamiltonians: np.ndarray
    phi: InteractionFunction
    metric: AdaptedMetric
    compensated: bool = False

    @property
    def N(self) -> int:
        return self.hamiltonians.shape[0]

    @property
    def h_inf(self) -> float:
        """``||H||_inf = max_i |H_i|`` in the model metric."""
        return float(np.max(self.group.norm(self.hamiltonians)))

    @property
    def rate(self) -> float:
        """``kappa * lambda``: the linear contraction rate of ratios."""
        return self.kappa * self.metric.lam

    @classmethod
    def build(cls, group, kappa, hamiltonians, phi: InteractionFunction,
              metric: AdaptedMetric | None = None, adapted: bool = True,
              compensated: bool = False) -> "ModelSpec":
        """Validate inputs and assemble a spec.

        ``hamiltonians`` is an ``(N, d, d)`` stack of algebra elements.  With
        ``adapted=False`` the raw Frobenius metric is kept on the descriptor.
        """
        group = group.descriptor if isinstance(group, GroupCatalogEntry) else group
        if not phi.supports(group):
            raise ConfigurationError(f"{phi.id} is not defined on {group.family}")
        H = np.asarray(hamiltonians, dtype=complex)
        d = group.matrix_size
        if H.ndim != 3 or H.shape[1:] != (d, d):
            raise ConfigurationError(f"hamiltonians must have shape (N, {d}, {d}), got {H.shape}")
        if H.shape[0] < 2:
            raise ConfigurationError("need at least two particles")
        if not kappa >= 0:
            raise ConfigurationError("coupling strength must be non-negative")
        resid = group.projection_residual(H)
        if np.any(resid > 1e-10 * np.maximum(1.0, np.linalg.norm(H, axis=(-2, -1)))):
            raise ConfigurationError("hamiltonians are not in the Lie algebra")
        if metric is None:
            metric = build_adapted_metric(jacobian_at_identity(phi, group))
        if adapted:
            group = group.with_inner_product(metric.P)
        return cls(group, float(kappa), group.project(H), phi, metric, compensated)

    def with_kappa(self, kappa: float) -> "ModelSpec":
        return replace(self, kappa=float(kappa))

    def with_hamiltonians(self, H) -> "ModelSpec":
        return replace(self, hamiltonians=self.group.project(np.asarray(H, dtype=complex)))


@dataclass(frozen=True, eq=False)
class EnsembleState:
    t: float
    elements: np.ndarray

    @property
    def N(self) -> int:
        return self.elements.shape[0]


@dataclass(frozen=True, eq=False)
class LogState:
    """Pairwise logarithms ``Y_ij = log(X_i X_j^{-1})``.

    The strict upper triangle is authoritative: on construction the lower
    triangle is overwritten with its exact negation and the diagonal zeroed.
    """

    t: float
    Y: np.ndarray

    def __post_init__(self):
        Y = np.array(self.Y, dtype=complex)
        N = Y.shape[0]
        iu = np.triu_indices(N, 1)
        Y[iu[1], iu[0]] = -Y[iu]
        Y[np.arange(N), np.arange(N)] = 0.0
        object.__setattr__(self, "Y", Y)

    @property
    def N(self) -> int:
        return self.Y.shape[0]

    @classmethod
    def from_ensemble(cls, group: GroupDescriptor, state: EnsembleState,
                      check_chart: bool = True) -> "LogState":
        R = ratios(state.elements)
        N = state.N
        iu = np.triu_indices(N, 1)
        Y = np.zeros_like(R)
        try:
            Y[iu] = group_log(group, R[iu], check_chart=check_chart)
        except ChartViolationError as exc:
            flat = [int(np.ravel(w)[0]) for w in (exc.where or [])]
            pairs = [(int(iu[0][k]), int(iu[1][k])) for k in flat]
            raise ChartViolationError(f"ratio outside chart for pairs {pairs}", where=pairs) from exc
        return cls(state.t, Y)


class Scheme(str, enum.Enum):
    LIE_EULER = "lie_euler"
    RKMK4 = "rkmk4"


class ChartPolicy(str, enum.Enum):
    ABORT = "abort"
    RENORMALIZE = "renormalize"


def default_dt(kappa: float) -> float:
    """``1e-3 * min(1, 1/kappa)``: resolves the O(kappa) contraction."""
    return 1e-3 * min(1.0, 1.0 / kappa) if kappa > 0 else 1e-3


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integration settings.

    ``norm_ceiling``/``cond_ceiling`` and ``growth_factor`` configure blowup
    detection: an event fires when a norm or condition number exceeds its
    ceiling or when the condition number grows by more than
    ``growth_factor`` in a single step.
    """

    dt: float
    t_final: float
    scheme: Scheme = Scheme.RKMK4
    stride: int = 1
    drift_tolerance: float = 1e-8
    chart_policy: ChartPolicy = ChartPolicy.ABORT
    norm_ceiling: float = 1e8
    cond_ceiling: float = 1e8
    growth_factor: float = 4.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if not self.t_final >= 0:
            raise ConfigurationError("t_final must be non-negative")
        if self.stride < 1:
            raise ConfigurationError("stride must be >= 1")
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "chart_policy", ChartPolicy(self.chart_policy))

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_final / self.dt - 1e-9))


@dataclass(frozen=True)
class Event:
    """Early termination record.

    ``kind`` is ``"blowup"`` or ``"chart"``; ``t_last_valid`` is the time of
    the last state that passed the checks and ``t_detected`` the time of the
    step that triggered the event.
    """

    kind: str
    t_last_valid: float
    t_detected: float
    reason: str


@dataclass(eq=False)
class Trajectory:
    group: GroupDescriptor
    times: np.ndarray
    states: np.ndarray
    membership: np.ndarray
    event: Event | None = None

    def __len__(self):
        return len(self.times)

    def state(self, k: int) -> EnsembleState:
        return EnsembleState(float(self.times[k]), self.states[k])

    @property
    def final(self) -> EnsembleState:
        return self.state(-1)


@dataclass(eq=False)
class LogTrajectory:
    times: np.ndarray
    Y: np.ndarray
    event: Event | None = None

    def state(self, k: int) -> LogState:
        return LogState(float(self.times[k]), self.Y[k])

    @property
    def final(self) -> LogState:
        return self.state(-1)


# --------------------------------------------------------------------------
# right-hand sides
# --------------------------------------------------------------------------
def ratios(X) -> np.ndarray:
    """``R[i, j] = X_i X_j^{-1}`` for an ``(N, d, d)`` stack."""
    X = np.asarray(X, dtype=complex)
    if X.shape[-1] == 1:
        return X[:, None] / X[None, :]
    return np.einsum("iab,jbc->ijac", X, _inv(X))


def _sum_over_first(F: np.ndarray, compensated: bool) -> np.ndarray:
    """Sum over axis 0 in ascending index order (optionally Neumaier)."""
    if not compensated:
        # cumsum accumulates sequentially, unlike the pairwise np.sum
        return np.cumsum(F, axis=0)[-1]
    total = F[0].copy()
    c = np.zeros_like(total)
    for k in range(1, F.shape[0]):
        x = F[k]
        t = total + x
        big = np.abs(total.real) >= np.abs(x.real)
        c.real += np.where(big, (total.real - t.real) + x.real, (x.real - t.real) + total.real)
        big = np.abs(total.imag) >= np.abs(x.imag)
        c.imag += np.where(big, (total.imag - t.imag) + x.imag, (x.imag - t.imag) + total.imag)
        total = t
    return total + c


def _phi_checked(spec: ModelSpec, R: np.ndarray) -> np.ndarray:
    try:
        F = spec.phi.evaluate(spec.group, R)
    except Exception as exc:
        raise RHSError(f"interaction {spec.phi.id} failed: {exc}") from exc
    if np.isfinite(F).all():
        return F
    bad = ~np.all(np.isfinite(F), axis=(-2, -1))
    if np.any(bad):
        pairs = [tuple(int(a) for a in p) for p in np.argwhere(bad)]
        raise RHSError(f"interaction {spec.phi.id} non-finite at index pairs {pairs[:5]}", pairs)
    return F


def _interaction_field(spec: ModelSpec, R_to: np.ndarray) -> np.ndarray:
    """``F_i = H_i + (kappa/N) sum_k phi(R_to[k, i])``."""
    F = _phi_checked(spec, R_to)
    return spec.hamiltonians + (spec.kappa / spec.N) * _sum_over_first(F, spec.compensated)


def rhs_group(spec: ModelSpec, state) -> np.ndarray:
    """Right-trivialized velocities ``xi_i`` with ``X_i' = xi_i X_i``."""
    X = state.elements if isinstance(state, EnsembleState) else np.asarray(state, dtype=complex)
    # R[k, i] = X_k X_i^{-1}
    return _interaction_field(spec, ratios(X))


def rhs_ratio(spec: ModelSpec, R) -> np.ndarray:
    """Right-trivialized velocity of ``R_ij = X_i X_j^{-1}``.

    ``d/dt R_ij = V_ij R_ij`` with
    ``V_ij = F_i - Ad_{R_ij} F_j`` and ``F_i = H_i + (kappa/N) sum_k phi(R_ki)``.
    """
    R = np.asarray(R, dtype=complex)
    F = _interaction_field(spec, R)
    conj = R @ F[None, :] @ _inv(R)
    return spec.group.project(F[:, None] - conj)


def rhs_log(spec: ModelSpec, state: LogState) -> np.ndarray:
    """``dY/dt`` in logarithm coordinates (antisymmetric ``(N, N, d, d)`` array).

    ``Y_ij' = psi(ad_Y) F_i - psi~(ad_Y) F_j`` with
    ``F_i = H_i + (kappa/N) sum_k phi(exp Y_ki)``, ``psi(z) = z/(e^z - 1)`` and
    ``psi~(z) = z/(1 - e^{-z})``.
    """
    group = spec.group
    Y = state.Y
    N = Y.shape[0]
    iu = np.triu_indices(N, 1)
    nrm = group.norm(Y[iu])
    if np.any(nrm >= group.chart_radius):
        k = int(np.argmax(nrm))
        pair = (int(iu[0][k]), int(iu[1][k]))
        raise ChartViolationError(
            f"Y{pair} has norm {nrm[k]:.4g} >= chart radius {group.chart_radius:.4g}", where=[pair])
    E = group_exp(group, Y)
    F = _interaction_field(spec, E)
    Yp = Y[iu]
    Fi = np.broadcast_to(F[iu[0]], Yp.shape)
    Fj = np.broadcast_to(F[iu[1]], Yp.shape)
    dY = np.zeros_like(Y)
    dY[iu] = dexp_inv_left(group, Yp, Fi) - dexp_inv_left(group, -Yp, Fj)
    dY[iu[1], iu[0]] = -dY[iu]
    return dY


# --------------------------------------------------------------------------
# steppers
# --------------------------------------------------------------------------
def _dexpinv4(u, v):
    # dexp^{-1}_u(v) truncated after [u,[u,v]]; enough for order 4
    c = commutator(u, v)
    return v - 0.5 * c + commutator(u, c) / 12.0


def _advance(spec: ModelSpec, X: np.ndarray, dt: float, scheme: Scheme) -> np.ndarray:
    group = spec.group
    if scheme is Scheme.LIE_EULER:
        return group_exp(group, dt * rhs_group(spec, X)) @ X
    abelian = group.is_abelian
    k1 = dt * rhs_group(spec, X)
    if abelian:
        k2 = dt * rhs_group(spec, group_exp(group, 0.5 * k1) @ X)
        k3 = dt * rhs_group(spec, group_exp(group, 0.5 * k2) @ X)
        k4 = dt * rhs_group(spec, group_exp(group, k3) @ X)
    else:
        k2 = dt * _dexpinv4(0.5 * k1, rhs_group(spec, group_exp(group, 0.5 * k1) @ X))
        k3 = dt * _dexpinv4(0.5 * k2, rhs_group(spec, group_exp(group, 0.5 * k2) @ X))
        k4 = dt * _dexpinv4(k3, rhs_group(spec, group_exp(group, k3) @ X))
    theta = (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    return group_exp(group, theta) @ X


def step(spec: ModelSpec, state: EnsembleState, config: IntegratorConfig,
         dt: float | None = None) -> EnsembleState:
    """Advance one step of ``config.scheme`` (optionally with a custom ``dt``)."""
    h = config.dt if dt is None else dt
    X = _advance(spec, state.elements, h, config.scheme)
    return EnsembleState(state.t + h, X)


def _condition(X):
    """Frobenius norms of ``X_i`` and ``X_i^{-1}`` (``None`` when singular)."""
    if not np.isfinite(X).all():
        return None
    try:
        with np.errstate(all="ignore"):
            Xi = _inv(X)
    except np.linalg.LinAlgError:
        return None
    if X.shape[-1] == 1:
        nX, nXi = np.abs(X[:, 0, 0]), np.abs(Xi[:, 0, 0])
    else:
        nX, nXi = np.linalg.norm(X, axis=(-2, -1)), np.linalg.norm(Xi, axis=(-2, -1))
    if not (np.isfinite(nX).all() and np.isfinite(nXi).all()):
        return None
    return nX, nXi


def _check_monitor(mon, prev_mon, t_prev, t, config):
    norm_ceiling = config.norm_ceiling if config else 1e8
    cond_ceiling = config.cond_ceiling if config else 1e8
    growth = config.growth_factor if config else 4.0
    if mon is None:
        return Event("blowup", t_prev, t, "non-finite or singular element")
    nX, nXi = mon
    top = max(nX.max(), nXi.max())
    if top > norm_ceiling:
        return Event("blowup", t_prev, t, f"norm {top:.3g} above ceiling")
    cond = nX * nXi
    if cond.max() > cond_ceiling:
        return Event("blowup", t_prev, t, f"condition number {cond.max():.3g} above ceiling")
    if prev_mon is not None:
        ratio = np.max(cond / (prev_mon[0] * prev_mon[1]))
        if ratio > growth:
            return Event("blowup", t_prev, t, f"condition number grew x{ratio:.3g} in one step")
    return None


def detect_blowup(state: EnsembleState, previous: EnsembleState | None = None,
                  config: IntegratorConfig | None = None) -> Event | None:
    """Blowup check for one step.

    Fires when an entry is non-finite or an element is singular, when any
    ``||X_i||_F`` or ``||X_i^{-1}||_F`` exceeds ``norm_ceiling``, when the
    Frobenius condition number ``||X_i||_F ||X_i^{-1}||_F`` exceeds
    ``cond_ceiling``, or when it grew by more than ``growth_factor`` since
    ``previous``.  The event carries the time of ``previous`` as last valid.
    """
    t_prev = previous.t if previous is not None else state.t
    prev = _condition(previous.elements) if previous is not None else None
    return _check_monitor(_condition(state.elements), prev, t_prev, state.t, config)


def integrate(spec: ModelSpec, initial: EnsembleState, config: IntegratorConfig) -> Trajectory:
    """Fixed-step integration to ``config.t_final``.

    States are recorded every ``config.stride`` steps and at the final time.
    Integration stops early with an :class:`Event` when blowup is detected.

    Raises
    ------
    IntegrationError
        If membership drift exceeds ``drift_tolerance`` under the abort policy.
    """
    group = spec.group
    X = np.asarray(initial.elements, dtype=complex)
    if X.shape != (spec.N, group.matrix_size, group.matrix_size):
        raise ConfigurationError(f"initial state has shape {X.shape}, expected N={spec.N}")
    state = EnsembleState(float(initial.t), X)
    times, states, drift = [state.t], [X], [float(np.max(validate_membership(group, X)))]
    n = config.n_steps
    t0 = state.t
    event = None
    prev_mon = _condition(X)
    for k in range(1, n + 1):
        t_next = t0 + min(k * config.dt, config.t_final)
        try:
            with np.errstate(all="ignore"):
                new = step(spec, state, config, dt=t_next - state.t)
        except (np.linalg.LinAlgError, RHSError, LieError) as exc:
            # a stage left the group (singular or non-finite): blowup inside the step
            event = Event("blowup", state.t, t_next, f"step failed: {exc}")
            break
        new = EnsembleState(t_next, new.elements)
        mon = _condition(new.elements)
        event = _check_monitor(mon, prev_mon, state.t, t_next, config)
        if event is not None:
            break
        prev_mon = mon
        res = validate_membership(group, new.elements)
        if np.max(res) > config.drift_tolerance:
            if config.chart_policy is ChartPolicy.ABORT:
                raise IntegrationError(
                    f"membership drift {np.max(res):.3g} > {config.drift_tolerance:.3g} at t={t_next:.6g}")
            new = EnsembleState(t_next, repair_membership(group, new.elements))
            res = validate_membership(group, new.elements)
        state = new
        if k % config.stride == 0 or k == n:
            times.append(state.t)
            states.append(state.elements)
            drift.append(float(np.max(res)))
    if event is not None and times[-1] != state.t:
        times.append(state.t)
        states.append(state.elements)
        drift.append(float(np.max(validate_membership(group, state.elements))))
    return Trajectory(group, np.array(times), np.array(states), np.array(drift), event)


def _log_rk4(spec: ModelSpec, Y: np.ndarray, t: float, h: float) -> np.ndarray:
    f = lambda Z: rhs_log(spec, LogState(t, Z))
    k1 = f(Y)
    k2 = f(Y + 0.5 * h * k1)
    k3 = f(Y + 0.5 * h * k2)
    k4 = f(Y + h * k3)
    return Y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _recompatibilize(group: GroupDescriptor, Y: np.ndarray) -> np.ndarray:
    # rebuild every Y_ij from the first column through the group
    X = group_exp(group, Y[:, 0])
    return LogState.from_ensemble(group, EnsembleState(0.0, X), check_chart=False).Y


def integrate_log(spec: ModelSpec, initial: LogState, config: IntegratorConfig) -> LogTrajectory:
    """Classical RK4 on the logarithm system.

    A chart violation ends the run with an ``Event(kind="chart")`` under the
    abort policy; under ``renormalize`` the compatibility relations are
    restored from the first column after every step.
    """
    group = spec.group
    Y = initial.Y.copy()
    t = float(initial.t)
    times, Ys = [t], [Y]
    n = config.n_steps
    event = None
    for k in range(1, n + 1):
        t_next = initial.t + min(k * config.dt, config.t_final)
        try:
            Y_new = _log_rk4(spec, Y, t, t_next - t)
        except ChartViolationError as exc:
            event = Event("chart", t, t_next, str(exc))
            break
        if config.chart_policy is ChartPolicy.RENORMALIZE:
            Y_new = _recompatibilize(group, Y_new)
        Y, t = LogState(t_next, Y_new).Y, t_next
        if k % config.stride == 0 or k == n:
            times.append(t)
            Ys.append(Y)
    return LogTrajectory(np.array(times), np.array(Ys), event)


def splitting_transform(group: GroupDescriptor, H, traj: Trajectory) -> Trajectory:
    """Left-translate a trajectory by ``exp(-H t)``."""
    E = group_exp(group, -traj.times[:, None, None] * np.asarray(H, dtype=complex)[None])
    states = np.einsum("tab,tibc->tiac", E, traj.states)
    return Trajectory(traj.group, traj.times.copy(), states, traj.membership.copy(), traj.event)
