"""Fixed-step integration of order-parameter ODEs and plateau detection."""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..utils.errors import ConfigError, IntegrationDivergedError, NumericalError
from ..utils.order_parameters import STATE_FIELDS, OrderParameterState
from .lvq_dynamics import lvq_observables, lvq_ode_rhs, schedule_to_dict
from .scm_dynamics import scm_observables, scm_ode_rhs

logger = logging.getLogger(__name__)

METHODS = ("rk4",)

# Node positions closer than this are merged.
_NODE_TOLERANCE = 1e-12
_PROGRESS_EVERY = 10000


@dataclass(frozen=True)
class IntegratorSettings:
    """Fixed-step integrator configuration.

    ``step`` is the maximal RK4 step, ``stride`` the sampling interval of the
    trajectory (both in units of the ODE time), ``gram_tolerance`` the accepted
    Gram violation of intermediate states.
    """

    method: str = "rk4"
    step: float = 0.01
    stride: float = 0.01
    gram_tolerance: float = 1e-6

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"Unknown integration method '{self.method}' (valid: {', '.join(METHODS)})")
        if not (self.step > 0.0 and math.isfinite(self.step)):
            raise ConfigError(f"Integration step must be positive, got {self.step}")
        if not (self.stride > 0.0 and math.isfinite(self.stride)):
            raise ConfigError(f"Sampling stride must be positive, got {self.stride}")
        if not self.gram_tolerance >= 0.0:
            raise ConfigError("gram_tolerance must be non-negative")


@dataclass
class Trajectory:
    """Sampled solution: times, states and per-sample observables."""

    times: np.ndarray
    states: list
    observables: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.states)

    @property
    def final_state(self):
        return self.states[-1]

    def state_array(self):
        """``(n_samples, 7)`` array in ``STATE_FIELDS`` order."""
        if not self.states:
            return np.empty((0, len(STATE_FIELDS)))
        return np.vstack([s.as_array() for s in self.states])

    def column(self, name):
        if name == "time":
            return self.times
        if name in STATE_FIELDS:
            return self.state_array()[:, STATE_FIELDS.index(name)]
        return self.observables[name]

    def extend(self, other):
        """Append a continuation whose first sample repeats this trajectory's last one."""
        self.times = np.concatenate([self.times, other.times[1:]])
        self.states.extend(other.states[1:])
        for key, values in other.observables.items():
            self.observables[key] = np.concatenate([self.observables[key], values[1:]])
        return self


@dataclass(frozen=True)
class PlateauOutcome:
    """Result of :func:`plateau_bounds`.

    ``status`` is ``plateau``, ``no_plateau`` (the band is never entered) or
    ``no_escape`` (the specialization threshold is never reached).
    """

    status: str
    t0: float | None = None
    t_p: float | None = None

    @property
    def length(self):
        if self.status != "plateau":
            return None
        return self.t_p - self.t0


# ------------------------------------------------------------------
# Public API
# ------------------------------------------------------------------


def integrate(rhs, init, t_end, settings, observe=None, t_start=0.0, breakpoints=(), meta=None):
    """Integrate ``dy/dt = rhs(state, t)`` from ``t_start`` to ``t_end``.

    Parameters
    ----------
    rhs : callable
        ``rhs(state, t)`` returning the length-7 derivative in ``STATE_FIELDS`` order.
    init : OrderParameterState
    t_end : float
    settings : IntegratorSettings
    observe : callable or None
        ``observe(state, t)`` returning a dict of observables for each sample.
    breakpoints : iterable of float
        Times where the right-hand side is not smooth; nodes are placed exactly there
        and stage times never cross them.
    meta : dict or None
        Descriptor stored with the trajectory.

    Returns
    -------
    Trajectory
        Samples at ``t_start + k * stride`` and at ``t_end``.

    Raises
    ------
    IntegrationDivergedError
        If a state leaves the admissible set; the partial trajectory is attached.
    """
    if not t_end > t_start:
        raise ConfigError(f"t_end must exceed the start time {t_start}, got {t_end}")
    init.check()

    sample_times = _sample_times(t_start, t_end, settings.stride)
    inner_breaks = [b for b in breakpoints if t_start < b < t_end]
    nodes = _merge_nodes(np.concatenate([sample_times, inner_breaks]))
    is_sample = _matches(nodes, sample_times)

    trajectory = Trajectory(times=np.empty(0), states=[], observables={}, meta=dict(meta or {}))
    times = []

    def record(y, t):
        state = OrderParameterState.from_array(y)
        times.append(t)
        trajectory.states.append(state)
        if observe is not None:
            for key, value in observe(state, t).items():
                trajectory.observables.setdefault(key, []).append(value)

    def diverged(message, exc=None):
        _finalize(trajectory, times)
        error = IntegrationDivergedError(message, trajectory)
        if exc is not None:
            raise error from exc
        raise error

    y = init.as_array()
    record(y, float(nodes[0]))
    n_steps = 0
    for a, b, sampled in zip(nodes[:-1], nodes[1:], is_sample[1:]):
        n_sub = max(1, math.ceil((b - a) / settings.step - 1e-9))
        h = (b - a) / n_sub
        lo, hi = np.nextafter(a, b), np.nextafter(b, a)
        for k in range(n_sub):
            t = a + k * h
            try:
                y = _rk4_step(rhs, y, t, h, lo, hi)
            except NumericalError as exc:
                diverged(f"Right-hand side failed at t={t:.6g}: {exc}", exc)
            n_steps += 1
            if n_steps % _PROGRESS_EVERY == 0:
                logger.debug("Integrated %d steps, t=%.4f", n_steps, t + h)
            violation = _violation(y)
            if violation > settings.gram_tolerance:
                diverged(f"State left the admissible set at t={t + h:.6g} (violation {violation:.3e})")
        if sampled:
            record(y, float(b))

    _finalize(trajectory, times)
    logger.debug("Integration finished: %d steps, %d samples", n_steps, len(trajectory))
    return trajectory


def plateau_bounds(traj, eps_plateau, s_final, band=1e-4, fraction=0.2):
    """Locate the plateau ``[t0, t_p]`` of a trajectory with ``eps_g`` and ``S1``/``S2`` observables.

    ``t0`` is the first time ``eps_g`` is inside ``eps_plateau +- band``; ``t_p`` the first
    later time at which every ``S_i`` reaches ``fraction * s_final[i]``.  Crossing times
    are interpolated linearly between samples.
    """
    times = traj.times
    eps = np.asarray(traj.observables["eps_g"])
    distance = np.abs(eps - eps_plateau) - band
    inside = np.flatnonzero(distance < 0.0)
    if inside.size == 0:
        return PlateauOutcome(status="no_plateau")
    k0 = int(inside[0])
    t0 = float(times[0]) if k0 == 0 else _crossing(times, distance, k0)

    thresholds = fraction * np.asarray(s_final, dtype=float)
    if np.any(thresholds <= 0.0):
        return PlateauOutcome(status="no_escape", t0=t0)
    spec = np.column_stack([traj.observables["S1"], traj.observables["S2"]])
    margin = np.min(spec - thresholds, axis=1)
    escaped = np.flatnonzero(margin[k0:] >= 0.0)
    if escaped.size == 0:
        return PlateauOutcome(status="no_escape", t0=t0)
    kp = k0 + int(escaped[0])
    t_p = float(times[kp]) if kp == 0 or margin[kp - 1] >= 0.0 else _crossing(times, -margin, kp)
    return PlateauOutcome(status="plateau", t0=t0, t_p=max(t_p, t0))


def integrate_lvq(model, init, t_end, settings):
    """LVQ1 learning curve with class-wise and drift-aware errors."""
    meta = {"system": "lvq", "model": _model_meta(model), "integrator": asdict(settings)}
    return integrate(
        lambda state, t: lvq_ode_rhs(state, t, model),
        init,
        t_end,
        settings,
        observe=lambda state, t: lvq_observables(state, t, model),
        breakpoints=model.schedule.discontinuities(),
        meta=meta,
    )


def integrate_scm(model, init, t_end, settings, t_start=0.0):
    """SCM learning curve in rescaled time with ``eps_g`` and specializations."""
    meta = {"system": "scm", "model": asdict(model), "integrator": asdict(settings)}
    return integrate(
        lambda state, t: scm_ode_rhs(state, model),
        init,
        t_end,
        settings,
        observe=lambda state, t: scm_observables(state, model),
        t_start=t_start,
        meta=meta,
    )


# ------------------------------------------------------------------
# Internal helpers
# ------------------------------------------------------------------


def _rk4_step(rhs, y, t, h, lo, hi):
    """Classical RK4 step; stage times are kept inside the open segment ``(lo, hi)``."""

    def f(yy, tt):
        return np.asarray(rhs(OrderParameterState.from_array(yy), min(max(tt, lo), hi)), dtype=float)

    k1 = f(y, t)
    k2 = f(y + 0.5 * h * k1, t + 0.5 * h)
    k3 = f(y + 0.5 * h * k2, t + 0.5 * h)
    k4 = f(y + h * k3, t + h)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _violation(y):
    if not np.all(np.isfinite(y)):
        return math.inf
    q11, q12, q22 = y[4], y[5], y[6]
    return max(0.0, -q11, -q22, q12 * q12 - q11 * q22)


def _sample_times(t_start, t_end, stride):
    count = int(math.floor((t_end - t_start) / stride + 1e-9))
    times = t_start + stride * np.arange(count + 1)
    if t_end - times[-1] > _NODE_TOLERANCE * max(1.0, abs(t_end)):
        times = np.append(times, t_end)
    else:
        times[-1] = t_end
    return times


def _merge_nodes(values):
    values = np.sort(np.asarray(values, dtype=float))
    keep = np.concatenate([[True], np.diff(values) > _NODE_TOLERANCE * np.maximum(1.0, np.abs(values[1:]))])
    return values[keep]


def _matches(nodes, targets):
    """Mask of ``nodes`` that coincide with an entry of the sorted ``targets``."""
    idx = np.searchsorted(targets, nodes)
    left = np.abs(nodes - targets[np.clip(idx - 1, 0, len(targets) - 1)])
    right = np.abs(nodes - targets[np.clip(idx, 0, len(targets) - 1)])
    return np.minimum(left, right) <= _NODE_TOLERANCE * np.maximum(1.0, np.abs(nodes))


def _crossing(times, signed, k):
    """Linear interpolation of the zero of ``signed`` between samples ``k-1`` (>= 0) and ``k`` (< 0)."""
    before, after = signed[k - 1], signed[k]
    if before == after:
        return float(times[k])
    frac = before / (before - after)
    return float(times[k - 1] + frac * (times[k] - times[k - 1]))


def _finalize(trajectory, times):
    trajectory.times = np.asarray(times, dtype=float)
    trajectory.observables = {key: np.asarray(values, dtype=float) for key, values in trajectory.observables.items()}


def _model_meta(model):
    meta = asdict(model)
    meta["schedule"] = schedule_to_dict(model.schedule)
    return meta
