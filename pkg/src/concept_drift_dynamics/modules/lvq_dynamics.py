"""Order-parameter dynamics of LVQ1 on a drifting two-Gaussian mixture.

Two prototypes w1 (class 1) and w2 (class 2) learn from examples
``xi = lambda * B_m + sqrt(v_m) * z`` whose class weights follow a prior
schedule ``p1(alpha)``.  Prototype 1 wins when

    x = (Q22 - Q11) + 2 (h1 - h2) > 0,     h_i = w_i . xi,

so every winner indicator is ``Theta`` of an affine function of the
cluster-conditional Gaussian vector (h1, h2, b1, b2) and all averages follow
from :func:`gauss_kernel.heaviside_moment`.
"""

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from ..utils.errors import ConfigError, DegenerateIndicatorError, DomainError, NumericalError
from .gauss_kernel import GaussianSpec, heaviside_moment, std_normal_cdf

logger = logging.getLogger(__name__)

# Tolerance of the completeness check <Theta_1> + <Theta_2> = 1 per cluster.
_INDICATOR_SUM_TOLERANCE = 1e-12

# Rows of the moment matrix: constant 1, then h1, h2, b1, b2.
_MOMENT_ROWS = np.vstack([np.zeros(4), np.eye(4)])
_MOMENT_OFFSETS = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
_INDICATOR_DIRECTION = np.array([2.0, -2.0, 0.0, 0.0])


# ---------------------------------------------------------------------------
# Prior schedules
# ---------------------------------------------------------------------------


def _check_probability(name, value):
    if not 0.0 < value < 1.0:
        raise ConfigError(f"{name} must lie in (0, 1), got {value}")


@dataclass(frozen=True)
class ConstantPrior:
    p1: float = 0.5

    kind = "constant"

    def __post_init__(self):
        _check_probability("p1", self.p1)

    def value(self, alpha):
        return self.p1

    def discontinuities(self):
        return ()


@dataclass(frozen=True)
class LinearPrior:
    """Balanced until ``alpha_o``, linear ramp to ``p_max`` at ``alpha_end``, constant afterwards."""

    alpha_o: float = 20.0
    alpha_end: float = 200.0
    p_max: float = 0.8

    kind = "linear"

    def __post_init__(self):
        _check_probability("p_max", self.p_max)
        if not 0.0 <= self.alpha_o < self.alpha_end:
            raise ConfigError(f"Linear schedule needs 0 <= alpha_o < alpha_end, got {self.alpha_o}, {self.alpha_end}")

    def value(self, alpha):
        if alpha <= self.alpha_o:
            return 0.5
        if alpha >= self.alpha_end:
            return self.p_max
        return 0.5 + (self.p_max - 0.5) * (alpha - self.alpha_o) / (self.alpha_end - self.alpha_o)

    def discontinuities(self):
        return (self.alpha_o, self.alpha_end)


@dataclass(frozen=True)
class SuddenPrior:
    """Switch from ``1 - p_max`` to ``p_max`` at ``alpha_o``."""

    alpha_o: float = 100.0
    p_max: float = 0.75

    kind = "sudden"

    def __post_init__(self):
        _check_probability("p_max", self.p_max)
        if self.alpha_o < 0.0:
            raise ConfigError(f"alpha_o must be non-negative, got {self.alpha_o}")

    def value(self, alpha):
        return 1.0 - self.p_max if alpha <= self.alpha_o else self.p_max

    def discontinuities(self):
        return (self.alpha_o,)


@dataclass(frozen=True)
class OscillatingPrior:
    """``p1 = 1/2 + (p_max - 1/2) cos(2 pi alpha / period)``."""

    period: float = 50.0
    p_max: float = 0.8

    kind = "oscillating"

    def __post_init__(self):
        _check_probability("p_max", self.p_max)
        if not self.period > 0.0:
            raise ConfigError(f"period must be positive, got {self.period}")

    def value(self, alpha):
        return 0.5 + (self.p_max - 0.5) * math.cos(2.0 * math.pi * alpha / self.period)

    def discontinuities(self):
        return ()


SCHEDULES = {cls.kind: cls for cls in (ConstantPrior, LinearPrior, SuddenPrior, OscillatingPrior)}


def build_schedule(raw):
    """Create a schedule from a mapping ``{"kind": ..., <parameters>}``."""
    params = dict(raw)
    kind = params.pop("kind", None)
    if kind not in SCHEDULES:
        raise ConfigError(f"Unknown prior schedule '{kind}' (valid: {', '.join(SCHEDULES)})")
    try:
        return SCHEDULES[kind](**{key: float(value) for key, value in params.items()})
    except TypeError as exc:
        raise ConfigError(f"Invalid parameters for '{kind}' schedule: {sorted(params)}") from exc


def schedule_to_dict(schedule):
    return {"kind": schedule.kind, **asdict(schedule)}


def prior_at(schedule, alpha):
    """Class-1 weight ``p1(alpha)`` of ``schedule``."""
    if not alpha >= 0.0:
        raise DomainError(f"Learning time must be non-negative, got {alpha}")
    return schedule.value(alpha)


# ---------------------------------------------------------------------------
# Model and drives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LvqModel:
    """Parameters of the LVQ1 learning scenario (lam is the cluster offset lambda)."""

    lam: float = 1.0
    v1: float = 0.4
    v2: float = 0.4
    eta: float = 1.0
    gamma: float = 0.0
    schedule: object = ConstantPrior()

    def __post_init__(self):
        values = {"lam": self.lam, "v1": self.v1, "v2": self.v2, "eta": self.eta, "gamma": self.gamma}
        for name, value in values.items():
            if not math.isfinite(value):
                raise ConfigError(f"LVQ parameter {name} must be finite")
        for name in ("lam", "v1", "v2", "eta"):
            if values[name] <= 0.0:
                raise ConfigError(f"LVQ parameter {name} must be positive, got {values[name]}")
        if self.gamma < 0.0:
            raise ConfigError(f"LVQ weight decay must be non-negative, got {self.gamma}")


@dataclass(frozen=True)
class LvqDrives:
    """Cluster-conditional averages of the modulation functions ``f_i = Theta_i * Psi(i, sigma)``.

    Index order is ``[m, i, ...]``: cluster m, prototype i.
    """

    f_mean: np.ndarray  # <f_i>_m
    bf: np.ndarray  # <b_n f_i>_m  as [m, i, n]
    hf: np.ndarray  # <h_k f_i>_m  as [m, i, k]
    f_sq: np.ndarray  # <f_i^2>_m = <Theta_i>_m
    f_cross: np.ndarray  # <f_1 f_2>_m, zero since the winner indicators are disjoint


def lvq1_drives(state, p1, lam, v1, v2):
    """Closed-form cluster-conditional averages entering the LVQ1 ODE.

    ``p1`` is not needed for the per-cluster averages; it is range checked so the
    signature mirrors the ODE inputs.

    Raises
    ------
    DegenerateIndicatorError
        If the prototypes coincide (``Q11 - 2 Q12 + Q22 <= 0``).
    """
    _check_probability("p1", p1)
    state.check()
    _prototype_separation(state)
    joint = _joint_covariance(state)
    offset = state.Q22 - state.Q11

    f_mean = np.empty((2, 2))
    bf = np.empty((2, 2, 2))
    hf = np.empty((2, 2, 2))
    f_sq = np.empty((2, 2))
    for m, variance in enumerate((v1, v2)):
        mean = lam * np.array([state.R[0, m], state.R[1, m], float(m == 0), float(m == 1)])
        spec = GaussianSpec(mean, variance * joint)
        for i, sign in enumerate((1.0, -1.0)):
            moments = heaviside_moment(_MOMENT_OFFSETS, _MOMENT_ROWS, sign * offset, sign * _INDICATOR_DIRECTION, spec)
            psi = 1.0 if i == m else -1.0
            f_mean[m, i] = psi * moments[0]
            hf[m, i] = psi * moments[1:3]
            bf[m, i] = psi * moments[3:5]
            f_sq[m, i] = moments[0]
        completeness = f_sq[m].sum() - 1.0
        if abs(completeness) > _INDICATOR_SUM_TOLERANCE:
            raise NumericalError(f"Winner indicators of cluster {m + 1} do not partition the input space ({completeness:.3e})")
    return LvqDrives(f_mean=f_mean, bf=bf, hf=hf, f_sq=f_sq, f_cross=np.zeros(2))


def lvq_ode_rhs(state, alpha, model):
    """``d(R, Q)/d alpha`` in ``STATE_FIELDS`` order."""
    p1 = prior_at(model.schedule, alpha)
    drives = lvq1_drives(state, p1, model.lam, model.v1, model.v2)
    weights = np.array([p1, 1.0 - p1])
    variances = np.array([model.v1, model.v2])
    R, Q = state.R, state.Q

    f_avg = weights @ drives.f_mean  # <f_i>
    bf_avg = np.einsum("m,min->in", weights, drives.bf)  # <b_n f_i>
    hf_avg = np.einsum("m,mik->ik", weights, drives.hf)  # <h_k f_i>

    F = bf_avg - R * f_avg[:, None]
    G1 = hf_avg + hf_avg.T - Q * (f_avg[:, None] + f_avg[None, :])
    G2 = np.diag((weights * variances) @ drives.f_sq)

    dR = model.eta * F - model.gamma * R
    dQ = model.eta * G1 + model.eta**2 * G2 - 2.0 * model.gamma * Q
    return np.array([dR[0, 0], dR[0, 1], dR[1, 0], dR[1, 1], dQ[0, 0], dQ[0, 1], dQ[1, 1]])


# ---------------------------------------------------------------------------
# Performance measures
# ---------------------------------------------------------------------------


def class_errors(state, lam, v1, v2):
    """Class-wise misclassification rates ``(eps1, eps2)``.

    ``eps_k = Phi((Q_kk - Q_ll - 2 lam (R_kk - R_lk)) / (2 sqrt(v_k) sqrt(Q11 - 2 Q12 + Q22)))``
    with ``l`` the other class.
    """
    spread = math.sqrt(_prototype_separation(state))
    R = state.R
    eps1 = std_normal_cdf((state.Q11 - state.Q22 - 2.0 * lam * (R[0, 0] - R[1, 0])) / (2.0 * math.sqrt(v1) * spread))
    eps2 = std_normal_cdf((state.Q22 - state.Q11 - 2.0 * lam * (R[1, 1] - R[0, 1])) / (2.0 * math.sqrt(v2) * spread))
    return eps1, eps2


def error_measures(eps1, eps2, p1_eval):
    """Return ``(eps_g, eps_ref, eps_track)``.

    ``eps_g`` and ``eps_track`` weight the class errors with the current prior
    ``p1_eval``; ``eps_ref`` uses balanced priors.
    """
    for name, value in (("eps1", eps1), ("eps2", eps2), ("p1", p1_eval)):
        if not 0.0 <= value <= 1.0:
            raise DomainError(f"{name} must lie in [0, 1], got {value}")
    eps_track = p1_eval * eps1 + (1.0 - p1_eval) * eps2
    eps_ref = 0.5 * (eps1 + eps2)
    return eps_track, eps_ref, eps_track


def lvq_observables(state, alpha, model):
    """Per-sample observables of an LVQ trajectory."""
    p1 = prior_at(model.schedule, alpha)
    eps1, eps2 = class_errors(state, model.lam, model.v1, model.v2)
    eps_g, eps_ref, eps_track = error_measures(eps1, eps2, p1)
    return {"eps_g": eps_g, "eps1": eps1, "eps2": eps2, "eps_ref": eps_ref, "eps_track": eps_track, "p1": p1}


# ---------------------------------------------------------------------------
# Internal helpers
# ---------------------------------------------------------------------------


def _prototype_separation(state):
    separation = state.Q11 - 2.0 * state.Q12 + state.Q22
    if not separation > 0.0:
        raise DegenerateIndicatorError(f"Prototypes coincide (Q11 - 2 Q12 + Q22 = {separation:.3e})")
    return separation


def _joint_covariance(state):
    """Covariance of (h1, h2, b1, b2) for a unit-variance input with orthonormal centres."""
    R = state.R
    return np.block([[state.Q, R], [R.T, np.eye(2)]])
