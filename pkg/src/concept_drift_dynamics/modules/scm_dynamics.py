"""Small-learning-rate dynamics of a two-unit soft committee machine under teacher drift.

Student output ``sum_i g(h_i)`` learns the teacher ``sum_m g(b_m)`` with
orthonormal teacher vectors.  Time is the rescaled ``alpha~ = eta * alpha``;
drift ``delta~`` and weight decay ``gamma~`` are rescaled the same way.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..utils.errors import ConfigError, DomainError, InconsistentStateError
from ..utils.order_parameters import OrderParameterState
from .gauss_kernel import check_activation, pair_average, triple_average

logger = logging.getLogger(__name__)

# Eigenvalue margin of the (h1, h2, b1, b2) covariance check.
PSD_TOLERANCE = 1e-5
# eps_g between this and zero is round-off and clamps to zero.
NEGATIVE_ERROR_TOLERANCE = 1e-8

# Index grids of the 32 averages <g'(h_i) z_v g(z_w)>, z = (h1, h2, b1, b2).
_I, _V, _W = np.meshgrid(np.arange(2), np.arange(4), np.arange(4), indexing="ij")
# Teacher terms (w = b_n) enter with +, student terms (w = h_j) with -.
_SIGN = np.where(_W >= 2, 1.0, -1.0)

_SQRT_HALF = math.sqrt(0.5)


@dataclass(frozen=True)
class ScmModel:
    activation: str = "erf"
    delta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        check_activation(self.activation)
        for name in ("delta", "gamma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise ConfigError(f"SCM parameter {name} must be finite and non-negative, got {value}")


@dataclass(frozen=True)
class ScmDrives:
    """``F[i, m] = <rho_i b_m>`` and ``G1[i, k] = <rho_i h_k + rho_k h_i>``."""

    F: np.ndarray
    G1: np.ndarray


def joint_covariance(state):
    """Covariance of (h1, h2, b1, b2) for standard normal inputs and orthonormal teachers."""
    return np.block([[state.Q, state.R], [state.R.T, np.eye(2)]])


def scm_drives(state, activation, tolerance=PSD_TOLERANCE):
    """Gaussian averages of the SGD error signal ``rho_i = -(sigma - tau) g'(h_i)``.

    Every term is a three-variable average ``<g'(h_i) z_v g(z_w)>`` evaluated in
    closed form by :func:`gauss_kernel.triple_average`.

    Raises
    ------
    InconsistentStateError
        If the assembled covariance is not positive semi-definite within ``tolerance``.
    DomainError
        For the ReLU when a student norm ``Q_ii`` is not positive.
    """
    check_activation(activation)
    state.check(tolerance)
    cov = joint_covariance(state)
    min_eig = float(np.min(np.linalg.eigvalsh(cov)))
    if min_eig < -tolerance:
        raise InconsistentStateError(f"Student/teacher covariance is not positive semi-definite (min eigenvalue {min_eig:.3e})")
    if activation == "relu" and min(state.Q11, state.Q22) <= 0.0:
        raise DomainError("ReLU drives need Q11 > 0 and Q22 > 0")

    moments = (_SIGN * triple_average(activation, cov, _I, _V, _W, _pair_tolerance(cov, tolerance))).sum(axis=2)  # <rho_i z_v>
    F = moments[:, 2:]
    G1 = moments[:, :2] + moments[:, :2].T
    return ScmDrives(F=F, G1=G1)


def scm_ode_rhs(state, model, tolerance=PSD_TOLERANCE):
    """``d(R, Q)/d alpha~`` in ``STATE_FIELDS`` order.

    Drift acts on R only; weight decay shrinks both R and Q.
    """
    drives = scm_drives(state, model.activation, tolerance)
    dR = drives.F - (model.delta + model.gamma) * state.R
    dQ = drives.G1 - 2.0 * model.gamma * state.Q
    return np.array([dR[0, 0], dR[0, 1], dR[1, 0], dR[1, 1], dQ[0, 0], dQ[0, 1], dQ[1, 1]])


def eps_g_scm(state, activation, tolerance=PSD_TOLERANCE):
    """Generalization error ``<(sigma - tau)^2> / 2`` for orthonormal teachers.

    The sum cancels to round-off at the perfect student; negative values down
    to ``-NEGATIVE_ERROR_TOLERANCE`` clamp to zero.
    """
    check_activation(activation)
    Q, R = state.Q, state.R
    pair_tolerance = _pair_tolerance(joint_covariance(state), tolerance)
    student = sum(pair_average(activation, Q[i, i], Q[i, k], Q[k, k], pair_tolerance) for i in range(2) for k in range(2))
    cross = sum(pair_average(activation, Q[i, i], R[i, m], 1.0, pair_tolerance) for i in range(2) for m in range(2))
    teacher = sum(pair_average(activation, 1.0, float(m == n), 1.0) for m in range(2) for n in range(2))
    value = 0.5 * student - cross + 0.5 * teacher
    if value < -NEGATIVE_ERROR_TOLERANCE:
        raise DomainError(f"Negative generalization error {value:.3e}")
    return max(value, 0.0)


def specialization(state):
    """``(S1, S2)`` with ``S_i = |R_i1 - R_i2|``."""
    return abs(state.R11 - state.R12), abs(state.R21 - state.R22)


def seed_specialization(state, strength):
    """Break the student permutation symmetry.

    Moves ``w1 += s u`` and ``w2 -= s u`` with ``u = (B1 - B2)/sqrt 2`` and returns
    the exactly transformed order parameters.
    """
    shift = strength * _SQRT_HALF
    a1 = state.R11 - state.R12  # sqrt(2) * w1.u
    a2 = state.R21 - state.R22
    s2 = strength**2
    return OrderParameterState(
        R11=state.R11 + shift,
        R12=state.R12 - shift,
        R21=state.R21 - shift,
        R22=state.R22 + shift,
        Q11=state.Q11 + 2.0 * shift * a1 + s2,
        Q12=state.Q12 - shift * a1 + shift * a2 - s2,
        Q22=state.Q22 - 2.0 * shift * a2 + s2,
    )


def scm_observables(state, model):
    s1, s2 = specialization(state)
    return {"eps_g": eps_g_scm(state, model.activation), "S1": s1, "S2": s2}


def _pair_tolerance(cov, tolerance):
    """Determinant margin of every 2x2 principal block when the smallest eigenvalue is ``>= -tolerance``."""
    return tolerance * (2.0 * float(np.max(np.diag(cov))) + tolerance)
