"""Symmetric plateau fixed points of the SCM dynamics and their stability.

The unspecialized fixed point (``R_im = R``, ``Q11 = Q22 = Q``, ``Q12 = C``) is
found by Newton iteration on the three symmetric coordinates.  Its stability
against specialization is the largest real part ``lambda_s`` of the full
Jacobian restricted to eigenvectors that leave the symmetric subspace.
"""

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from ..utils.errors import BracketError, NumericalError
from ..utils.order_parameters import OrderParameterState
from ..utils.workers import map_ordered
from .monte_carlo import SCM_INIT
from .ode_engine import IntegratorSettings, integrate, integrate_scm, plateau_bounds
from .scm_dynamics import eps_g_scm, joint_covariance, scm_ode_rhs, seed_specialization, specialization

logger = logging.getLogger(__name__)

SEED_STRENGTH = 1e-3

JACOBIAN_STEP = 1e-6
NEWTON_STEP = 1e-7
# Floor of the ReLU finite-difference step next to the PSD boundary.
MIN_FD_STEP = 1e-10
NEWTON_TOLERANCE = 1e-12
MAX_NEWTON_ITERATIONS = 50
RESIDUAL_TOLERANCE = 1e-10
SYMMETRIC_COMPONENT = 1e-6
BRACKET_WIDTH = 1e-4
DRIFT_BRACKET = (0.0, 1.0)
DECAY_BRACKET = (0.0, 4.0)

# Solver iterates and finite-difference neighbours may step marginally outside the PSD
# cone near a rank-deficient plateau (Erf without drift, ReLU with strong weight decay).
SOLVER_PSD_TOLERANCE = 1e-3

FINAL_TOLERANCE = 1e-9
FINAL_HORIZON = 2e4
FINAL_STEP = 0.05
PLATEAU_HORIZON = 5000.0

_GUESS_HORIZON = 100.0
_GUESS_STEP = 0.05
_CHUNK = 50.0
_POLISH_THRESHOLD = 1e-6
_POLISH_RADIUS = 1e-3
_DEPARTURE = 1e-2
_MAX_BACKTRACKS = 30

# Orthonormal basis of the symmetric subspace in STATE_FIELDS coordinates.
_SYMMETRIC_BASIS = np.array(
    [
        [0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, math.sqrt(0.5), 0.0, math.sqrt(0.5)],
        [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    ]
).T


@dataclass(frozen=True)
class StabilityReport:
    """Symmetric fixed point of one SCM model with its Jacobian spectrum."""

    model: object
    fixed_point: OrderParameterState
    eps_plateau: float
    eigenvalues: np.ndarray
    lambda_s: float
    converged: bool
    residual_norm: float
    iterations: int = 0


@dataclass(frozen=True)
class FinalState:
    """Long-time state reached from the seeded plateau (``eps_final`` is eps_g there)."""

    eps_final: float
    converged: bool
    state: OrderParameterState
    time: float
    escaped: bool


@dataclass(frozen=True)
class ScanRow:
    parameter: str
    value: float
    eps_plateau: float
    eps_final: float
    lambda_s: float
    final_converged: bool
    plateau_length: float | None
    plateau_status: str


# ------------------------------------------------------------------
# Public API
# ------------------------------------------------------------------


def find_symmetric_fixed_point(model, guess=None):
    """Solve the symmetric-subspace fixed-point equations and analyse the full Jacobian.

    Parameters
    ----------
    model : ScmModel
    guess : OrderParameterState or None
        Warm start (e.g. the fixed point at a neighbouring parameter value). The
        default start is the end of a symmetric integration from the standard
        initial condition, followed by a grid of starts if Newton stalls.

    Returns
    -------
    StabilityReport
        ``converged`` is False when no start reaches the residual tolerance.
    """

    def residual(x):
        return _symmetric_part(scm_ode_rhs(OrderParameterState.symmetric(*x), model, SOLVER_PSD_TOLERANCE))

    def step(x):
        return _fd_step(model, OrderParameterState.symmetric(*x), NEWTON_STEP)

    starts = []
    if guess is not None:
        starts.append(_symmetric_coordinates(guess))
    best = None
    for x0 in _starts(model, starts):
        x, norm, converged, iterations = _newton(residual, x0, step=step)
        logger.debug("Newton from %s: residual %.3e after %d iteration(s)", np.round(x0, 6).tolist(), norm, iterations)
        if best is None or norm < best[1]:
            best = (x, norm, converged, iterations)
        if converged:
            break

    x, _, converged, iterations = best
    fixed_point = OrderParameterState.symmetric(*x)
    residual_norm = float(np.linalg.norm(scm_ode_rhs(fixed_point, model, SOLVER_PSD_TOLERANCE)))
    converged = converged and residual_norm <= RESIDUAL_TOLERANCE
    eigenvalues, eigenvectors = scipy.linalg.eig(jacobian(model, fixed_point))
    lambda_s = specialization_eigenvalue(eigenvalues, eigenvectors)
    if not converged:
        logger.warning("Symmetric fixed point not converged for %s (residual %.3e)", model, residual_norm)
    return StabilityReport(
        model=model,
        fixed_point=fixed_point,
        eps_plateau=eps_g_scm(fixed_point, model.activation, SOLVER_PSD_TOLERANCE),
        eigenvalues=eigenvalues,
        lambda_s=lambda_s,
        converged=converged,
        residual_norm=residual_norm,
        iterations=iterations,
    )


def jacobian(model, state, step=JACOBIAN_STEP):
    """Central finite-difference Jacobian of the 7-component SCM right-hand side.

    The ReLU averages are not smooth across the PSD boundary, so for the ReLU the
    step shrinks until every evaluation point stays inside the cone.
    """
    step = _fd_step(model, state, step)
    x = state.as_array()
    columns = []
    for j in range(x.size):
        dx = np.zeros_like(x)
        dx[j] = step
        plus = scm_ode_rhs(OrderParameterState.from_array(x + dx), model, SOLVER_PSD_TOLERANCE)
        minus = scm_ode_rhs(OrderParameterState.from_array(x - dx), model, SOLVER_PSD_TOLERANCE)
        columns.append((plus - minus) / (2.0 * step))
    return np.column_stack(columns)


def specialization_eigenvalue(eigenvalues, eigenvectors):
    """Largest real part among modes whose eigenvectors leave the symmetric subspace."""
    outside = eigenvectors - _SYMMETRIC_BASIS @ (_SYMMETRIC_BASIS.T @ eigenvectors)
    breaking = np.linalg.norm(outside, axis=0) > SYMMETRIC_COMPONENT
    if not np.any(breaking):
        raise NumericalError("No symmetry-breaking eigenvector found")
    return float(np.max(eigenvalues.real[breaking]))


def critical_drift(template, bracket=DRIFT_BRACKET, width=BRACKET_WIDTH):
    """Drift strength where ``lambda_s`` changes sign, at the template's weight decay."""
    return _bisect(template, "delta", bracket, width)


def critical_decay(template, bracket=DECAY_BRACKET, width=BRACKET_WIDTH):
    """Weight decay where ``lambda_s`` changes sign, at the template's drift strength."""
    return _bisect(template, "gamma", bracket, width)


def final_state_error(model, report=None, horizon=FINAL_HORIZON, step=FINAL_STEP, tolerance=FINAL_TOLERANCE):
    """Generalization error of the state the dynamics settles in after leaving the plateau.

    A stable plateau (``lambda_s <= 0``) is itself the final state. Otherwise the
    seeded fixed point is integrated until the right-hand side falls below
    ``tolerance``; once the trajectory has left the plateau, a full Newton polish
    shortcuts the slow exponential approach.
    """
    report = report or find_symmetric_fixed_point(model)
    if report.lambda_s <= 0.0:
        return FinalState(report.eps_plateau, report.converged, report.fixed_point, 0.0, escaped=False)

    def rhs(state, _t=None):
        return scm_ode_rhs(state, model)

    settings = IntegratorSettings(step=step, stride=_CHUNK)
    origin = report.fixed_point.as_array()
    state = seed_specialization(report.fixed_point, SEED_STRENGTH)
    t = 0.0
    norm = math.inf
    departed = False
    while t < horizon:
        state = integrate(rhs, state, t + _CHUNK, settings, t_start=t).final_state
        t += _CHUNK
        norm = float(np.linalg.norm(rhs(state)))
        departed = departed or float(np.max(np.abs(state.as_array() - origin))) > _DEPARTURE
        if norm < tolerance:
            return FinalState(eps_g_scm(state, model.activation), True, state, t, escaped=departed)
        if departed and norm < _POLISH_THRESHOLD:
            polished = _polish(model, state, tolerance)
            if polished is not None:
                logger.debug("Final state polished at t=%.1f", t)
                return FinalState(eps_g_scm(polished, model.activation), True, polished, t, escaped=True)
    logger.warning("Final state not reached within t=%.0f for %s (residual %.3e)", horizon, model, norm)
    return FinalState(eps_g_scm(state, model.activation), False, state, t, escaped=departed)


def plateau_length(model, settings, report=None, final=None, init=None, t_end=PLATEAU_HORIZON, chunk=200.0):
    """Plateau bounds of the learning curve started from ``init``.

    ``init`` defaults to the standard initial condition with a 1e-3 specialization
    seed. Integration proceeds in chunks and stops as soon as the escape is seen.
    """
    report = report or find_symmetric_fixed_point(model)
    final = final or final_state_error(model, report)
    init = init or seed_specialization(SCM_INIT, SEED_STRENGTH)
    s_final = specialization(final.state)

    trajectory = integrate_scm(model, init, min(chunk, t_end), settings)
    outcome = plateau_bounds(trajectory, report.eps_plateau, s_final)
    while final.escaped and outcome.status != "plateau" and trajectory.times[-1] < t_end:
        t = float(trajectory.times[-1])
        trajectory.extend(integrate_scm(model, trajectory.final_state, min(t + chunk, t_end), settings, t_start=t))
        outcome = plateau_bounds(trajectory, report.eps_plateau, s_final)
    if outcome.status != "plateau":
        logger.warning("Plateau analysis for %s: %s", model, outcome.status)
    return outcome


def drift_scan(template, values, settings, with_plateau=True):
    """Plateau, final-state and eigenvalue data over a grid of drift strengths."""
    return _scan(template, "delta", values, settings, with_plateau)


def decay_scan(template, values, settings, with_plateau=True):
    """Same as :func:`drift_scan` over a grid of weight-decay strengths."""
    return _scan(template, "gamma", values, settings, with_plateau)


# ------------------------------------------------------------------
# Internal helpers
# ------------------------------------------------------------------


def _symmetric_part(derivative):
    return np.array([derivative[:4].mean(), 0.5 * (derivative[4] + derivative[6]), derivative[5]])


def _symmetric_coordinates(state):
    return np.array([np.mean(state.as_array()[:4]), 0.5 * (state.Q11 + state.Q22), state.Q12])


def _starts(model, warm):
    """Warm starts, the integrated guess, then a grid ordered by distance to that guess."""
    yield from warm
    guess = _integrated_guess(model)
    if guess is not None:
        yield guess
    grid = []
    for r in (0.1, 0.3, 0.5, 0.7):
        for q in (0.1, 0.3, 0.6, 1.0):
            for ratio in (0.5, 0.9, 1.0):
                candidate = OrderParameterState.symmetric(r, q, ratio * q)
                if np.min(np.linalg.eigvalsh(joint_covariance(candidate))) >= -1e-12:
                    grid.append(np.array([r, q, ratio * q]))
    if guess is not None:
        grid.sort(key=lambda x: float(np.linalg.norm(x - guess)))
    yield from grid


def _integrated_guess(model):
    def rhs(state, _t):
        derivative = _symmetric_part(scm_ode_rhs(state, model, SOLVER_PSD_TOLERANCE))
        return np.array([derivative[0]] * 4 + [derivative[1], derivative[2], derivative[1]])

    settings = IntegratorSettings(step=_GUESS_STEP, stride=_GUESS_HORIZON)
    try:
        trajectory = integrate(rhs, SCM_INIT, _GUESS_HORIZON, settings)
    except NumericalError as exc:
        logger.debug("Symmetric integration for the initial guess failed: %s", exc)
        return None
    return _symmetric_coordinates(trajectory.final_state)


def _fd_step(model, state, step):
    """Largest step up to ``step`` that keeps ReLU evaluation points inside the PSD cone.

    Moving one state or symmetric coordinate by h changes the joint covariance by at most
    2h in spectral norm, so a quarter of its smallest eigenvalue is safe.
    """
    if model.activation != "relu":
        return step
    margin = float(np.min(np.linalg.eigvalsh(joint_covariance(state))))
    return min(step, max(0.25 * margin, MIN_FD_STEP))


def _newton(func, x0, step=NEWTON_STEP, tolerance=NEWTON_TOLERANCE, max_iter=MAX_NEWTON_ITERATIONS):
    """Damped Newton iteration with a central-difference Jacobian.

    ``step`` is a number or a callable giving the difference step at ``x``.
    Returns ``(x, residual_norm, converged, iterations)``.
    """
    x = np.array(x0, dtype=float)
    f = _safe_eval(func, x)
    norm = float(np.linalg.norm(f)) if f is not None else math.inf
    iterations = 0
    while iterations < max_iter and norm > tolerance and f is not None:
        iterations += 1
        h = step(x) if callable(step) else step
        J = np.empty((x.size, x.size))
        try:
            for j in range(x.size):
                dx = np.zeros_like(x)
                dx[j] = h
                J[:, j] = (func(x + dx) - func(x - dx)) / (2.0 * h)
            delta = np.linalg.lstsq(J, f, rcond=None)[0]
        except (NumericalError, np.linalg.LinAlgError):
            break
        damping = 1.0
        for _ in range(_MAX_BACKTRACKS):
            candidate = x - damping * delta
            f_new = _safe_eval(func, candidate)
            if f_new is not None and np.linalg.norm(f_new) < norm:
                x, f, norm = candidate, f_new, float(np.linalg.norm(f_new))
                break
            damping *= 0.5
        else:
            break
    return x, norm, norm <= tolerance, iterations


def _safe_eval(func, x):
    try:
        value = func(x)
    except NumericalError:
        return None
    return value if np.all(np.isfinite(value)) else None


def _polish(model, state, tolerance):
    """Full 7-d Newton from a nearly stationary state; None unless it lands close by."""
    x0 = state.as_array()

    def step(y):
        return _fd_step(model, OrderParameterState.from_array(y), NEWTON_STEP)

    x, norm, converged, _ = _newton(lambda y: scm_ode_rhs(OrderParameterState.from_array(y), model), x0, step=step, tolerance=tolerance * 1e-2)
    if not (converged or norm < tolerance) or float(np.max(np.abs(x - x0))) > _POLISH_RADIUS:
        return None
    return OrderParameterState.from_array(x)


def _bisect(template, parameter, bracket, width):
    lo, hi = bracket
    lo_report = find_symmetric_fixed_point(replace(template, **{parameter: lo}))
    hi_report = find_symmetric_fixed_point(replace(template, **{parameter: hi}), guess=lo_report.fixed_point)
    for report in (lo_report, hi_report):
        if not report.converged:
            raise NumericalError(f"Symmetric fixed point not converged at {parameter}={getattr(report.model, parameter)}")
    if not (lo_report.lambda_s > 0.0 > hi_report.lambda_s):
        raise BracketError(
            f"lambda_s does not change sign on {parameter} in [{lo}, {hi}] ({lo_report.lambda_s:.4g}, {hi_report.lambda_s:.4g})"
        )
    guess = lo_report.fixed_point
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        report = find_symmetric_fixed_point(replace(template, **{parameter: mid}), guess=guess)
        if not report.converged:
            raise NumericalError(f"Symmetric fixed point not converged at {parameter}={mid}")
        logger.debug("Bisection on %s: [%.6f, %.6f], lambda_s(%.6f) = %.3e", parameter, lo, hi, mid, report.lambda_s)
        if report.lambda_s > 0.0:
            lo = mid
        else:
            hi = mid
        guess = report.fixed_point
    critical = 0.5 * (lo + hi)
    logger.info("Critical %s for %s activation: %.6f", parameter, template.activation, critical)
    return critical


def _scan(template, parameter, values, settings, with_plateau):
    tasks = [(template, parameter, float(value), settings, with_plateau) for value in values]
    return map_ordered(_scan_point, tasks)


def _scan_point(task):
    template, parameter, value, settings, with_plateau = task
    model = replace(template, **{parameter: value})
    report = find_symmetric_fixed_point(model)
    final = final_state_error(model, report)
    length, status = None, "skipped"
    if with_plateau:
        outcome = plateau_length(model, settings, report=report, final=final)
        length, status = outcome.length, outcome.status
    logger.debug("Scan point %s=%.4f: lambda_s=%.4e eps_p=%.6f eps_final=%.6f", parameter, value, report.lambda_s, report.eps_plateau, final.eps_final)
    return ScanRow(
        parameter=parameter,
        value=value,
        eps_plateau=report.eps_plateau,
        eps_final=final.eps_final,
        lambda_s=report.lambda_s,
        final_converged=final.converged,
        plateau_length=length,
        plateau_status=status,
    )
