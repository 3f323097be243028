"""Expectations over low-dimensional correlated Gaussians.

Closed forms for the activation averages of the soft committee machine, the
linear-times-indicator moment behind the LVQ1 averages, and a tensorised
Gauss-Hermite rule that serves as an independent oracle for all of them.

Conventions
-----------
* ``Theta(0) = 0`` for the ReLU derivative and for winner indicators.
* ``asin`` arguments within 1e-9 of [-1, 1] are clamped, larger violations raise.
* Pair covariances outside the PSD cone by more than ``tolerance`` raise. Within
  it the Erf forms are evaluated as they stand (they are analytic across the
  boundary); the ReLU forms see ``c12`` projected back onto ``|c12| <= sqrt(c11 c22)``.
* Closed forms accept scalars or numpy arrays (broadcast element-wise).
"""

import logging
import math
from functools import reduce

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss
from scipy.special import erf, ndtr

from ..utils.errors import ConfigError, DegenerateIndicatorError, DomainError

logger = logging.getLogger(__name__)

ACTIVATIONS = ("erf", "relu")

ASIN_TOLERANCE = 1e-9
# Default margin of the pair check c12**2 - c11*c22 <= tolerance. Callers working next to
# a rank-deficient plateau pass a wider one explicitly.
PSD_TOLERANCE = 1e-12
SYMMETRY_TOLERANCE = 1e-12
EIGEN_TOLERANCE = 1e-10

DEFAULT_ORDER = 60
# Half-line cut-off (in standard deviations) for the split rule of quad_expect.
_SPLIT_CUTOFF = 12.0

_SQRT_2 = math.sqrt(2.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class GaussianSpec:
    """Immutable mean vector and covariance matrix of a 1- to 4-dimensional Gaussian."""

    __slots__ = ("dim", "mean", "cov")

    def __init__(self, mean, cov):
        mean = np.array(mean, dtype=float).reshape(-1)
        cov = np.array(cov, dtype=float)
        dim = mean.shape[0]
        if dim not in (1, 2, 3, 4):
            raise DomainError(f"Gaussian dimension must be 1..4, got {dim}")
        if cov.shape != (dim, dim):
            raise DomainError(f"Covariance shape {cov.shape} does not match mean length {dim}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise DomainError("Gaussian parameters must be finite")
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOLERANCE:
            raise DomainError("Covariance is not symmetric")
        min_eig = float(np.min(np.linalg.eigvalsh(cov)))
        if min_eig < -EIGEN_TOLERANCE:
            raise DomainError(f"Covariance is not positive semi-definite (min eigenvalue {min_eig:.3e})")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    def __setattr__(self, name, value):
        raise AttributeError("GaussianSpec is immutable")

    def __repr__(self):
        return f"GaussianSpec(mean={self.mean.tolist()}, cov={self.cov.tolist()})"

    def sqrt_cov(self):
        """Symmetric square root of the covariance (rank-deficient directions map to zero)."""
        eigvals, eigvecs = np.linalg.eigh(self.cov)
        eigvals = np.clip(eigvals, 0.0, None)
        return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


# ---------------------------------------------------------------------------
# Scalar functions
# ---------------------------------------------------------------------------


def std_normal_cdf(z):
    """Standard normal distribution function Phi(z).

    Infinite arguments return the limits 0 and 1; NaN raises ``DomainError``.
    """
    z = float(z)
    if math.isnan(z):
        raise DomainError("std_normal_cdf argument is NaN")
    return float(ndtr(z))


def std_normal_pdf(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(z))


def check_activation(kind):
    if kind not in ACTIVATIONS:
        raise ConfigError(f"Unknown activation '{kind}' (valid: {', '.join(ACTIVATIONS)})")
    return kind


def activation(kind, x):
    """Hidden-unit transfer function ``erf(x/sqrt 2)`` or ``x Theta(x)``."""
    check_activation(kind)
    x = np.asarray(x, dtype=float)
    if kind == "erf":
        out = erf(x / _SQRT_2)
    else:
        out = np.where(x > 0.0, x, 0.0)
    return _scalar_or_array(out)


def activation_prime(kind, x):
    """Derivative of :func:`activation`; the ReLU derivative at 0 is 0."""
    check_activation(kind)
    x = np.asarray(x, dtype=float)
    if kind == "erf":
        out = _SQRT_2_OVER_PI * np.exp(-0.5 * np.square(x))
    else:
        out = np.where(x > 0.0, 1.0, 0.0)
    return _scalar_or_array(out)


# ---------------------------------------------------------------------------
# Closed-form pair averages over a zero-mean pair (u, v)
# ---------------------------------------------------------------------------


def pair_average(kind, c11, c12, c22, tolerance=PSD_TOLERANCE):
    """Return ``<g(u) g(v)>`` for zero-mean Gaussian (u, v) with covariance [[c11, c12], [c12, c22]].

    Erf:  (2/pi) asin(c12 / sqrt((1 + c11)(1 + c22)))
    ReLU: c12/4 + (sqrt(c11 c22 - c12^2) + c12 asin(c12 / sqrt(c11 c22))) / (2 pi),
          continuously 0 when c11 c22 = 0.
    """
    check_activation(kind)
    c11, c12, c22 = _check_pair(kind, c11, c12, c22, tolerance)
    if kind == "erf":
        out = (2.0 / math.pi) * _clamped_asin(c12 / np.sqrt((1.0 + c11) * (1.0 + c22)))
    else:
        prod = c11 * c22
        degenerate = prod <= 0.0
        safe = np.where(degenerate, 1.0, prod)
        root = np.sqrt(np.clip(prod - c12**2, 0.0, None))
        ratio = np.where(degenerate, 0.0, c12 / np.sqrt(safe))
        value = c12 / 4.0 + (root + c12 * _clamped_asin(ratio)) / (2.0 * math.pi)
        out = np.where(degenerate, 0.0, value)
    return _scalar_or_array(out)


def prime_pair_average(kind, c11, c12, c22, tolerance=PSD_TOLERANCE):
    """Return ``<g'(u) g'(v)>`` for zero-mean Gaussian (u, v)."""
    check_activation(kind)
    c11, c12, c22 = _check_pair(kind, c11, c12, c22, tolerance)
    if kind == "erf":
        out = (2.0 / math.pi) / np.sqrt((1.0 + c11) * (1.0 + c22) - c12**2)
    else:
        _require_positive_variances(c11, c22)
        out = 0.25 + _clamped_asin(c12 / np.sqrt(c11 * c22)) / (2.0 * math.pi)
    return _scalar_or_array(out)


def curvature_average(kind, c11, c12, c22, tolerance=PSD_TOLERANCE):
    """Return ``<g''(u) g(v)>`` for zero-mean Gaussian (u, v).

    For the ReLU ``g''`` is a Dirac delta at the origin, giving
    ``sqrt(c11 c22 - c12^2) / (2 pi c11)``.
    """
    check_activation(kind)
    c11, c12, c22 = _check_pair(kind, c11, c12, c22, tolerance)
    if kind == "erf":
        out = -c12 * prime_pair_average(kind, c11, c12, c22, tolerance) / (1.0 + c11)
    else:
        _require_positive_variances(c11, c22)
        out = np.sqrt(np.clip(c11 * c22 - c12**2, 0.0, None)) / (2.0 * math.pi * c11)
    return _scalar_or_array(out)


def triple_average(kind, cov, u, v, w, tolerance=PSD_TOLERANCE):
    """Return ``<g'(z_u) z_v g(z_w)>`` for a zero-mean Gaussian vector z with covariance ``cov``.

    Index arguments may be integer arrays; the result is evaluated element-wise.
    Gaussian integration by parts gives
    ``Cov(v, u) <g''(u) g(w)> + Cov(v, w) <g'(u) g'(w)>``.
    """
    cov = np.asarray(cov, dtype=float)
    u, v, w = np.asarray(u), np.asarray(v), np.asarray(w)
    c11, c13, c33 = cov[u, u], cov[u, w], cov[w, w]
    out = cov[v, u] * curvature_average(kind, c11, c13, c33, tolerance) + cov[v, w] * prime_pair_average(kind, c11, c13, c33, tolerance)
    return _scalar_or_array(out)


# ---------------------------------------------------------------------------
# Linear-times-indicator moment
# ---------------------------------------------------------------------------


def heaviside_moment(a0, a, b0, b, spec):
    """Return ``<(a.z + a0) Theta(b.z + b0)>`` for z ~ ``spec``.

    Uses ``<u Theta(x)> = mu_u Phi(mu_x/s_x) + Cov(u, x) phi(mu_x/s_x) / s_x``.
    ``a`` may be a matrix of row vectors (with ``a0`` broadcast against its rows)
    to evaluate several moments that share one indicator.

    Raises
    ------
    DegenerateIndicatorError
        If ``b.z + b0`` has zero variance.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != spec.dim or b.shape != (spec.dim,):
        raise DomainError(f"Coefficient vectors must have length {spec.dim}")
    var_x = float(b @ spec.cov @ b)
    if var_x <= 0.0:
        raise DegenerateIndicatorError("Indicator argument has zero variance")
    sigma_x = math.sqrt(var_x)
    t = (float(b @ spec.mean) + b0) / sigma_x
    mean_u = a @ spec.mean + a0
    cov_ux = a @ spec.cov @ b
    out = mean_u * ndtr(t) + cov_ux * std_normal_pdf(t) / sigma_x
    return _scalar_or_array(out)


# ---------------------------------------------------------------------------
# Quadrature oracle
# ---------------------------------------------------------------------------


def quad_expect(f, spec, order=DEFAULT_ORDER, indicator=None):
    """Tensorised Gauss-Hermite estimate of ``<f(z)>`` for z ~ ``spec``.

    Parameters
    ----------
    f : callable
        Vectorised integrand: receives points of shape ``(n, dim)`` and returns ``n`` values.
    spec : GaussianSpec
    order : int
        Nodes per dimension (>= 2).
    indicator : tuple(float, array) or None
        ``(b0, b)`` restricts the average to the half-space ``b.z + b0 > 0``, i.e. returns
        ``<f(z) Theta(b.z + b0)>``. The coordinate normal to the boundary is then integrated
        with Gauss-Legendre on the half-line, so piecewise integrands converge spectrally.

    Returns
    -------
    float
    """
    if order < 2:
        raise DomainError("Quadrature order must be >= 2")
    try:
        root = spec.sqrt_cov()
    except np.linalg.LinAlgError as exc:
        raise DomainError(f"Eigendecomposition failed: {exc}") from exc

    herm_nodes, herm_weights = hermgauss(order)
    gh_nodes = herm_nodes * _SQRT_2
    gh_weights = herm_weights / math.sqrt(math.pi)

    if indicator is None:
        axes = [gh_nodes] * spec.dim
        weights = [gh_weights] * spec.dim
        frame = root
    else:
        b0, b = indicator
        b = np.asarray(b, dtype=float)
        normal = root @ b
        sigma = float(np.linalg.norm(normal))
        if sigma == 0.0:
            raise DegenerateIndicatorError("Indicator argument has zero variance")
        lower = max(-(float(b @ spec.mean) + b0) / sigma, -_SPLIT_CUTOFF)
        if lower >= _SPLIT_CUTOFF:
            return 0.0
        leg_nodes, leg_weights = leggauss(order)
        half = 0.5 * (_SPLIT_CUTOFF - lower)
        t_nodes = lower + half * (leg_nodes + 1.0)
        t_weights = half * leg_weights * std_normal_pdf(t_nodes)
        basis, _ = np.linalg.qr(np.column_stack([normal, np.eye(spec.dim)]))
        if basis[:, 0] @ normal < 0.0:
            basis[:, 0] = -basis[:, 0]
        axes = [t_nodes] + [gh_nodes] * (spec.dim - 1)
        weights = [t_weights] + [gh_weights] * (spec.dim - 1)
        frame = basis.T @ root

    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.dim)
    w = reduce(np.multiply.outer, weights).reshape(-1)
    points = spec.mean + grid @ frame
    values = np.asarray(f(points), dtype=float)
    return float(np.dot(w, values))


# ---------------------------------------------------------------------------
# Internal helpers
# ---------------------------------------------------------------------------


def _clamped_asin(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + ASIN_TOLERANCE):
        raise DomainError(f"asin argument outside [-1, 1]: {np.max(np.abs(x)):.12g}")
    return np.arcsin(np.clip(x, -1.0, 1.0))


def _check_pair(kind, c11, c12, c22, tolerance):
    c11 = np.asarray(c11, dtype=float)
    c12 = np.asarray(c12, dtype=float)
    c22 = np.asarray(c22, dtype=float)
    if not (np.all(np.isfinite(c11)) and np.all(np.isfinite(c12)) and np.all(np.isfinite(c22))):
        raise DomainError("Covariance entries must be finite")
    if not tolerance >= 0.0:
        raise DomainError(f"PSD tolerance must be non-negative, got {tolerance}")
    if np.any(c11 < -tolerance) or np.any(c22 < -tolerance) or np.any(c12**2 - c11 * c22 > tolerance):
        raise DomainError("Pair covariance is not positive semi-definite")
    c11 = np.clip(c11, 0.0, None)
    c22 = np.clip(c22, 0.0, None)
    if kind == "relu":
        bound = np.sqrt(c11 * c22)
        c12 = np.clip(c12, -bound, bound)
    return c11, c12, c22


def _require_positive_variances(c11, c22):
    if np.any(c11 <= 0.0) or np.any(c22 <= 0.0):
        raise DomainError("ReLU derivative averages need strictly positive variances")


def _scalar_or_array(out):
    out = np.asarray(out)
    return float(out) if out.ndim == 0 else out
