"""Finite-N simulation of LVQ1 and SCM training under drift.

Each run owns a Philox stream spawned from the experiment seed, so results
depend only on the configuration and never on the worker pool.
"""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..utils.errors import ConfigError, ConstructionError, DomainError, SimulationDivergedError
from ..utils.order_parameters import STATE_FIELDS, OrderParameterState
from ..utils.workers import map_ordered
from .gauss_kernel import activation, activation_prime, check_activation
from .lvq_dynamics import ConstantPrior, LvqModel, lvq_observables, prior_at, schedule_to_dict
from .ode_engine import Trajectory
from .scm_dynamics import ScmModel, scm_observables

logger = logging.getLogger(__name__)

SYSTEMS = ("lvq", "scm")

LVQ_INIT = OrderParameterState(0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0)
SCM_INIT = OrderParameterState.symmetric(0.0, 0.5, 0.49)
HANDOFF_TIME = 0.05

_FEASIBILITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SimConfig:
    """One Monte Carlo experiment.

    ``delta`` is the unscaled per-example drift of the SCM teachers; ``steps`` is the
    number of examples per run.
    """

    system: str
    n: int
    eta: float
    steps: int
    gamma: float = 0.0
    runs: int = 10
    seed: int = 0
    sample_every: int = 100
    lam: float = 1.0
    v1: float = 0.4
    v2: float = 0.4
    schedule: object = ConstantPrior()
    activation: str = "erf"
    delta: float = 0.0
    init: OrderParameterState | None = None

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ConfigError(f"Unknown system '{self.system}' (valid: {', '.join(SYSTEMS)})")
        if self.n < 4:
            raise ConfigError(f"Input dimension must be >= 4, got {self.n}")
        for name in ("steps", "runs", "sample_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.eta > 0.0:
            raise ConfigError(f"Learning rate must be positive, got {self.eta}")
        if self.gamma < 0.0 or self.gamma >= self.n:
            raise ConfigError(f"Weight decay must satisfy 0 <= gamma < N, got {self.gamma}")
        if self.system == "scm":
            check_activation(self.activation)
            if not 0.0 <= self.delta < self.n:
                raise ConfigError(f"Drift must satisfy 0 <= delta < N, got {self.delta}")

    @property
    def initial_state(self):
        if self.init is not None:
            return self.init
        return LVQ_INIT if self.system == "lvq" else SCM_INIT

    def time_of(self, step):
        """Learning time of example ``step``: alpha (LVQ) or rescaled alpha~ (SCM)."""
        alpha = step / self.n
        return alpha if self.system == "lvq" else self.eta * alpha

    @property
    def model(self):
        """ODE model with the same parameters (SCM drift and decay rescaled by eta)."""
        if self.system == "lvq":
            return LvqModel(lam=self.lam, v1=self.v1, v2=self.v2, eta=self.eta, gamma=self.gamma, schedule=self.schedule)
        return ScmModel(activation=self.activation, delta=self.eta * self.delta, gamma=self.eta * self.gamma)


@dataclass
class VectorState:
    """Adaptive vectors ``W = (w1, w2)`` and characteristic vectors ``B = (B1, B2)`` as rows."""

    W: np.ndarray
    B: np.ndarray

    @property
    def w1(self):
        return self.W[0]

    @property
    def w2(self):
        return self.W[1]

    @property
    def B1(self):
        return self.B[0]

    @property
    def B2(self):
        return self.B[1]

    def copy(self):
        return VectorState(self.W.copy(), self.B.copy())


@dataclass
class MonteCarloResult:
    """Run-averaged samples: ``mean`` and ``sem`` map column names to arrays over ``times``."""

    times: np.ndarray
    mean: dict
    sem: dict
    runs: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def as_trajectory(self):
        states = [OrderParameterState.from_array([self.mean[name][k] for name in STATE_FIELDS]) for k in range(len(self.times))]
        observables = {key: values for key, values in self.mean.items() if key not in STATE_FIELDS}
        return Trajectory(times=self.times, states=states, observables=observables, meta=self.meta)


# ------------------------------------------------------------------
# Public API
# ------------------------------------------------------------------


def init_vectors(system, n, target, rng):
    """Random vectors realising ``target`` exactly.

    An orthonormal frame (B1, B2, e3, e4) comes from the QR decomposition of a
    Gaussian matrix; the student/prototype coefficients on e3, e4 are the
    Cholesky factor of ``Q - R R^T``.
    """
    if system not in SYSTEMS:
        raise ConfigError(f"Unknown system '{system}'")
    if n < 4:
        raise ConstructionError(f"N={n} cannot host four orthonormal vectors")
    R, Q = target.R, target.Q
    rest = Q - R @ R.T
    if not np.all(np.isfinite(rest)) or np.min(np.linalg.eigvalsh(rest)) < -_FEASIBILITY_TOLERANCE:
        raise ConstructionError(f"Target order parameters are not realisable: {target}")
    l11 = math.sqrt(max(rest[0, 0], 0.0))
    l21 = rest[1, 0] / l11 if l11 > 0.0 else 0.0
    l22 = math.sqrt(max(rest[1, 1] - l21**2, 0.0))

    rng = _generator(rng)
    frame, _ = np.linalg.qr(rng.standard_normal((n, 4)))
    frame = frame.T
    coefficients = np.array([[R[0, 0], R[0, 1], l11, 0.0], [R[1, 0], R[1, 1], l21, l22]])
    return VectorState(W=coefficients @ frame, B=frame[:2].copy())


def sample_input(system, p1, lam, v1, v2, state, rng, activation_kind="erf"):
    """Draw one example; returns ``(xi, label)`` for LVQ and ``(xi, tau)`` for the SCM."""
    n = state.W.shape[1]
    if system == "lvq":
        label = 1 if rng.random() < p1 else 2
        variance = v1 if label == 1 else v2
        xi = lam * state.B[label - 1] + math.sqrt(variance) * rng.standard_normal(n)
        return xi, label
    xi = rng.standard_normal(n)
    tau = float(np.sum(activation(activation_kind, state.B @ xi)))
    return xi, tau


def train_step(system, state, example, eta, gamma, n, activation_kind="erf"):
    """One on-line update; returns a new :class:`VectorState`."""
    new = state.copy()
    _train_in_place(system, new.W, example, eta, gamma, n, activation_kind)
    return new


def drift_teachers(state, delta, n, rng):
    """Random rotation of B1, B2 with per-step self-overlap ``1 - delta/N``.

    The noise directions are orthogonal to both current teachers; a symmetric
    (Loewdin) re-orthonormalisation keeps the pair orthonormal.
    """
    if not 0.0 <= delta / n < 1.0:
        raise DomainError(f"Drift must satisfy 0 <= delta/N < 1, got {delta}/{n}")
    if delta == 0.0:
        return state
    if n < 3:
        raise DomainError(f"N={n} leaves no room for drift orthogonal to both teachers")
    new = state.copy()
    _drift_in_place(new.B, delta, n, rng)
    return new


def measure(state):
    """Order parameters of a vector state."""
    return OrderParameterState.from_matrices(state.W @ state.B.T, state.W @ state.W.T)


def run(config, keep_runs=False):
    """Simulate ``config.runs`` independent runs and average them in run order."""
    children = np.random.SeedSequence(config.seed).spawn(config.runs)
    tasks = [(config, index, child) for index, child in enumerate(children)]
    logger.info("Monte Carlo %s: N=%d, %d run(s) x %d step(s)", config.system, config.n, config.runs, config.steps)
    results = map_ordered(_simulate, tasks)

    times = results[0]["time"]
    columns = [key for key in results[0] if key != "time"]
    mean, sem = {}, {}
    for key in columns:
        stacked = np.vstack([r[key] for r in results])
        mean[key] = stacked.mean(axis=0)
        sem[key] = stacked.std(axis=0, ddof=1) / math.sqrt(config.runs) if config.runs > 1 else np.zeros_like(times)
    meta = {"system": config.system, "config": _config_meta(config)}
    return MonteCarloResult(times=times, mean=mean, sem=sem, runs=results if keep_runs else [], meta=meta)


def handoff_state(result, alpha=HANDOFF_TIME):
    """``(time, state)`` of the averaged order parameters at the first sample with time >= ``alpha``.

    The state is an initial condition for the ODEs that skips the initial
    finite-size transient of the simulation.
    """
    index = int(np.searchsorted(result.times, alpha - 1e-12))
    if index >= len(result.times):
        raise DomainError(f"No Monte Carlo sample at or after t={alpha}")
    state = OrderParameterState.from_array([result.mean[name][index] for name in STATE_FIELDS])
    return float(result.times[index]), state


def observables(config, state, time, model=None):
    """Closed-form observables of a measured state, as recorded along ODE trajectories."""
    model = model or config.model
    if config.system == "lvq":
        return lvq_observables(state, time, model)
    return scm_observables(state, model)


# ------------------------------------------------------------------
# Internal helpers
# ------------------------------------------------------------------


def _generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def _train_in_place(system, W, example, eta, gamma, n, activation_kind):
    xi, target = example
    decay = 1.0 - gamma / n
    if system == "lvq":
        d1 = np.dot(xi - W[0], xi - W[0])
        d2 = np.dot(xi - W[1], xi - W[1])
        winner = 0 if d1 <= d2 else 1
        psi = 1.0 if winner == target - 1 else -1.0
        if gamma > 0.0:
            W[1 - winner] *= decay
            W[winner] = decay * W[winner] + (eta / n) * psi * (xi - W[winner])
        else:
            W[winner] = W[winner] + (eta / n) * psi * (xi - W[winner])
        return
    h = W @ xi
    error = float(np.sum(activation(activation_kind, h))) - target
    delta_w = np.outer(-(eta / n) * error * activation_prime(activation_kind, h), xi)
    if gamma > 0.0:
        W *= decay
    W += delta_w


def _drift_in_place(B, delta, n, rng):
    a = 1.0 - delta / n
    s = math.sqrt(1.0 - a * a)
    noise = rng.standard_normal(B.shape)
    noise -= (noise @ B.T) @ B
    noise /= np.linalg.norm(noise, axis=1, keepdims=True)
    B *= a
    B += s * noise
    eigvals, eigvecs = np.linalg.eigh(B @ B.T)
    B[:] = (eigvecs @ np.diag(eigvals**-0.5) @ eigvecs.T) @ B
    B /= np.linalg.norm(B, axis=1, keepdims=True)


def _simulate(task):
    config, run_index, seed_seq = task
    rng = np.random.Generator(np.random.Philox(seed_seq))
    state = init_vectors(config.system, config.n, config.initial_state, rng)
    model = config.model
    W, B = state.W, state.B

    sample_steps = list(range(0, config.steps, config.sample_every)) + [config.steps]
    records = {"time": []}

    def record(step):
        if not np.all(np.isfinite(W)):
            raise SimulationDivergedError(
                f"Run {run_index} produced non-finite weights at step {step}", run_index=run_index, step=step, seed=seed_seq.entropy
            )
        t = config.time_of(step)
        current = measure(state)
        records["time"].append(t)
        for name, value in zip(STATE_FIELDS, current.as_array()):
            records.setdefault(name, []).append(value)
        for name, value in observables(config, current, t, model).items():
            records.setdefault(name, []).append(value)

    record(0)
    next_sample = 1
    for step in range(config.steps):
        if config.system == "lvq":
            p1 = prior_at(config.schedule, config.time_of(step))
            example = sample_input("lvq", p1, config.lam, config.v1, config.v2, state, rng)
            _train_in_place("lvq", W, example, config.eta, config.gamma, config.n, None)
        else:
            example = sample_input("scm", 0.5, 0.0, 1.0, 1.0, state, rng, config.activation)
            _train_in_place("scm", W, example, config.eta, config.gamma, config.n, config.activation)
            if config.delta > 0.0:
                _drift_in_place(B, config.delta, config.n, rng)
        if next_sample < len(sample_steps) and step + 1 == sample_steps[next_sample]:
            record(step + 1)
            next_sample += 1
    logger.debug("Run %d finished", run_index)
    return {key: np.asarray(values, dtype=float) for key, values in records.items()}


def _config_meta(config):
    meta = asdict(config)
    meta["schedule"] = schedule_to_dict(config.schedule)
    meta["init"] = config.initial_state.as_dict()
    return meta
