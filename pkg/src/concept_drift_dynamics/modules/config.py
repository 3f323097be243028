"""Experiment configuration: preset defaults, strict JSON overrides and CLI flags."""

import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..utils.errors import ConfigError
from ..utils.scenarios import SCENARIOS
from .lvq_dynamics import LvqModel, build_schedule
from .ode_engine import IntegratorSettings
from .scm_dynamics import ScmModel

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
TOP_LEVEL_KEYS = ("scenario", "outputs", "seed", "overrides")


@dataclass(frozen=True)
class LvqSettings:
    """LVQ1 model parameters; ``schedule`` is ``{"kind": ..., <parameters>}``."""

    lam: float = 1.0
    v1: float = 0.4
    v2: float = 0.4
    eta: float = 1.0
    gamma: float = 0.0
    schedule: dict = field(default_factory=lambda: {"kind": "constant", "p1": 0.5})
    t_end: float = 300.0

    def model(self):
        return LvqModel(lam=self.lam, v1=self.v1, v2=self.v2, eta=self.eta, gamma=self.gamma, schedule=build_schedule(self.schedule))


@dataclass(frozen=True)
class ScmSettings:
    """SCM model parameters in rescaled units (delta~, gamma~, alpha~)."""

    activation: str = "erf"
    delta: float = 0.0
    gamma: float = 0.0
    t_end: float = 300.0
    seed_strength: float = 1e-3
    handoff: bool = False

    def model(self):
        return ScmModel(activation=self.activation, delta=self.delta, gamma=self.gamma)


@dataclass(frozen=True)
class MonteCarloSettings:
    """Finite-N simulation settings; ``eta`` is the SCM learning rate (LVQ uses ``lvq.eta``)."""

    n: int = 100
    eta: float = 0.05
    runs: int = 10
    sample_every: int = 100
    raw: bool = False
    handoff_time: float = 0.05


@dataclass(frozen=True)
class ScanSettings:
    drift: list = field(default_factory=list)
    decay: list = field(default_factory=list)
    decay_delta: float | None = None
    with_plateau: bool = True
    critical: list = field(default_factory=lambda: ["drift", "decay"])
    drift_bracket: list = field(default_factory=lambda: [0.0, 1.0])
    decay_bracket: list = field(default_factory=lambda: [0.0, 4.0])


@dataclass(frozen=True)
class SweepSettings:
    """Curve variants: one run per value of the model parameter ``key``."""

    key: str | None = None
    values: list = field(default_factory=list)


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment configuration."""

    scenario: str
    system: str
    outputs: str
    seed: int
    lvq: LvqSettings
    scm: ScmSettings
    integrator: IntegratorSettings
    monte_carlo: MonteCarloSettings
    scans: ScanSettings
    sweep: SweepSettings

    def model_settings(self):
        return self.lvq if self.system == "lvq" else self.scm

    def variants(self):
        """``(label, config)`` per sweep value, or the config itself without a sweep."""
        if not self.sweep.key:
            return [("base", self)]
        result = []
        for value in self.sweep.values:
            settings = replace(self.model_settings(), **{self.sweep.key: float(value)})
            variant = replace(self, **{self.system: settings, "sweep": SweepSettings()})
            result.append((f"{self.sweep.key}_{float(value):g}", variant))
        return result

    def to_manifest(self):
        """Resolved config in the input format; loading it reproduces the run."""
        sections = ("lvq", "scm", "integrator", "monte_carlo", "scans", "sweep")
        return {
            "scenario": self.scenario,
            "outputs": self.outputs,
            "seed": self.seed,
            "overrides": {name: asdict(getattr(self, name)) for name in sections},
        }


_SECTIONS = {
    "lvq": LvqSettings,
    "scm": ScmSettings,
    "integrator": IntegratorSettings,
    "monte_carlo": MonteCarloSettings,
    "scans": ScanSettings,
    "sweep": SweepSettings,
}

_SWEEP_KEYS = {"lvq": ("lam", "v1", "v2", "eta", "gamma"), "scm": ("delta", "gamma")}


# ------------------------------------------------------------------
# Public API
# ------------------------------------------------------------------


def load_config(target, cli_overrides=None):
    """Resolve a scenario name or a JSON config path into an :class:`ExperimentConfig`.

    Resolution order: scenario preset, then the file's ``overrides``, then
    ``cli_overrides`` (``gamma``, ``delta``, ``activation``, ``seed``, ``out``,
    ``t_end``, ``runs``, ``raw``). Relative ``outputs`` paths are resolved against the
    config file's directory.
    """
    path = Path(target)
    if path.suffix == ".json" or path.is_file():
        if not path.is_file():
            logger.error("Config file not found: %s", target)
            raise ConfigError(f"Config file not found: {target}")
        raw = _read_json(path)
        base_dir = path.resolve().parent
    else:
        raw = {"scenario": target}
        base_dir = Path.cwd()

    unknown = set(raw) - set(TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"Unknown top-level config key(s): {', '.join(sorted(unknown))}")
    scenario = raw.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"Unknown scenario '{scenario}'. Available: {', '.join(SCENARIOS)}")
    preset = SCENARIOS[scenario]

    overrides = raw.get("overrides", {})
    if not isinstance(overrides, dict):
        raise ConfigError("'overrides' must be an object")
    unknown = set(overrides) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"Unknown config section(s): {', '.join(sorted(unknown))}")

    sections = {}
    for name, cls in _SECTIONS.items():
        merged = {**preset["sections"].get(name, {}), **overrides.get(name, {})}
        sections[name] = _build_section(name, cls, merged)

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    outputs = raw.get("outputs", str(Path("outputs") / scenario))
    config = ExperimentConfig(
        scenario=scenario,
        system=preset["system"],
        outputs=str(base_dir / outputs),
        seed=seed,
        **sections,
    )
    if cli_overrides:
        config = apply_cli_overrides(config, cli_overrides)
    _validate(config)
    return config


def apply_cli_overrides(config, overrides):
    """Apply command-line flags; a flag on the swept key collapses the sweep."""
    overrides = {key: value for key, value in overrides.items() if value is not None}
    settings = config.model_settings()
    sweep = config.sweep
    updates = {}
    for key in ("gamma", "delta", "activation"):
        if key not in overrides:
            continue
        if not hasattr(settings, key):
            raise ConfigError(f"--{key} does not apply to the {config.system} system")
        settings = replace(settings, **{key: overrides[key]})
        if sweep.key == key:
            sweep = SweepSettings()
    if "delta" in overrides:
        # An explicit drift also sets the drift of the decay scan and bisection.
        updates["scans"] = replace(config.scans, decay_delta=None)
    if "t_end" in overrides:
        settings = replace(settings, t_end=float(overrides["t_end"]))
    monte_carlo = config.monte_carlo
    if "runs" in overrides:
        monte_carlo = replace(monte_carlo, runs=int(overrides["runs"]))
    if overrides.get("raw"):
        monte_carlo = replace(monte_carlo, raw=True)
    updates["monte_carlo"] = monte_carlo
    if "seed" in overrides:
        updates["seed"] = int(overrides["seed"])
    if "out" in overrides:
        updates["outputs"] = str(Path(overrides["out"]).resolve())
    return replace(config, **{config.system: settings, "sweep": sweep, **updates})


def write_manifest(config, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / MANIFEST_NAME
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config.to_manifest(), f, ensure_ascii=False, indent=2)
    logger.debug("Manifest: %s", path)
    return path


# ------------------------------------------------------------------
# Internal helpers
# ------------------------------------------------------------------


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Invalid JSON in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"Config root must be an object: {path}")
    return raw


def _build_section(name, cls, values):
    if not isinstance(values, dict):
        raise ConfigError(f"Section '{name}' must be an object")
    defaults = cls()
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"Unknown key(s) in section '{name}': {', '.join(sorted(unknown))}")
    for key, value in values.items():
        _check_type(name, key, value, getattr(defaults, key))
    coerced = {key: float(value) if isinstance(getattr(defaults, key), float) else value for key, value in values.items()}
    try:
        return replace(defaults, **coerced)
    except TypeError as exc:
        raise ConfigError(f"Invalid section '{name}': {exc}") from exc


def _check_type(section, key, value, default):
    if default is None:
        ok = value is None or isinstance(value, (int, float, str)) and not isinstance(value, bool)
    elif isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, (int, float)):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        ok = ok and (isinstance(default, float) or isinstance(value, int))
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise ConfigError(f"Invalid type for '{section}.{key}': {value!r}")


def _validate(config):
    """Build every model once so parameter errors surface before any work starts."""
    sweep = config.sweep
    if sweep.key is not None:
        if sweep.key not in _SWEEP_KEYS[config.system]:
            raise ConfigError(f"Cannot sweep '{sweep.key}' for the {config.system} system")
        if not sweep.values:
            raise ConfigError("Sweep needs at least one value")
    for _, variant in config.variants():
        variant.model_settings().model()
    scans = config.scans
    unknown = set(scans.critical) - {"drift", "decay"}
    if unknown:
        raise ConfigError(f"Unknown critical target(s): {', '.join(sorted(unknown))}")
    for key in ("drift_bracket", "decay_bracket"):
        bracket = getattr(scans, key)
        if len(bracket) != 2 or not bracket[0] < bracket[1]:
            raise ConfigError(f"scans.{key} must be [low, high] with low < high")
    if config.monte_carlo.n < 4 or config.monte_carlo.runs < 1 or config.monte_carlo.sample_every < 1:
        raise ConfigError("monte_carlo needs n >= 4, runs >= 1 and sample_every >= 1")
