"""CLI command implementations for concept-drift-dynamics."""

import logging
from dataclasses import replace
from pathlib import Path

from . import monte_carlo
from .config import write_manifest
from .monte_carlo import LVQ_INIT, SCM_INIT, SimConfig, handoff_state
from .ode_engine import integrate_lvq, integrate_scm
from .report import (
    compare_table,
    format_float,
    format_report,
    write_compare_csv,
    write_monte_carlo_csv,
    write_run_csvs,
    write_scan_csv,
    write_text,
    write_trajectory_csv,
)
from .scm_dynamics import seed_specialization
from .stability import critical_decay, critical_drift, decay_scan, drift_scan, final_state_error, find_symmetric_fixed_point
from ..utils.errors import ConfigError, IntegrationDivergedError
from ..utils.scenarios import describe_scenarios
from ..utils.workers import map_ordered

logger = logging.getLogger(__name__)


def run_ode(config):
    """Integrate the order-parameter ODEs for every sweep variant.

    Writes ``ode_<label>.csv`` per variant. A diverged variant leaves its partial
    trajectory in ``ode_<label>_partial.csv`` and the error is re-raised after the
    remaining variants have been written.

    Returns
    -------
    list[Path]
        Written trajectory files in variant order.
    """
    out_dir = Path(config.outputs)
    write_manifest(config, out_dir)
    results = map_ordered(_ode_job, config.variants())

    paths = []
    failure = None
    for label, trajectory, message in results:
        if message is None:
            paths.append(write_trajectory_csv(out_dir / f"ode_{label}.csv", trajectory, config.system))
            logger.info("ODE %s: %s", label, _display(paths[-1]))
            continue
        logger.warning("ODE %s diverged: %s", label, message)
        if trajectory is not None and len(trajectory):
            partial = write_trajectory_csv(out_dir / f"ode_{label}_partial.csv", trajectory, config.system)
            logger.info("Partial trajectory: %s", _display(partial))
        failure = failure or IntegrationDivergedError(f"{label}: {message}", trajectory)
    if failure is not None:
        raise failure
    return paths


def run_mc(config):
    """Monte Carlo simulation for every sweep variant, averaged over ``monte_carlo.runs``."""
    out_dir = Path(config.outputs)
    write_manifest(config, out_dir)
    paths = []
    for label, variant in config.variants():
        logger.debug("--- Monte Carlo variant: %s ---", label)
        result = monte_carlo.run(_sim_config(variant), keep_runs=variant.monte_carlo.raw)
        paths.append(write_monte_carlo_csv(out_dir / f"mc_{label}.csv", result, config.system))
        logger.info("Monte Carlo %s: %s", label, _display(paths[-1]))
        if variant.monte_carlo.raw:
            run_paths = write_run_csvs(out_dir / f"mc_{label}_runs", result, config.system)
            logger.info("Raw runs: %d file(s) in %s", len(run_paths), _display(out_dir / f"mc_{label}_runs"))
    return paths


def run_compare(config):
    """Simulate, integrate on the simulation's sample grid and write the joined table.

    SCM variants with ``scm.handoff`` start the ODEs from the averaged simulation
    state at ``monte_carlo.handoff_time``; the table then begins there.
    """
    out_dir = Path(config.outputs)
    write_manifest(config, out_dir)
    paths = []
    for label, variant in config.variants():
        logger.debug("--- Compare variant: %s ---", label)
        sim = _sim_config(variant)
        result = monte_carlo.run(sim)
        trajectory = _matching_trajectory(variant, result, sim.time_of(sim.sample_every))
        header, rows = compare_table(trajectory, result, config.system)
        paths.append(write_compare_csv(out_dir / f"compare_{label}.csv", header, rows))
        column = header.index("eps_g_diff")
        worst = max((abs(row[column]) for row in rows), default=0.0)
        logger.info("Compare %s: %d sample(s), max |eps_g diff| = %.3e, %s", label, len(rows), worst, _display(paths[-1]))
    return paths


def run_stability(config):
    """Symmetric fixed point report per variant plus the configured drift/decay scans."""
    _require_scm(config, "stability")
    out_dir = Path(config.outputs)
    write_manifest(config, out_dir)
    paths = []
    for label, variant in config.variants():
        model = variant.scm.model()
        report = find_symmetric_fixed_point(model)
        final = final_state_error(model, report)
        text = format_report(report, final)
        name = "stability.txt" if label == "base" else f"stability_{label}.txt"
        paths.append(write_text(out_dir / name, text))
        print(text, end="")
        logger.info("Stability report: %s", _display(paths[-1]))

    scans = config.scans
    template = config.scm.model()
    if scans.drift:
        rows = drift_scan(template, scans.drift, config.integrator, scans.with_plateau)
        paths.append(write_scan_csv(out_dir / "scan_drift.csv", rows))
        logger.info("Drift scan (%d point(s)): %s", len(rows), _display(paths[-1]))
        window = _anomaly_window(rows)
        if window is not None:
            logger.info("eps_final > eps_plateau for delta in [%.4g, %.4g]", *window)
    if scans.decay:
        decay_template = replace(template, delta=_decay_delta(config))
        rows = decay_scan(decay_template, scans.decay, config.integrator, scans.with_plateau)
        paths.append(write_scan_csv(out_dir / "scan_decay.csv", rows))
        logger.info("Decay scan at delta=%g (%d point(s)): %s", decay_template.delta, len(rows), _display(paths[-1]))
    return paths


def run_critical(config):
    """Bisect for the critical drift and/or weight decay and print ``delta_c`` / ``gamma_c``.

    Returns
    -------
    dict[str, float]
        ``{"delta_c": ..., "gamma_c": ...}`` for the requested targets.
    """
    _require_scm(config, "critical")
    scans = config.scans
    model = config.scm.model()
    values = {}
    if "drift" in scans.critical:
        values["delta_c"] = critical_drift(model, bracket=tuple(scans.drift_bracket))
    if "decay" in scans.critical:
        template = replace(model, delta=_decay_delta(config))
        values["gamma_c"] = critical_decay(template, bracket=tuple(scans.decay_bracket))

    text = "".join(f"{key}: {format_float(value)}\n" for key, value in values.items())
    out_dir = Path(config.outputs)
    write_manifest(config, out_dir)
    path = write_text(out_dir / "critical.txt", text)
    print(text, end="")
    logger.info("Critical values: %s", _display(path))
    return values


def run_list_scenarios():
    print(describe_scenarios())


# ------------------------------------------------------------------
# Internal helpers
# ------------------------------------------------------------------


def _ode_job(task):
    """Worker entry point: ``(label, trajectory, error message or None)``."""
    label, config = task
    settings = config.model_settings()
    model = settings.model()
    try:
        if config.system == "lvq":
            trajectory = integrate_lvq(model, LVQ_INIT, settings.t_end, config.integrator)
        else:
            init = seed_specialization(SCM_INIT, settings.seed_strength)
            trajectory = integrate_scm(model, init, settings.t_end, config.integrator)
    except IntegrationDivergedError as exc:
        # The partial trajectory does not survive pickling as part of the exception.
        return label, exc.trajectory, str(exc)
    return label, trajectory, None


def _sim_config(config):
    """Translate a resolved variant into a :class:`SimConfig`.

    SCM settings are rescaled (``delta~ = eta delta``, ``gamma~ = eta gamma``,
    ``alpha~ = eta alpha``), so the unscaled simulation parameters are divided by eta.
    """
    mc = config.monte_carlo
    settings = config.model_settings()
    common = {"n": mc.n, "runs": mc.runs, "seed": config.seed, "sample_every": mc.sample_every}
    if config.system == "lvq":
        model = settings.model()
        return SimConfig(
            system="lvq",
            eta=model.eta,
            steps=round(settings.t_end * mc.n),
            gamma=model.gamma,
            lam=model.lam,
            v1=model.v1,
            v2=model.v2,
            schedule=model.schedule,
            **common,
        )
    return SimConfig(
        system="scm",
        eta=mc.eta,
        steps=round(settings.t_end * mc.n / mc.eta),
        gamma=settings.gamma / mc.eta,
        activation=settings.activation,
        delta=settings.delta / mc.eta,
        **common,
    )


def _matching_trajectory(config, result, interval):
    """ODE solution sampled on the simulation grid (stride = simulation sample interval)."""
    settings = config.model_settings()
    model = settings.model()
    integrator = replace(config.integrator, stride=interval)
    if config.system == "lvq":
        return integrate_lvq(model, LVQ_INIT, settings.t_end, integrator)
    if settings.handoff:
        t_start, init = handoff_state(result, config.monte_carlo.handoff_time)
        logger.debug("ODE hand-off at t=%g: %s", t_start, init)
        return integrate_scm(model, init, settings.t_end, integrator, t_start=t_start)
    return integrate_scm(model, seed_specialization(SCM_INIT, settings.seed_strength), settings.t_end, integrator)


def _decay_delta(config):
    return config.scans.decay_delta if config.scans.decay_delta is not None else config.scm.delta


def _anomaly_window(rows):
    """Smallest and largest scan value where the final state is worse than the plateau."""
    worse = [row.value for row in rows if row.eps_final > row.eps_plateau + 1e-9]
    if not worse:
        return None
    return min(worse), max(worse)


def _require_scm(config, command):
    if config.system != "scm":
        raise ConfigError(f"'{command}' applies to SCM scenarios only; '{config.scenario}' is an {config.system} scenario")


def _display(path):
    try:
        return Path(path).relative_to(Path.cwd())
    except ValueError:
        return path
