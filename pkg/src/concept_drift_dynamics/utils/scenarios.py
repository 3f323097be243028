"""Central scenario registry for experiment presets.

All preset definitions live here. The config loader starts from these
settings, applies file overrides and then CLI flags.

Each scenario entry contains:
    description : str  -- Japanese description for display.
    system      : str  -- "lvq" or "scm".
    sections    : dict -- partial config sections (lvq, scm, integrator,
                          monte_carlo, scans, sweep) overriding the defaults.
"""

_LVQ_INTEGRATOR = {"step": 0.01, "stride": 0.5}
_LVQ_MONTE_CARLO = {"n": 100, "runs": 100, "sample_every": 50}
_SCM_INTEGRATOR = {"step": 0.001, "stride": 0.5}
_SCM_MONTE_CARLO = {"n": 500, "eta": 0.05, "runs": 10, "sample_every": 500}
_SCAN_INTEGRATOR = {"step": 0.02, "stride": 0.1}

SCENARIOS = {
    "fig1": {
        "description": "LVQ1: クラス事前確率の線形増加 (alpha_o=20, alpha_end=200, p_max=0.8), gamma=0 と 0.05",
        "system": "lvq",
        "sections": {
            "lvq": {"schedule": {"kind": "linear", "alpha_o": 20.0, "alpha_end": 200.0, "p_max": 0.8}, "t_end": 300.0},
            "integrator": _LVQ_INTEGRATOR,
            "monte_carlo": _LVQ_MONTE_CARLO,
            "sweep": {"key": "gamma", "values": [0.0, 0.05]},
        },
    },
    "fig1-text": {
        "description": "fig1 と同条件で本文の値 alpha_o=25 を使用",
        "system": "lvq",
        "sections": {
            "lvq": {"schedule": {"kind": "linear", "alpha_o": 25.0, "alpha_end": 200.0, "p_max": 0.8}, "t_end": 300.0},
            "integrator": _LVQ_INTEGRATOR,
            "monte_carlo": _LVQ_MONTE_CARLO,
            "sweep": {"key": "gamma", "values": [0.0, 0.05]},
        },
    },
    "fig2": {
        "description": "LVQ1: クラス事前確率の急変 (alpha_o=100, p_max=0.75)",
        "system": "lvq",
        "sections": {
            "lvq": {"schedule": {"kind": "sudden", "alpha_o": 100.0, "p_max": 0.75}, "t_end": 200.0},
            "integrator": _LVQ_INTEGRATOR,
            "monte_carlo": _LVQ_MONTE_CARLO,
            "sweep": {"key": "gamma", "values": [0.0, 0.05]},
        },
    },
    "fig3": {
        "description": "LVQ1: クラス事前確率の周期変動 (T=50, p_max=0.8)",
        "system": "lvq",
        "sections": {
            "lvq": {"schedule": {"kind": "oscillating", "period": 50.0, "p_max": 0.8}, "t_end": 300.0},
            "integrator": _LVQ_INTEGRATOR,
            "monte_carlo": _LVQ_MONTE_CARLO,
            "sweep": {"key": "gamma", "values": [0.0, 0.05]},
        },
    },
    "fig4a": {
        "description": "Erf-SCM: 教師ドリフト下の学習曲線 (delta~ = 0, 0.01, 0.02, 0.05)",
        "system": "scm",
        "sections": {
            "scm": {"activation": "erf", "t_end": 400.0, "handoff": True},
            "integrator": _SCM_INTEGRATOR,
            "monte_carlo": _SCM_MONTE_CARLO,
            "sweep": {"key": "delta", "values": [0.0, 0.01, 0.02, 0.05]},
        },
    },
    "fig4b": {
        "description": "ReLU-SCM: 教師ドリフト下の学習曲線 (delta~ = 0, 0.05, 0.1, 0.3)",
        "system": "scm",
        "sections": {
            "scm": {"activation": "relu", "t_end": 200.0, "handoff": True},
            "integrator": _SCM_INTEGRATOR,
            "monte_carlo": _SCM_MONTE_CARLO,
            "sweep": {"key": "delta", "values": [0.0, 0.05, 0.1, 0.3]},
        },
    },
    "fig5": {
        "description": "Erf-SCM: プラトー/最終状態の汎化誤差とプラトー長 (ドリフト走査, delta~=0.03 での減衰走査)",
        "system": "scm",
        "sections": {
            "scm": {"activation": "erf"},
            "integrator": _SCAN_INTEGRATOR,
            "scans": {
                "drift": [0.0, 0.01, 0.02, 0.03, 0.036, 0.04, 0.045, 0.05, 0.055, 0.06, 0.07, 0.08],
                "decay": [0.0, 0.002, 0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.04],
                "decay_delta": 0.03,
            },
        },
    },
    "fig6": {
        "description": "ReLU-SCM: プラトー/最終状態の汎化誤差とプラトー長 (ドリフト走査, delta~=0.2 での減衰走査)",
        "system": "scm",
        "sections": {
            "scm": {"activation": "relu"},
            "integrator": _SCAN_INTEGRATOR,
            "scans": {
                "drift": [0.0, 0.025, 0.05, 0.1, 0.15, 0.2, 0.22, 0.25, 0.3],
                "decay": [0.0, 0.01, 0.02, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.1, 1.2],
                "decay_delta": 0.2,
            },
        },
    },
}


def scenario_for_activation(activation):
    """Scan preset matching an SCM activation (used when ``critical`` gets no scenario)."""
    return "fig6" if activation == "relu" else "fig5"


def describe_scenarios():
    """Return one ``name : description`` line per preset."""
    width = max(len(name) for name in SCENARIOS)
    return "\n".join(f"{name.ljust(width)} : [{info['system']}] {info['description']}" for name, info in SCENARIOS.items())
