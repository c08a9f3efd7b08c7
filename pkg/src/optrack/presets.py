"""Named experiment presets.

``reference`` is the full benchmark (30 agents, a million iterations);
``reference-desk`` is the same experiment at desk scale.  ``static-sanity``
strips the problem down to static costs with learning disabled, which must
converge to machine precision.  ``rls-rate`` and ``conservation-audit`` are
study presets handled by :mod:`optrack.studies` rather than a single run.
"""

from __future__ import annotations

RUN_PRESETS: dict[str, dict] = {
    "reference": {
        "N": 30,
        "n": 3,
        "T": 1_000_000,
        "alpha": 0.01,
        "eta": 1e4,
        "mu": 1.5,
        "seed": 1,
        "topology": {"kind": "erdos_renyi", "p": 0.2},
        "scenario": {"kind": "benchmark", "noise_variance": 0.2},
    },
    "reference-desk": {
        "N": 10,
        "n": 3,
        "T": 100_000,
        "alpha": 0.01,
        "eta": 1e4,
        "mu": 1.5,
        "seed": 1,
        "topology": {"kind": "erdos_renyi", "p": 0.2},
        "scenario": {"kind": "benchmark", "noise_variance": 0.2},
    },
    # L = N*L_V + mu*sum(L_i) = 5*2 + 1.5*10 = 25, so alpha = (N/L)/4 = 0.05
    "static-sanity": {
        "N": 5,
        "n": 2,
        "T": 5_000,
        "alpha": 0.05,
        "mu": 1.5,
        "seed": 1,
        "log_interval": 1,
        "learning_enabled": False,
        "oracle_estimates": True,
        "static_time": True,
        "topology": {"kind": "ring"},
        "scenario": {"kind": "static"},
    },
}

STUDY_PRESETS = ("rls-rate", "conservation-audit")


def get_preset(name: str) -> dict:
    """Config dict for a run preset (copied, safe to mutate)."""
    if name not in RUN_PRESETS:
        raise KeyError(
            f"unknown preset {name!r}; run presets: {sorted(RUN_PRESETS)}, "
            f"study presets: {sorted(STUDY_PRESETS)}"
        )
    import copy

    return copy.deepcopy(RUN_PRESETS[name])
