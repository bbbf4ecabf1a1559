"""Run configuration: discretization sizes, tolerances, budgets, seeds.

Every numerical knob lives here so that a run is reproducible from one
JSON file.  Tolerances are pinned once and shared by the operations and
by the acceptance suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import jsonschema

from .errors import ConfigError


@dataclass(frozen=True)
class Discretization:
    loop_samples: int = 128          # N: samples per loop in descent/minimax
    index_samples: int = 128         # N used when resampling orbits for index work
    dt_max: float = 2.5e-4           # fixed RK4 step bound (time units)
    min_flow_steps: int = 64
    fourier_max_mode: int = 8        # K: admissible max |mode| in surface data
    path_nodes: int = 32             # m+1 nodes kept in a minimax path
    bott_grid: int = 256             # fine samples of the unit circle for the index function


@dataclass(frozen=True)
class Tolerances:
    energy_rel: float = 1e-8
    grad_descent: float = 1e-6       # weighted-metric gradient norm at minimizers
    period_min: float = 1e-3         # T below this counts as collapsing
    action_collapse: float = 1e-4    # |action| bound required for CollapsedToPoint
    action_ceiling: float = -1e4     # declare Unbounded below this level
    refine_residual: float = 1e-10
    degeneracy_rel: float = 1e-8     # |eigenvalue| <= rel * spectral scale -> marginal
    twist_degeneracy_rel: float = 1e-11  # tighter band off z = 1 (no forced kernel there)
    unit_circle_rel: float = 1e-5    # eigenvalue classification tolerance
    symplectic: float = 1e-7
    capture_grad: float = 2e-2       # gradient norm below which Newton refinement is attempted
    split_eps_base: float = 2.0 * 3.141592653589793 / 1024.0  # splitting-number ladder start
    distinct_c0: float = 1e-5        # C0 distance for "same orbit" (after shift/iteration)
    bracket_width: float = 5e-3      # stop width for critical-value bisections


@dataclass(frozen=True)
class Budgets:
    descend_max_iter: int = 600
    project_every: int = 25          # descent iterations between broken-arc projections
    mountain_pass_sweeps: int = 60
    mountain_pass_stall: int = 12    # sweeps without progress before giving up
    newton_max_iter: int = 30
    seed_trial_periods: int = 5
    mane_probe_widths: int = 8
    deep_loop_max_iter: int = 200


@dataclass(frozen=True)
class RunConfig:
    discretization: Discretization = field(default_factory=Discretization)
    tolerances: Tolerances = field(default_factory=Tolerances)
    budgets: Budgets = field(default_factory=Budgets)
    seed: int = 20240817
    workers: int = 1

    def to_dict(self):
        return asdict(self)


_SECTION_FIELDS = {
    "discretization": Discretization,
    "tolerances": Tolerances,
    "budgets": Budgets,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "surface": {
            "type": "object",
            "properties": {
                "K": {"type": "integer", "minimum": 0},
                "fourier_u": {"type": "array"},
                "fourier_theta_x": {"type": "array"},
                "fourier_theta_y": {"type": "array"},
                "file": {"type": "string"},
                "name": {"type": "string"},
            },
        },
        "kappa": {"type": "number", "exclusiveMinimum": 0},
        "kappa_grid": {"type": "array", "items": {"type": "number"}},
        "n_ladder": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "kappa_window": {"type": "array", "items": {"type": "number"}},
        "orbit_file": {"type": "string"},
        "loop_file": {"type": "string"},
        "flow": {"type": "object"},
        "discretization": {"type": "object"},
        "tolerances": {"type": "object"},
        "budgets": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": True,
}


def validate_config_dict(raw: dict) -> None:
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema violation: {exc.message}") from exc
    for section, cls in _SECTION_FIELDS.items():
        extra = set(raw.get(section, {})) - set(cls.__dataclass_fields__)
        if extra:
            raise ConfigError(f"unknown keys in '{section}': {sorted(extra)}")


def run_config_from_dict(raw: dict) -> RunConfig:
    """Build a RunConfig from a JSON dict, applying defaults for omitted keys."""
    validate_config_dict(raw)
    kwargs = {}
    for section, cls in _SECTION_FIELDS.items():
        kwargs[section] = cls(**raw.get(section, {}))
    if "seed" in raw:
        kwargs["seed"] = raw["seed"]
    if "workers" in raw:
        kwargs["workers"] = raw["workers"]
    return RunConfig(**kwargs)


def load_config(path) -> tuple[RunConfig, dict]:
    """Read a scenario config file; returns (RunConfig, raw dict)."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return run_config_from_dict(raw), raw


DEFAULT = RunConfig()
