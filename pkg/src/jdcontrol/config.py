"""Run configuration: INI-style files with per-experiment defaults.

A config file is ``key = value`` pairs grouped in sections mirroring the run
structure (grid, control, dynamics, jump, time, cost, ensemble, optimizer,
initial, adjoint, stabilization, output).  The experiment tag selects
defaults for everything the experiments pin down; the physical essentials
(jump.beta, jump.gamma, time.t_final, time.n_t_u, ensemble.n_particles) must
be stated explicitly.  Validation reports every violated invariant at once,
each with its ``section.key`` path.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

EXPERIMENTS = (
    "centering-gaussian",
    "centering-uniform",
    "stabilization",
    "trajectory",
    "coupled",
    "trajectory-free",
)


@dataclass
class RunConfig:
    experiment: str

    # grid
    x_max: float = 2.0
    v_max: float = 2.0
    n_x: int = 10
    n_v: int = 10

    # control
    eps_phi: float = 0.5
    alpha: float = 0.01

    # dynamics
    kind: str = "harmonic"
    eta: float = 1.0
    omega: float = 0.0
    b1: float = 0.1
    b2: float = 0.1

    # jump (required in file)
    beta: float | None = None
    gamma: float | None = None

    # time (required in file)
    t_final: float | None = None
    n_t_u: int | None = None

    # cost
    cost_kind: str = "tracking"
    sigma_j: float = 0.5
    a_x: float = 1.5
    a_v: float = 1.7071067811865475
    desired: str = "constant"
    desired_x: float = 0.0
    desired_v: float = 0.0
    desired_table: str | None = None

    # ensemble (n_particles required in file)
    n_particles: int | None = None
    master_seed: int = 1234
    workers: int = 1

    # optimizer
    zeta0: float = 50.0
    backtrack_factor: float = 0.5
    c_armijo: float = 1e-4
    max_backtracks: int = 30
    tol: float = 1e-8
    n_max: int = 25

    # initial law
    law: str = "gaussian"
    mean_x: float = 0.0
    mean_v: float = 0.0
    var: float = 0.01
    x_lo: float = -1.0
    x_hi: float = 1.0
    v_lo: float = -1.0
    v_hi: float = 1.0
    mode1_x: float = 1.5
    mode1_v: float = 1.5
    mode2_x: float = -1.5
    mode2_v: float = -1.5
    mode_var: float = 0.04
    weight1: float = 0.5
    weight2: float = 0.2
    weight_uniform: float = 0.3

    # adjoint
    adjoint_mode: str = "exact"
    surrogate_sigma0: float | None = None
    surrogate_slope: float | None = None

    # stabilization
    control_in: str | None = None

    # output
    out_dir: str = "out"
    dump_paths: bool = False


# configuration schema: section -> {key: (attribute, converter)}
def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


_SCHEMA: dict[str, dict[str, tuple[str, type | object]]] = {
    "experiment": {"name": ("experiment", str)},
    "grid": {
        "x_max": ("x_max", float),
        "v_max": ("v_max", float),
        "n_x": ("n_x", int),
        "n_v": ("n_v", int),
    },
    "control": {"eps_phi": ("eps_phi", float), "alpha": ("alpha", float)},
    "dynamics": {
        "kind": ("kind", str),
        "eta": ("eta", float),
        "omega": ("omega", float),
        "b1": ("b1", float),
        "b2": ("b2", float),
    },
    "jump": {"beta": ("beta", float), "gamma": ("gamma", float)},
    "time": {"t_final": ("t_final", float), "n_t_u": ("n_t_u", int)},
    "cost": {
        "kind": ("cost_kind", str),
        "sigma_j": ("sigma_j", float),
        "a_x": ("a_x", float),
        "a_v": ("a_v", float),
        "desired": ("desired", str),
        "desired_x": ("desired_x", float),
        "desired_v": ("desired_v", float),
        "desired_table": ("desired_table", str),
    },
    "ensemble": {
        "n_particles": ("n_particles", int),
        "master_seed": ("master_seed", int),
        "workers": ("workers", int),
    },
    "optimizer": {
        "zeta0": ("zeta0", float),
        "backtrack_factor": ("backtrack_factor", float),
        "c_armijo": ("c_armijo", float),
        "max_backtracks": ("max_backtracks", int),
        "tol": ("tol", float),
        "n_max": ("n_max", int),
    },
    "initial": {
        "law": ("law", str),
        "mean_x": ("mean_x", float),
        "mean_v": ("mean_v", float),
        "var": ("var", float),
        "x_lo": ("x_lo", float),
        "x_hi": ("x_hi", float),
        "v_lo": ("v_lo", float),
        "v_hi": ("v_hi", float),
        "mode1_x": ("mode1_x", float),
        "mode1_v": ("mode1_v", float),
        "mode2_x": ("mode2_x", float),
        "mode2_v": ("mode2_v", float),
        "mode_var": ("mode_var", float),
        "weight1": ("weight1", float),
        "weight2": ("weight2", float),
        "weight_uniform": ("weight_uniform", float),
    },
    "adjoint": {
        "mode": ("adjoint_mode", str),
        "sigma0": ("surrogate_sigma0", float),
        "slope": ("surrogate_slope", float),
    },
    "stabilization": {"control_in": ("control_in", str)},
    "output": {"directory": ("out_dir", str), "dump_paths": ("dump_paths", _bool)},
}

_REQUIRED = (
    ("jump", "beta"),
    ("jump", "gamma"),
    ("time", "t_final"),
    ("time", "n_t_u"),
    ("ensemble", "n_particles"),
)

# experiment-specific defaults applied before file values
_EXPERIMENT_DEFAULTS: dict[str, dict[str, object]] = {
    "centering-gaussian": {
        "kind": "harmonic",
        "eta": 1.0,
        "eps_phi": 0.5,
        "cost_kind": "tracking",
        "desired": "constant",
        "desired_x": 0.0,
        "desired_v": 0.0,
        "law": "gaussian",
        "mean_x": 0.75,
        "mean_v": 0.75,
        "var": 0.01,
    },
    "centering-uniform": {
        "kind": "harmonic",
        "eta": 1.0,
        "eps_phi": 0.5,
        "cost_kind": "tracking",
        "desired": "constant",
        "desired_x": 0.0,
        "desired_v": 0.0,
        "law": "uniform",
        "x_lo": -1.0,
        "x_hi": 1.0,
        "v_lo": -1.0,
        "v_hi": 1.0,
    },
    "stabilization": {
        "kind": "harmonic",
        "eta": 1.0,
        "eps_phi": 0.5,
        "cost_kind": "tracking",
        "desired": "constant",
        "law": "bimodal_uniform",
        "n_max": 0,
    },
    "trajectory": {
        "kind": "free",
        "eta": 0.0,
        "eps_phi": 0.1,
        "cost_kind": "tracking",
        "desired": "ramp",
        "law": "gaussian",
        "mean_x": -1.0,
        "mean_v": 1.0,
        "var": 0.01,
    },
    "coupled": {
        "kind": "coupled",
        "eta": 1.0,
        "omega": 0.5,
        "eps_phi": 0.5,
        "cost_kind": "ellipse",
        "a_x": 1.5,
        "a_v": 1.7071067811865475,
        "law": "ellipse",
    },
    "trajectory-free": {
        "kind": "free",
        "eta": 0.0,
        "eps_phi": 0.1,
        "cost_kind": "tracking",
        "desired": "ramp",
        "law": "gaussian",
        "mean_x": -1.0,
        "mean_v": 1.0,
        "var": 0.01,
        "adjoint_mode": "surrogate",
    },
}

_FIELD_TO_PATH = {
    attr: f"{section}.{key}"
    for section, keys in _SCHEMA.items()
    for key, (attr, _) in keys.items()
}


def parse_config(path, experiment: str | None = None) -> RunConfig:
    """Read and validate a run configuration file.

    ``experiment`` (e.g. from the CLI) overrides the file's experiment tag.
    Raises :class:`ConfigError` listing every problem found.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc

    errors: list[str] = []
    raw: dict[str, str] = {}
    present: set[tuple[str, str]] = set()
    for section in parser.sections():
        if section not in _SCHEMA:
            errors.append(f"unknown section [{section}]")
            continue
        for key, value in parser.items(section):
            if key not in _SCHEMA[section]:
                errors.append(f"unknown key {section}.{key}")
                continue
            present.add((section, key))
            raw[f"{section}.{key}"] = value

    name = experiment or raw.get("experiment.name")
    if name is None:
        errors.append("experiment.name missing (or pass the experiment on the CLI)")
    elif name not in EXPERIMENTS:
        errors.append(f"experiment.name: unknown experiment {name!r}; choose from {EXPERIMENTS}")

    for section, key in _REQUIRED:
        if (section, key) not in present:
            errors.append(f"{section}.{key} is required")

    if errors and name not in EXPERIMENTS:
        raise ConfigError(f"invalid config {path}: " + "; ".join(errors))

    config = RunConfig(experiment=name)
    for attr, value in _EXPERIMENT_DEFAULTS[name].items():
        setattr(config, attr, value)
    for section, key in sorted(present):
        attr, conv = _SCHEMA[section][key]
        try:
            setattr(config, attr, conv(raw[f"{section}.{key}"]))
        except ValueError as exc:
            errors.append(f"{section}.{key}: {exc}")
    if experiment is not None:
        config.experiment = experiment

    errors.extend(validate(config))
    if errors:
        raise ConfigError(f"invalid config {path}: " + "; ".join(errors))
    return config


def validate(config: RunConfig) -> list[str]:
    """All violated invariants of a RunConfig, as ``section.key: problem`` strings."""
    errors: list[str] = []

    def bad(attr: str, message: str) -> None:
        errors.append(f"{_FIELD_TO_PATH.get(attr, attr)}: {message}")

    if config.x_max <= 0:
        bad("x_max", "must be positive")
    if config.v_max <= 0:
        bad("v_max", "must be positive")
    if config.n_x < 2:
        bad("n_x", "must be >= 2")
    if config.n_v < 2:
        bad("n_v", "must be >= 2")
    if config.eps_phi <= 0:
        bad("eps_phi", "must be positive")
    if config.alpha <= 0:
        bad("alpha", "must be positive")
    if config.kind not in ("free", "harmonic", "coupled"):
        bad("kind", f"unknown dynamics kind {config.kind!r}")
    if config.b1 < 0 or config.b2 < 0:
        bad("b1", "diffusion coefficients must be nonnegative")
    if config.beta is not None and config.beta <= 0:
        bad("beta", "must be positive")
    if config.gamma is not None and not -1.0 <= config.gamma <= 1.0:
        bad("gamma", "must lie in [-1, 1]")
    if config.t_final is not None and config.t_final <= 0:
        bad("t_final", "must be positive")
    if config.n_t_u is not None and config.n_t_u < 1:
        bad("n_t_u", "must be >= 1")
    if config.cost_kind not in ("tracking", "ellipse"):
        bad("cost_kind", f"unknown cost kind {config.cost_kind!r}")
    if config.sigma_j <= 0:
        bad("sigma_j", "must be positive")
    if config.cost_kind == "ellipse" and (config.a_x <= 0 or config.a_v <= 0):
        bad("a_x", "ellipse semi-axes must be positive")
    if config.desired not in ("constant", "ramp", "tabulated"):
        bad("desired", f"unknown desired-trajectory kind {config.desired!r}")
    if config.desired == "tabulated" and not config.desired_table:
        bad("desired_table", "tabulated target requires a table path")
    if config.n_particles is not None and config.n_particles < 1:
        bad("n_particles", "must be >= 1")
    if config.kind == "coupled" and config.n_particles is not None and config.n_particles < 2:
        bad("n_particles", "coupled dynamics require at least 2 particles")
    if config.master_seed < 0:
        bad("master_seed", "must be nonnegative")
    if config.workers < 1:
        bad("workers", "must be >= 1")
    if config.zeta0 <= 0:
        bad("zeta0", "must be positive")
    if not 0.0 < config.backtrack_factor < 1.0:
        bad("backtrack_factor", "must lie in (0, 1)")
    if config.c_armijo <= 0:
        bad("c_armijo", "must be positive")
    if config.max_backtracks < 0:
        bad("max_backtracks", "must be nonnegative")
    if config.tol < 0:
        bad("tol", "must be nonnegative")
    if config.n_max < 0:
        bad("n_max", "must be nonnegative")
    if config.law not in ("gaussian", "uniform", "bimodal_uniform", "ellipse"):
        bad("law", f"unknown initial law {config.law!r}")
    if config.law == "gaussian" and config.var <= 0:
        bad("var", "must be positive")
    if config.law == "uniform" and (config.x_lo >= config.x_hi or config.v_lo >= config.v_hi):
        bad("x_lo", "uniform box must have lo < hi in both coordinates")
    if config.law == "bimodal_uniform":
        weights = (config.weight1, config.weight2, config.weight_uniform)
        if any(w < 0 for w in weights) or not np.isclose(sum(weights), 1.0):
            bad("weight1", "mixture weights must be nonnegative and sum to 1")
        if config.mode_var <= 0:
            bad("mode_var", "must be positive")
    if config.adjoint_mode not in ("exact", "surrogate"):
        bad("adjoint_mode", f"unknown adjoint mode {config.adjoint_mode!r}")
    if config.adjoint_mode == "surrogate" and config.cost_kind != "tracking":
        bad("adjoint_mode", "surrogate mode requires a tracking cost")
    if config.surrogate_sigma0 is not None and config.surrogate_sigma0 < 0:
        bad("surrogate_sigma0", "must be nonnegative")
    if config.surrogate_slope is not None and config.surrogate_slope < 0:
        bad("surrogate_slope", "must be nonnegative")
    if config.experiment == "stabilization" and not config.control_in:
        bad("control_in", "stabilization requires a saved control to average")
    if (
        config.n_t_u is not None
        and config.kind == "coupled"
        and config.adjoint_mode == "surrogate"
    ):
        bad("adjoint_mode", "surrogate mode is not available for coupled dynamics")
    return errors


def write_config(config: RunConfig, path) -> None:
    """Serialize a RunConfig back to the INI layout (used by tests/tooling)."""
    parser = configparser.ConfigParser()
    for section, keys in _SCHEMA.items():
        values = {}
        for key, (attr, _) in keys.items():
            val = getattr(config, attr)
            if val is None:
                continue
            values[key] = str(val)
        if values:
            parser[section] = values
    with open(path, "w") as fh:
        parser.write(fh)
