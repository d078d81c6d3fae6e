"""Text configuration schemas: scenario descriptions and experiment sweeps.

Configs are JSON.  Parsing is strict: unknown keys are errors (no silently
ignored typos), and every diagnostic names the offending key and its path.

Scenario schema::

    {
      "frequency_hz": 2.8e10,
      "antenna_count": 8,
      "pathloss_exponent": 2.0,          # optional, default 2.0
      "power_budget_dbm": 30.0,
      "cus":     [{"range_m": null, "angle_rad": null, "noise_dbm": -80.0,
                   "sinr_threshold_db": 5.0, "eta": 0.1, "csi": null}, ...],
      "eves":    [{"range_m": ..., "angle_rad": ..., "noise_dbm": ...,
                   "leak_threshold_db": -3.0, "eta": ..., "csi": null}, ...],
      "targets": [{"range_m": 10.0, "angle_rad": -0.7853981633974483,
                   "eta": 0.1, "csi": null}, ...],
      "placement": {"range_min_m": null, "range_max_m": null,
                    "angle_min_rad": -1.0471975511965976,
                    "angle_max_rad":  1.0471975511965976,
                    "max_channel_corr": 0.6}    # optional block
    }

``range_m``/``angle_rad`` may be null (or omitted): the position is then
drawn per seed, uniformly over the placement window, which defaults to radii
in [Fresnel distance, half the Rayleigh distance] and angles in
[-pi/3, pi/3].  Communication-relevant entities (CUs and eavesdroppers) are
redrawn until their true channels are mutually correlated at most
``max_channel_corr``; robust secrecy between effectively colocated terminals
is physically hopeless, so the sampler excludes it.

The optional ``csi`` block pins the channel estimate explicitly (as emitted
by ``nfisac solve`` next to a solution)::

    {"estimate_re": [...], "estimate_im": [...], "error_bound": 0.1}

dB conversions: x_linear = 10**(x_dB/10); dBm to watts = 10**((x_dBm-30)/10).

Experiment schema::

    {
      "scenario": {...as above...},
      "sweep": {"variable": "P0_dbm", "values": [20.0, 25.0, 30.0]},
      "schemes": ["srocr", "sdr"],
      "seeds": [1, 2, 3],
      "mc_samples": 2000,            # optional, default 2000
      "record_walltime": false,      # optional; true breaks byte determinism
      "workers": 1,                  # optional worker-pool size
      "allow_large": false,          # optional; permit antenna_count > 16
      "solver": {"feas_tol": ...},   # optional SolverSettings overrides
      "srocr": {"delta_init": ...}   # optional SrocrSettings overrides
    }

Sweep variables: P0_dbm, N, K, M, target_distance_m, eta_c, eta_e, eta_t,
eta_all.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

SWEEP_VARIABLES = (
    "P0_dbm",
    "N",
    "K",
    "M",
    "target_distance_m",
    "eta_c",
    "eta_e",
    "eta_t",
    "eta_all",
)

SCHEME_NAMES = ("srocr", "sdr", "info_only", "far_field", "perfect_csi")


class ConfigError(ValueError):
    """Schema violation; the message names the offending key/path."""


def _require(obj, key, path, types, optional=False, default=None):
    if key not in obj:
        if optional:
            return default
        raise ConfigError(f"missing key '{key}' at {path}")
    val = obj[key]
    if val is None and optional:
        return default
    if not isinstance(val, types):
        tn = "/".join(t.__name__ for t in (types if isinstance(types, tuple) else (types,)))
        raise ConfigError(f"key '{key}' at {path} must be {tn}")
    return val


def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path} must be an object")
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}' at {path}")


@dataclass
class CsiConfig:
    estimate_re: list
    estimate_im: list
    error_bound: float


@dataclass
class CuConfig:
    noise_dbm: float
    sinr_threshold_db: float
    eta: float
    range_m: float | None = None
    angle_rad: float | None = None
    csi: CsiConfig | None = None


@dataclass
class EveConfig:
    noise_dbm: float
    leak_threshold_db: float
    eta: float
    range_m: float | None = None
    angle_rad: float | None = None
    csi: CsiConfig | None = None


@dataclass
class TargetConfig:
    eta: float
    range_m: float | None = None
    angle_rad: float | None = None
    csi: CsiConfig | None = None


@dataclass
class PlacementConfig:
    range_min_m: float | None = None
    range_max_m: float | None = None
    angle_min_rad: float = -math.pi / 3
    angle_max_rad: float = math.pi / 3
    max_channel_corr: float = 0.6


@dataclass
class ScenarioConfig:
    frequency_hz: float
    antenna_count: int
    power_budget_dbm: float
    pathloss_exponent: float = 2.0
    cus: list = field(default_factory=list)
    eves: list = field(default_factory=list)
    targets: list = field(default_factory=list)
    placement: PlacementConfig = field(default_factory=PlacementConfig)


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig
    sweep_variable: str
    sweep_values: list
    schemes: list
    seeds: list
    mc_samples: int = 2000
    record_walltime: bool = False
    workers: int = 1
    allow_large: bool = False
    solver_overrides: dict = field(default_factory=dict)
    srocr_overrides: dict = field(default_factory=dict)


def _parse_csi(obj, path) -> CsiConfig | None:
    if obj is None:
        return None
    _check_keys(obj, {"estimate_re", "estimate_im", "error_bound"}, path)
    re = _require(obj, "estimate_re", path, list)
    im = _require(obj, "estimate_im", path, list)
    eb = float(_require(obj, "error_bound", path, (int, float)))
    if len(re) != len(im):
        raise ConfigError(f"estimate_re/estimate_im length mismatch at {path}")
    if eb < 0:
        raise ConfigError(f"error_bound at {path} must be nonnegative")
    return CsiConfig([float(x) for x in re], [float(x) for x in im], eb)


def _parse_entity(obj, path, cls, extra_keys):
    allowed = {"range_m", "angle_rad", "eta", "csi"} | set(extra_keys)
    _check_keys(obj, allowed, path)
    kwargs = {
        "range_m": _require(obj, "range_m", path, (int, float), optional=True),
        "angle_rad": _require(obj, "angle_rad", path, (int, float), optional=True),
        "eta": float(_require(obj, "eta", path, (int, float))),
        "csi": _parse_csi(obj.get("csi"), f"{path}.csi"),
    }
    for key in extra_keys:
        kwargs[key] = float(_require(obj, key, path, (int, float)))
    if kwargs["range_m"] is not None:
        kwargs["range_m"] = float(kwargs["range_m"])
    if kwargs["angle_rad"] is not None:
        kwargs["angle_rad"] = float(kwargs["angle_rad"])
    if not 0.0 <= kwargs["eta"] < 1.0:
        raise ConfigError(f"eta at {path} must lie in [0, 1)")
    return cls(**kwargs)


def parse_scenario_dict(obj, path="scenario") -> ScenarioConfig:
    _check_keys(
        obj,
        {
            "frequency_hz",
            "antenna_count",
            "pathloss_exponent",
            "power_budget_dbm",
            "cus",
            "eves",
            "targets",
            "placement",
        },
        path,
    )
    cfg = ScenarioConfig(
        frequency_hz=float(_require(obj, "frequency_hz", path, (int, float))),
        antenna_count=int(_require(obj, "antenna_count", path, int)),
        power_budget_dbm=float(_require(obj, "power_budget_dbm", path, (int, float))),
        pathloss_exponent=float(
            _require(obj, "pathloss_exponent", path, (int, float), optional=True, default=2.0)
        ),
    )
    if cfg.frequency_hz <= 0:
        raise ConfigError(f"frequency_hz at {path} must be positive")
    if cfg.antenna_count < 1:
        raise ConfigError(f"antenna_count at {path} must be >= 1")
    cus = _require(obj, "cus", path, list)
    if not cus:
        raise ConfigError(f"need at least one entry in '{path}.cus'")
    cfg.cus = [
        _parse_entity(e, f"{path}.cus[{i}]", CuConfig, ("noise_dbm", "sinr_threshold_db"))
        for i, e in enumerate(cus)
    ]
    cfg.eves = [
        _parse_entity(e, f"{path}.eves[{i}]", EveConfig, ("noise_dbm", "leak_threshold_db"))
        for i, e in enumerate(_require(obj, "eves", path, list, optional=True, default=[]))
    ]
    cfg.targets = [
        _parse_entity(e, f"{path}.targets[{i}]", TargetConfig, ())
        for i, e in enumerate(_require(obj, "targets", path, list, optional=True, default=[]))
    ]
    pl = obj.get("placement")
    if pl is not None:
        _check_keys(
            pl,
            {"range_min_m", "range_max_m", "angle_min_rad", "angle_max_rad", "max_channel_corr"},
            f"{path}.placement",
        )
        cfg.placement = PlacementConfig(
            range_min_m=_require(pl, "range_min_m", path, (int, float), optional=True),
            range_max_m=_require(pl, "range_max_m", path, (int, float), optional=True),
            angle_min_rad=float(
                _require(pl, "angle_min_rad", path, (int, float), optional=True, default=-math.pi / 3)
            ),
            angle_max_rad=float(
                _require(pl, "angle_max_rad", path, (int, float), optional=True, default=math.pi / 3)
            ),
            max_channel_corr=float(
                _require(pl, "max_channel_corr", path, (int, float), optional=True, default=0.6)
            ),
        )
    return cfg


def parse_scenario_config(text: str) -> ScenarioConfig:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return parse_scenario_dict(obj)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate an experiment configuration."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    _check_keys(
        obj,
        {
            "scenario",
            "sweep",
            "schemes",
            "seeds",
            "mc_samples",
            "record_walltime",
            "workers",
            "allow_large",
            "solver",
            "srocr",
        },
        "config",
    )
    scenario = parse_scenario_dict(_require(obj, "scenario", "config", dict))
    sweep = _require(obj, "sweep", "config", dict)
    _check_keys(sweep, {"variable", "values"}, "config.sweep")
    variable = _require(sweep, "variable", "config.sweep", str)
    if variable not in SWEEP_VARIABLES:
        raise ConfigError(
            f"unknown sweep variable '{variable}'; choose from {SWEEP_VARIABLES}"
        )
    values = _require(sweep, "values", "config.sweep", list)
    if not values:
        raise ConfigError("config.sweep.values must be nonempty")
    values = [float(v) for v in values]
    schemes = _require(obj, "schemes", "config", list)
    if not schemes:
        raise ConfigError("config.schemes must be nonempty")
    for s in schemes:
        if s not in SCHEME_NAMES:
            raise ConfigError(f"unknown scheme '{s}'; choose from {SCHEME_NAMES}")
    seeds = _require(obj, "seeds", "config", list)
    if not seeds:
        raise ConfigError("config.seeds must be nonempty")
    seeds = [int(s) for s in seeds]
    if len(set(seeds)) != len(seeds):
        raise ConfigError("config.seeds must be distinct")
    solver_overrides = _require(obj, "solver", "config", dict, optional=True, default={})
    srocr_overrides = _require(obj, "srocr", "config", dict, optional=True, default={})
    for key in solver_overrides:
        if key not in _SOLVER_FIELDS:
            raise ConfigError(f"unknown key '{key}' at config.solver")
    for key in srocr_overrides:
        if key not in _SROCR_FIELDS:
            raise ConfigError(f"unknown key '{key}' at config.srocr")
    return ExperimentConfig(
        scenario=scenario,
        sweep_variable=variable,
        sweep_values=values,
        schemes=[str(s) for s in schemes],
        seeds=seeds,
        mc_samples=int(_require(obj, "mc_samples", "config", int, optional=True, default=2000)),
        record_walltime=bool(
            _require(obj, "record_walltime", "config", bool, optional=True, default=False)
        ),
        workers=int(_require(obj, "workers", "config", int, optional=True, default=1)),
        allow_large=bool(
            _require(obj, "allow_large", "config", bool, optional=True, default=False)
        ),
        solver_overrides=dict(solver_overrides),
        srocr_overrides=dict(srocr_overrides),
    )


def _settings_fields(cls):
    return {f.name for f in dataclasses.fields(cls)}


from .sdp.solver import SolverSettings as _SS  # noqa: E402  (field list only)
from .srocr import SrocrSettings as _RS  # noqa: E402

_SOLVER_FIELDS = _settings_fields(_SS)
_SROCR_FIELDS = _settings_fields(_RS)


def apply_sweep_value(cfg: ScenarioConfig, variable: str, value: float) -> ScenarioConfig:
    """New scenario config with one sweep variable applied."""
    out = dataclasses.replace(cfg)
    out.cus = [dataclasses.replace(c) for c in cfg.cus]
    out.eves = [dataclasses.replace(e) for e in cfg.eves]
    out.targets = [dataclasses.replace(t) for t in cfg.targets]
    if variable == "P0_dbm":
        out.power_budget_dbm = float(value)
    elif variable == "N":
        out.antenna_count = int(round(value))
    elif variable == "K":
        out.cus = _resize(out.cus, int(round(value)), "cus")
    elif variable == "M":
        out.targets = _resize(out.targets, int(round(value)), "targets")
    elif variable == "target_distance_m":
        for t in out.targets:
            t.range_m = float(value)
    elif variable == "eta_c":
        for c in out.cus:
            c.eta = float(value)
    elif variable == "eta_e":
        for e in out.eves:
            e.eta = float(value)
    elif variable == "eta_t":
        for t in out.targets:
            t.eta = float(value)
    elif variable == "eta_all":
        for ent in (*out.cus, *out.eves, *out.targets):
            ent.eta = float(value)
    else:
        raise ConfigError(f"unknown sweep variable '{variable}'")
    return out


def _resize(entities, count, name):
    if count < 1:
        raise ConfigError(f"swept {name} count must be >= 1")
    if count <= len(entities):
        return entities[:count]
    out = list(entities)
    while len(out) < count:
        out.append(dataclasses.replace(entities[-1]))
    return out


def scenario_config_to_dict(cfg: ScenarioConfig) -> dict:
    """Inverse of parse_scenario_dict (for writing scenario_used.json)."""

    def ent(e, extra):
        d = {"range_m": e.range_m, "angle_rad": e.angle_rad, "eta": e.eta}
        d.update(extra)
        if e.csi is not None:
            d["csi"] = {
                "estimate_re": list(e.csi.estimate_re),
                "estimate_im": list(e.csi.estimate_im),
                "error_bound": e.csi.error_bound,
            }
        return d

    return {
        "frequency_hz": cfg.frequency_hz,
        "antenna_count": cfg.antenna_count,
        "pathloss_exponent": cfg.pathloss_exponent,
        "power_budget_dbm": cfg.power_budget_dbm,
        "cus": [
            ent(c, {"noise_dbm": c.noise_dbm, "sinr_threshold_db": c.sinr_threshold_db})
            for c in cfg.cus
        ],
        "eves": [
            ent(e, {"noise_dbm": e.noise_dbm, "leak_threshold_db": e.leak_threshold_db})
            for e in cfg.eves
        ],
        "targets": [ent(t, {}) for t in cfg.targets],
        "placement": {
            "range_min_m": cfg.placement.range_min_m,
            "range_max_m": cfg.placement.range_max_m,
            "angle_min_rad": cfg.placement.angle_min_rad,
            "angle_max_rad": cfg.placement.angle_max_rad,
            "max_channel_corr": cfg.placement.max_channel_corr,
        },
    }
