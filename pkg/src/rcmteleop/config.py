"""YAML session config and scenario files.

A session config aggregates everything one run or live session needs: the
controller parameters, tool geometry, jaw model, channel geometry, loop
rate, telemetry decimation, and the safety/staleness windows.  Scenario
files add a timestamped command script, tremor model, and seeds, and may
carry partial config overrides under a ``config`` key.

Precedence, lowest to highest: built-in defaults, scenario-inline config,
--config file, individual CLI flags.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from .controller import ControllerConfig, ToolGeometry
from .simulator import (
    JawModel,
    LaryngoscopeChannel,
    Scenario,
    ScenarioError,
    ScriptEvent,
    TremorModel,
)
from .spatial import RigidTransform


class ConfigError(ValueError):
    """Config file missing, unparseable, or holding invalid values."""


@dataclass(frozen=True)
class SessionConfig:
    rate: float = 1000.0
    telemetry_decimation: int = 16
    debounce_window: float = 0.05
    staleness_horizon: float = 0.2
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    geometry: ToolGeometry = field(default_factory=ToolGeometry)
    jaw: JawModel = field(default_factory=JawModel)
    channel: LaryngoscopeChannel = field(default_factory=LaryngoscopeChannel)

    def __post_init__(self):
        if not (100.0 <= self.rate <= 2000.0):
            raise ConfigError(f"rate must be in [100, 2000] Hz, got {self.rate}")
        if self.telemetry_decimation < 1:
            raise ConfigError("telemetry_decimation must be >= 1")
        if self.debounce_window < 0.0:
            raise ConfigError("debounce_window must be nonnegative")
        if self.staleness_horizon <= 0.0:
            raise ConfigError("staleness_horizon must be positive")


def default_config() -> SessionConfig:
    return SessionConfig()


def _expect_mapping(obj, what):
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise ConfigError(f"{what} must be a mapping, got {type(obj).__name__}")
    return obj


def _transform_from_dict(d, what):
    d = _expect_mapping(d, what)
    rotation = np.asarray(d.get("rotation", np.eye(3)), dtype=np.float64)
    translation = np.asarray(d.get("translation", np.zeros(3)), dtype=np.float64)
    try:
        return RigidTransform(rotation, translation)
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def _build(cls, section, what, transforms=()):
    """Construct a config dataclass from a mapping, with friendly errors."""
    section = _expect_mapping(section, what)
    kwargs = {}
    names = {f.name for f in cls.__dataclass_fields__.values()}
    for key, value in section.items():
        if key not in names:
            raise ConfigError(f"{what}: unknown key {key!r}")
        if key in transforms:
            value = _transform_from_dict(value, f"{what}.{key}")
        elif isinstance(value, list):
            value = np.asarray(value, dtype=np.float64) if key != "band" else tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{what}: {exc}") from None


def config_to_dict(cfg: SessionConfig) -> dict:
    """Plain-data form of a session config (JSON/YAML serializable)."""
    return {
        "rate": cfg.rate,
        "telemetry_decimation": cfg.telemetry_decimation,
        "debounce_window": cfg.debounce_window,
        "staleness_horizon": cfg.staleness_horizon,
        "controller": {
            "alpha_t": cfg.controller.alpha_t,
            "alpha_r": cfg.controller.alpha_r,
            "gain_k": cfg.controller.gain_k,
            "v_max": cfg.controller.v_max,
            "omega_max": cfg.controller.omega_max,
            "r_in_c": cfg.controller.r_in_c.tolist(),
        },
        "geometry": {
            "rcm_offset": cfg.geometry.rcm_offset,
            "shaft_length": cfg.geometry.shaft_length,
            "ee_to_tip": {
                "rotation": cfg.geometry.ee_to_tip.rotation.tolist(),
                "translation": cfg.geometry.ee_to_tip.translation.tolist(),
            },
        },
        "jaw": {
            "jaw_max": cfg.jaw.jaw_max,
            "rate_limit": cfg.jaw.rate_limit,
            "torque_limit": cfg.jaw.torque_limit,
        },
        "channel": {
            "point": cfg.channel.point.tolist(),
            "direction": cfg.channel.direction.tolist(),
            "radius": cfg.channel.radius,
            "mouth_position": cfg.channel.mouth_position,
        },
    }


def config_from_dict(data) -> SessionConfig:
    data = _expect_mapping(data, "config")
    for key in data:
        if key not in _TOP_LEVEL_KEYS:
            raise ConfigError(f"config: unknown key {key!r}")
    kwargs = {}
    for key in ("rate", "telemetry_decimation", "debounce_window", "staleness_horizon"):
        if key in data:
            kwargs[key] = data[key]
    if "controller" in data:
        kwargs["controller"] = _build(ControllerConfig, data["controller"], "controller")
    if "geometry" in data:
        kwargs["geometry"] = _build(
            ToolGeometry, data["geometry"], "geometry", transforms=("ee_to_tip",)
        )
    if "jaw" in data:
        kwargs["jaw"] = _build(JawModel, data["jaw"], "jaw")
    if "channel" in data:
        kwargs["channel"] = _build(LaryngoscopeChannel, data["channel"], "channel")
    try:
        return SessionConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


_TOP_LEVEL_KEYS = (
    "rate",
    "telemetry_decimation",
    "debounce_window",
    "staleness_horizon",
    "controller",
    "geometry",
    "jaw",
    "channel",
)


def merge_config(base: SessionConfig, data) -> SessionConfig:
    """Overlay a partial config mapping onto an existing SessionConfig."""
    data = _expect_mapping(data, "config")
    for key in data:
        if key not in _TOP_LEVEL_KEYS:
            raise ConfigError(f"config: unknown key {key!r}")
    cfg = base
    for key in ("rate", "telemetry_decimation", "debounce_window", "staleness_horizon"):
        if key in data:
            cfg = replace(cfg, **{key: data[key]})
    for key, cls, transforms in (
        ("controller", ControllerConfig, ()),
        ("geometry", ToolGeometry, ("ee_to_tip",)),
        ("jaw", JawModel, ()),
        ("channel", LaryngoscopeChannel, ()),
    ):
        if key in data:
            section = _expect_mapping(data[key], key)
            current = getattr(cfg, key)
            merged = {}
            for f in cls.__dataclass_fields__.values():
                merged[f.name] = getattr(current, f.name)
            for k, value in section.items():
                if k not in merged:
                    raise ConfigError(f"{key}: unknown key {k!r}")
                if k in transforms:
                    value = _transform_from_dict(value, f"{key}.{k}")
                elif isinstance(value, list):
                    value = np.asarray(value, dtype=np.float64) if k != "band" else tuple(value)
                merged[k] = value
            try:
                cfg = replace(cfg, **{key: cls(**merged)})
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{key}: {exc}") from None
    return cfg


def load_config(path, base: SessionConfig | None = None) -> SessionConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if base is None:
        base = default_config()
    return merge_config(base, data)


def apply_flag_overrides(
    cfg: SessionConfig,
    rate=None,
    alpha_t=None,
    alpha_r=None,
    gain_k=None,
    rcm_offset=None,
) -> SessionConfig:
    """Apply individual CLI flag overrides on top of a loaded config."""
    try:
        if rate is not None:
            cfg = replace(cfg, rate=float(rate))
        ctl = {}
        if alpha_t is not None:
            ctl["alpha_t"] = float(alpha_t)
        if alpha_r is not None:
            ctl["alpha_r"] = float(alpha_r)
        if gain_k is not None:
            ctl["gain_k"] = float(gain_k)
        if ctl:
            cfg = replace(cfg, controller=replace(cfg.controller, **ctl))
        if rcm_offset is not None:
            cfg = replace(cfg, geometry=replace(cfg.geometry, rcm_offset=float(rcm_offset)))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


_EVENT_KINDS = ("twist", "gripper", "pedal")


def scenario_from_dict(data) -> tuple[Scenario, dict]:
    """Build a Scenario plus any inline config overrides (returned raw)."""
    data = _expect_mapping(data, "scenario")
    known = {
        "name",
        "duration",
        "rate",
        "seed",
        "rcm_offset",
        "tremor",
        "initial_pose",
        "events",
        "config",
    }
    for key in data:
        if key not in known:
            raise ScenarioError(f"scenario: unknown key {key!r}")

    events = []
    for i, entry in enumerate(data.get("events", []) or []):
        if not isinstance(entry, dict) or "t" not in entry:
            raise ScenarioError(f"event #{i} must be a mapping with a 't' key")
        kinds = [k for k in _EVENT_KINDS if k in entry]
        if len(kinds) != 1:
            raise ScenarioError(
                f"event #{i} must carry exactly one of {_EVENT_KINDS}, got {sorted(entry)}"
            )
        extra = set(entry) - {"t", kinds[0]}
        if extra:
            raise ScenarioError(f"event #{i}: unknown keys {sorted(extra)}")
        events.append(ScriptEvent(t=float(entry["t"]), kind=kinds[0], value=entry[kinds[0]]))

    tremor_section = _expect_mapping(data.get("tremor"), "tremor")
    tremor_kwargs = {}
    for key, value in tremor_section.items():
        if key not in ("amplitude", "band", "seed"):
            raise ScenarioError(f"tremor: unknown key {key!r}")
        tremor_kwargs[key] = tuple(value) if key == "band" else value
    if "seed" not in tremor_kwargs and "seed" in data:
        tremor_kwargs["seed"] = data["seed"]

    kwargs = {}
    for key in ("name", "duration", "rate", "seed", "rcm_offset"):
        if key in data:
            kwargs[key] = data[key]
    if "initial_pose" in data:
        try:
            kwargs["initial_pose"] = _transform_from_dict(data["initial_pose"], "initial_pose")
        except ConfigError as exc:
            raise ScenarioError(str(exc)) from None
    try:
        scenario = Scenario(events=tuple(events), tremor=TremorModel(**tremor_kwargs), **kwargs)
    except (ValueError, TypeError) as exc:
        raise ScenarioError(str(exc)) from None
    return scenario, _expect_mapping(data.get("config"), "scenario config")


def load_scenario(path) -> tuple[Scenario, dict]:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ScenarioError(f"cannot parse scenario {path}: {exc}") from None
    return scenario_from_dict(data)
