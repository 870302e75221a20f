"""Run configuration: defaults, YAML loading, validation.

A RunConfig bundles everything one closed-loop run depends on.  The
file format mirrors the dataclass layout: top-level scalars plus one
mapping per component section (vehicle, gains, noise, camera,
estimator, plan, monitors, layout), a fault list, and a mitigation
list.  Sections merge over the defaults below, so a file that sets
only ``plan: {hover_altitude: 8}`` keeps every other curated value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields as dc_fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from .controller import GainSet
from .dynamics import VehicleParams
from .estimator import (
    CameraConfig,
    EstimatorConfig,
    Marker,
    NoiseConfig,
    PadLayout,
    default_pad_layout,
)
from .faults import (
    MITIGATION_FLAGS,
    FaultKind,
    FaultSpec,
    ScenarioSpec,
    scenario_library,
)
from .guidance import MissionPlan
from .monitors import MonitorConfig


class ConfigError(ValueError):
    """Bad run configuration; the message names the offending field."""


# Survey position of the landing pad.  The mission plan, the marker
# layout, the monitor landing zone, and the estimator's surveyed pad
# position all agree on it by default; move them together.
DEFAULT_PAD_CENTER = (3.0, 2.0, 0.0)


def _scenario_index() -> dict[str, ScenarioSpec]:
    return {s.id: s for s in scenario_library()}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    dt: float = 0.002
    duration: float = 60.0
    decimation: int = 10                # report one sample every N ticks
    lighting: float = 1.0               # scene lighting before faults
    lighting_floor: float = 0.5         # preflight gate threshold
    gps_bias_walk: float = 0.25         # m/sqrt(s), horizontal receiver drift
    gps_bias_init: float = 0.4          # m, std of the initial offset draw
    scenario: Optional[str] = None
    faults: tuple[FaultSpec, ...] = ()  # inline faults, after the scenario's
    mitigations: tuple[str, ...] = ()
    vehicle: VehicleParams = VehicleParams()
    gains: GainSet = GainSet()
    noise: NoiseConfig = NoiseConfig()
    camera: CameraConfig = CameraConfig()
    estimator: EstimatorConfig = EstimatorConfig(pad_surveyed=DEFAULT_PAD_CENTER)
    layout: PadLayout = default_pad_layout(DEFAULT_PAD_CENTER)
    plan: MissionPlan = MissionPlan(pad_center=DEFAULT_PAD_CENTER)
    monitors: MonitorConfig = MonitorConfig(zone_center=DEFAULT_PAD_CENTER)

    def __post_init__(self) -> None:
        if not (0.0 < self.dt <= 0.02):
            raise ConfigError(f"dt: {self.dt} outside (0, 0.02]")
        if not math.isfinite(self.duration) or self.duration <= 0.0:
            raise ConfigError(f"duration: {self.duration} must be positive and finite")
        if self.decimation < 1:
            raise ConfigError(f"decimation: {self.decimation} must be >= 1")
        if not (0.0 <= self.lighting <= 1.0):
            raise ConfigError(f"lighting: {self.lighting} outside [0, 1]")
        if not (0.0 <= self.lighting_floor <= 1.0):
            raise ConfigError(f"lighting_floor: {self.lighting_floor} outside [0, 1]")
        if self.gps_bias_walk < 0.0:
            raise ConfigError(f"gps_bias_walk: {self.gps_bias_walk} must be >= 0")
        if self.gps_bias_init < 0.0:
            raise ConfigError(f"gps_bias_init: {self.gps_bias_init} must be >= 0")
        if self.scenario is not None and self.scenario not in _scenario_index():
            raise ConfigError(f"scenario: unknown id {self.scenario!r}")
        seen: set[str] = set()
        for flag in self.mitigations:
            if flag not in MITIGATION_FLAGS:
                raise ConfigError(f"mitigations: unknown flag {flag!r}")
            if flag in seen:
                raise ConfigError(f"mitigations: duplicate flag {flag!r}")
            seen.add(flag)

    def scenario_spec(self) -> Optional[ScenarioSpec]:
        if self.scenario is None:
            return None
        return _scenario_index()[self.scenario]

    def resolved_faults(self) -> tuple[FaultSpec, ...]:
        """Scenario faults (if a scenario is named) plus inline faults."""
        spec = self.scenario_spec()
        base = spec.faults if spec is not None else ()
        return base + self.faults


_DEFAULTS = RunConfig()

_SECTIONS = ("vehicle", "gains", "noise", "camera", "estimator", "plan", "monitors")

_SCALARS = (
    "seed",
    "dt",
    "duration",
    "decimation",
    "lighting",
    "lighting_floor",
    "gps_bias_walk",
    "gps_bias_init",
    "scenario",
)


def _tuplify(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


def _merge(base: Any, data: Any, path: str) -> Any:
    """One section: merge a mapping over a default dataclass instance."""
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in dc_fields(type(base))}
    for key in data:
        if key not in known:
            raise ConfigError(f"{path}.{key}: unknown field")
    try:
        return replace(base, **{k: _tuplify(v) for k, v in data.items()})
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _build_layout(data: Any, fallback_center: Any) -> PadLayout:
    if not isinstance(data, Mapping):
        raise ConfigError(f"layout: expected a mapping, got {type(data).__name__}")
    for key in data:
        if key not in ("center", "markers"):
            raise ConfigError(f"layout.{key}: unknown field")
    center = _tuplify(data.get("center", fallback_center))
    if "markers" not in data:
        return default_pad_layout(center)
    raw = data["markers"]
    if not isinstance(raw, list):
        raise ConfigError("layout.markers: expected a list")
    markers = []
    for i, item in enumerate(raw):
        path = f"layout.markers[{i}]"
        if not isinstance(item, Mapping):
            raise ConfigError(f"{path}: expected a mapping")
        known = {f.name for f in dc_fields(Marker)}
        for key in item:
            if key not in known:
                raise ConfigError(f"{path}.{key}: unknown field")
        try:
            markers.append(Marker(**{k: _tuplify(v) for k, v in item.items()}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    try:
        return PadLayout(markers=tuple(markers), center=center)
    except ValueError as exc:
        raise ConfigError(f"layout: {exc}") from exc


def _build_fault(data: Any, path: str) -> FaultSpec:
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    if "kind" not in data:
        raise ConfigError(f"{path}.kind: required")
    try:
        kind = FaultKind(data["kind"])
    except ValueError as exc:
        raise ConfigError(f"{path}.kind: unknown fault kind {data['kind']!r}") from exc
    known = {f.name for f in dc_fields(FaultSpec)}
    rest = {}
    for key, value in data.items():
        if key == "kind":
            continue
        if key not in known:
            raise ConfigError(f"{path}.{key}: unknown field")
        rest[key] = _tuplify(value)
    try:
        return FaultSpec(kind=kind, **rest)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def config_from_mapping(data: Mapping[str, Any]) -> RunConfig:
    allowed = set(_SCALARS) | set(_SECTIONS) | {"layout", "faults", "mitigations"}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"{key}: unknown field")

    kwargs: dict[str, Any] = {}
    for key in _SCALARS:
        if key in data:
            kwargs[key] = data[key]
    for key in _SECTIONS:
        if key in data:
            kwargs[key] = _merge(getattr(_DEFAULTS, key), data[key], key)
    if "mitigations" in data:
        raw = data["mitigations"]
        if not isinstance(raw, list) or not all(isinstance(m, str) for m in raw):
            raise ConfigError("mitigations: expected a list of flag names")
        kwargs["mitigations"] = tuple(raw)
    if "faults" in data:
        raw = data["faults"]
        if not isinstance(raw, list):
            raise ConfigError("faults: expected a list")
        kwargs["faults"] = tuple(
            _build_fault(item, f"faults[{i}]") for i, item in enumerate(raw)
        )
    if "layout" in data:
        plan = kwargs.get("plan", _DEFAULTS.plan)
        kwargs["layout"] = _build_layout(data["layout"], plan.pad_center)
    try:
        return RunConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def config_from_yaml(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid yaml: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"top level: expected a mapping, got {type(data).__name__}")
    return config_from_mapping(data)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_yaml(text)


def apply_overrides(
    cfg: RunConfig,
    scenario: Optional[str] = None,
    mitigations: Optional[tuple[str, ...]] = None,
    seed: Optional[int] = None,
) -> RunConfig:
    """Command-line overrides; replace() re-runs the validation."""
    changes: dict[str, Any] = {}
    if scenario is not None:
        changes["scenario"] = scenario
    if mitigations is not None:
        changes["mitigations"] = mitigations
    if seed is not None:
        changes["seed"] = seed
    return replace(cfg, **changes) if changes else cfg
