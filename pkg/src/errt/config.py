"""Flat ``key = value`` configuration with defaults, presets and overrides.

Precedence is command-line override > config file > default.  ``cost.preset``
supplies ``cost.k_d`` and ``cost.k_nu`` unless either is set explicitly at
some layer.  Unknown keys are errors.  ``Config.to_text()`` writes every
resolved value and loads back to an equal ``Config``.

Example file::

    # greedy run on a taller world
    cost.preset = greedy
    world.dims = 27 27 6
    sensor.range_m = 8
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from .cost import PRESETS, CostGains
from .dynamics import UavParams
from .errors import ParseError, RangeError, UnknownKey
from .nmpc import NmpcWeights
from .pipeline import PlannerSettings
from .sensor import SensorModel
from .sim import MissionConfig, WorldSpec


# ---------------------------------------------------------------------------
# value kinds
# ---------------------------------------------------------------------------

def _float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(text: str) -> int:
    return int(text)


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError("expected true or false")


def _vector(n: int, kind=_float):
    def parse(text: str):
        parts = text.replace(",", " ").split()
        if len(parts) != n:
            raise ValueError(f"expected {n} numbers")
        return tuple(kind(p) for p in parts)
    return parse


def _optional_float(text: str):
    return None if text.lower() == "auto" else _float(text)


def _fmt(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return " ".join(_fmt(v) for v in value)
    return str(value)


def _positive(v):
    return all(x > 0 for x in v) if isinstance(v, tuple) else v > 0


def _non_negative(v):
    return all(x >= 0 for x in v) if isinstance(v, tuple) else v >= 0


@dataclass(frozen=True)
class Key:
    name: str
    parse: Callable[[str], Any]
    default: Any
    check: Callable[[Any], bool] | None = None
    rule: str = ""


KEYS: dict[str, Key] = {k.name: k for k in [
    Key("sensor.range_m", _float, 6.0, _positive, "> 0"),
    Key("sensor.fov_deg", _float, 32.0, lambda v: 0 < v < 180, "in (0, 180)"),
    Key("sensor.array_m", _float, 0.1, _non_negative, ">= 0"),
    Key("planner.n_goal", _int, 40, _positive, ">= 1"),
    Key("planner.goal_attempt_factor", _int, 200, _positive, ">= 1"),
    Key("planner.iterations", _int, 1500, _positive, ">= 1"),
    Key("planner.interp_m", _float, 0.75, _positive, "> 0"),
    Key("planner.goal_radius_m", _optional_float, None, lambda v: v is None or v > 0, "> 0 or auto"),
    Key("planner.step_max_factor", _float, 2.0, _positive, "> 0"),
    Key("model.drag", _vector(3), (0.1, 0.1, 0.2), _non_negative, ">= 0"),
    Key("model.tau_phi", _float, 0.5, _positive, "> 0"),
    Key("model.tau_theta", _float, 0.5, _positive, "> 0"),
    Key("model.gain_phi", _float, 1.0),
    Key("model.gain_theta", _float, 1.0),
    Key("model.gravity", _float, 9.81, _positive, "> 0"),
    Key("model.thrust_min", _float, 5.0),
    Key("model.thrust_max", _float, 15.0),
    Key("model.angle_max", _float, 0.35, lambda v: 0 < v < math.pi / 2, "in (0, pi/2)"),
    Key("model.ts_s", _float, 0.5, _positive, "> 0"),
    Key("nmpc.horizon", _int, 50, _positive, ">= 1"),
    Key("nmpc.q_x", _vector(8), (5.0, 5.0, 5.0, 1.0, 1.0, 1.0, 2.0, 2.0), _non_negative, ">= 0"),
    Key("nmpc.q_u", _vector(3), (1.0, 5.0, 5.0), _non_negative, ">= 0"),
    Key("nmpc.q_du", _vector(3), (1.0, 10.0, 10.0), _non_negative, ">= 0"),
    Key("nmpc.tol", _float, 1e-6, _positive, "> 0"),
    Key("nmpc.max_iters", _int, 300, _positive, ">= 1"),
    Key("cost.preset", str, "greedy", lambda v: v in (*PRESETS, "custom"),
        "one of " + ", ".join([*PRESETS, "custom"])),
    Key("cost.k_d", _float, None, _non_negative, ">= 0"),
    Key("cost.k_nu", _float, None, _non_negative, ">= 0"),
    Key("world.dims", _vector(3, _int), (27, 27, 4),
        lambda v: min(v[:2]) >= 5 and v[2] >= 3, ">= 5 horizontally, >= 3 vertically"),
    Key("world.resolution", _float, 1.0, _positive, "> 0"),
    Key("sim.speed_mps", _float, 1.2, _positive, "> 0"),
    Key("sim.noise_m", _float, 0.05, _non_negative, ">= 0"),
    Key("sim.sample_s", _float, 0.25, _positive, "> 0"),
    Key("sim.discovery_margin_m", _float, 1.0, _non_negative, ">= 0"),
    Key("sim.max_replans", _int, 200, _positive, ">= 1"),
    Key("sim.stall_limit", _int, 5, _positive, ">= 1"),
    Key("output.svg", _bool, True),
    Key("output.wall_clock_in_metrics", _bool, False),
]}


def _convert(name: str, text: str, line: int | None = None):
    key = KEYS.get(name)
    if key is None:
        raise UnknownKey(f"unknown config key {name!r}" + (f" (line {line})" if line else ""))
    try:
        value = key.parse(text.strip())
    except ValueError as exc:
        raise ParseError(f"{name}: cannot parse {text.strip()!r}: {exc}", line) from None
    if key.check is not None and value is not None and not key.check(value):
        where = f" (line {line})" if line else ""
        raise RangeError(f"{name} = {_fmt(value)} out of range: must be {key.rule}{where}")
    return value


def parse_config_text(text: str) -> dict[str, Any]:
    """Explicit values set by a config file (no defaults filled)."""
    out: dict[str, Any] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", n)
        name, value = (part.strip() for part in line.split("=", 1))
        if not name:
            raise ParseError("missing key", n)
        if name in out:
            raise ParseError(f"duplicate key {name!r}", n)
        out[name] = _convert(name, value, n)
    return out


class Config(Mapping):
    """Resolved configuration: every key in :data:`KEYS` has a value."""

    def __init__(self, explicit: Mapping[str, Any] | None = None):
        explicit = dict(explicit or {})
        for name in explicit:
            if name not in KEYS:
                raise UnknownKey(f"unknown config key {name!r}")
        values = {name: key.default for name, key in KEYS.items()}
        values.update(explicit)
        preset = values["cost.preset"]
        base = PRESETS.get(preset, CostGains())
        if values["cost.k_d"] is None:
            values["cost.k_d"] = base.k_d
        if values["cost.k_nu"] is None:
            values["cost.k_nu"] = base.k_nu
        self._values = values

    def __getitem__(self, name):
        try:
            return self._values[name]
        except KeyError:
            raise UnknownKey(f"unknown config key {name!r}") from None

    def __iter__(self):
        return iter(self._values)

    def __len__(self):
        return len(self._values)

    def __eq__(self, other):
        return isinstance(other, Config) and self._values == other._values

    def __repr__(self):
        return f"Config({self._values!r})"

    def to_text(self) -> str:
        return "".join(f"{name} = {_fmt(value)}\n" for name, value in self._values.items())

    # -- builders ---------------------------------------------------------

    def sensor(self) -> SensorModel:
        return SensorModel.from_degrees(self["sensor.range_m"], self["sensor.fov_deg"],
                                        self["sensor.array_m"])

    def gains(self) -> CostGains:
        return CostGains(self["cost.k_d"], self["cost.k_nu"])

    def uav_params(self) -> UavParams:
        return UavParams(tuple(self["model.drag"]), self["model.tau_phi"], self["model.tau_theta"],
                         self["model.gain_phi"], self["model.gain_theta"], self["model.gravity"])

    def nmpc_weights(self) -> NmpcWeights:
        a = self["model.angle_max"]
        return NmpcWeights(np.array(self["nmpc.q_x"]), np.array(self["nmpc.q_u"]),
                           np.array(self["nmpc.q_du"]),
                           np.array([self["model.gravity"], 0.0, 0.0]),
                           np.array([self["model.thrust_min"], -a, -a]),
                           np.array([self["model.thrust_max"], a, a]),
                           self["nmpc.horizon"], self["model.ts_s"], self["nmpc.tol"],
                           self["nmpc.max_iters"])

    def planner(self) -> PlannerSettings:
        return PlannerSettings(self["planner.n_goal"], self.sensor(), self.gains(),
                               self.nmpc_weights(), self["planner.iterations"],
                               self["planner.interp_m"], self["planner.goal_radius_m"],
                               self["planner.step_max_factor"],
                               self["planner.goal_attempt_factor"], self.uav_params())

    def world_spec(self) -> WorldSpec:
        return WorldSpec(tuple(self["world.dims"]), self["world.resolution"])

    def mission(self, seed: int) -> MissionConfig:
        return MissionConfig(seed=int(seed), preset=self["cost.preset"], world=self.world_spec(),
                             planner=self.planner(), speed=self["sim.speed_mps"],
                             noise=self["sim.noise_m"], dt=self["sim.sample_s"],
                             discovery_margin=self["sim.discovery_margin_m"],
                             max_replans=self["sim.max_replans"],
                             stall_limit=self["sim.stall_limit"])


def load_config(path=None, overrides: Mapping[str, str] | None = None) -> Config:
    """Resolve ``path`` (optional) plus string ``overrides`` over the defaults.

    Raises
    ------
    ParseError
        Malformed line or value (message carries the line number).
    UnknownKey
        A key that is not in :data:`KEYS`.
    RangeError
        A value outside its allowed range.
    """
    explicit: dict[str, Any] = {}
    if path is not None:
        explicit.update(parse_config_text(Path(path).read_text()))
    for name, text in (overrides or {}).items():
        explicit[name] = _convert(name, str(text))
    if "cost.preset" in (overrides or {}):
        # a preset chosen on the command line outranks gains from the file
        for g in ("cost.k_d", "cost.k_nu"):
            if g not in (overrides or {}):
                explicit.pop(g, None)
    return Config(explicit)
