"""Sectioned key-value configuration.

Values are held in human units (degrees, per-degree spring rates) exactly
as written, so ``to_ini`` after ``from_string`` is stable. Runtime objects
are built and validated once, at construction.
"""
from __future__ import annotations

import configparser
import copy
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .control import AvoidanceConfig, PidState, PlannerConfig, SteerController
from .errors import ConfigError, SpringBikeError
from .plant import Battery, PlantConfig
from .spring_design import (DEFAULT_TRAINER_WHEEL_RATING, BikeParams, SpringMaterial, SpringSpec,
                            per_degree_to_per_radian)

DEFAULT_CONFIG_PATH = Path(__file__).with_name("data") / "default.ini"
rad = math.radians

DEFAULTS: dict[str, dict[str, object]] = {
    "bike": {
        "mass": 25.0,
        "com_height": 0.6,
        "rear_wheel_radius": 0.3,
        "trainer_wheel_radius": 0.06,
        "wheelbase": 1.0,
        "com_rear_offset": 0.4,
        "hub_distance": 1.0,
        "max_steer_deg": 30.0,
        "design_tilt_deg": 10.0,
        "turn_speed": 2.0,
        "max_speed": 5.0,
        "gravity": 9.81,
    },
    "spring": {
        "wire_diameter": 0.0147,
        "mean_coil_diameter": 0.05,
        "body_turns": 2.25,
        "leg1_length": 0.215,
        "leg2_length": 0.11,
        "rate_per_degree": 4.9,
        "trainer_wheel_rating": DEFAULT_TRAINER_WHEEL_RATING,
    },
    "material": {
        "elastic_modulus": 180e9,
        "strength_coeff": 2911.0,
        "strength_exponent": 0.478,
        "yield_fraction": 0.61,
    },
    "plant": {
        "damping": 15.0,
        "motor_tau": 0.3,
        "steer_rate_max_deg": 150.0,
        "steer_slip": 0.1,
        "slip_direction": 1,
        "slip_bias_limit_deg": 10.0,
        "brake_decel": 2.5,
        "brake_stroke_time": 0.4,
        "drive_counts_per_rev": 4096,
        "steer_counts_per_rev": 4096,
        "pot_range_deg": 45.0,
        "contact_radius": 0.25,
        "sonar_beam_width_deg": 25.0,
        "sonar_mount_yaw_deg": 10.0,
        "sonar_min_range": 0.02,
        "sonar_max_range": 4.0,
    },
    "sensors": {
        "mag_noise_deg": 0.5,
        "gps_noise": 2.0,
        "pot_noise_deg": 0.0,
        "origin_lat": 22.3194,
        "origin_lon": 87.3091,
    },
    "battery": {
        "capacity": 2.2,
        "voltage": 11.7,
        "max_discharge": 66.0,
        "idle_current": 0.8,
        "full_current": 7.5,
        "electronics_current": 0.5,
        "brake_motor_current": 2.0,
        "cruise_speed": 2.0,
    },
    "control": {
        "speed_kp": 0.8,
        "speed_ki": 1.5,
        "speed_kd": 0.0,
        "speed_integral_limit": 0.6,
        "steer_outer_gain": 10.0,
        "steer_rate_kp": 0.3,
        "steer_seek_rate_deg": 20.0,
        "steer_seek_limit_deg": 6.0,
        "heading_gain": 1.0,
        "taper_angle_deg": 5.0,
        "arrival_radius": 0.5,
        "approach_gain": 0.8,
    },
    "avoidance": {
        "stop_threshold": 0.5,
        "avoid_threshold": 3.0,
        "evasion_angle_deg": 20.0,
        "evasion_speed": 2.0,
        "tie_margin": 0.25,
        "hold_distance": 1.0,
        "recovery_delay": 0.5,
        "recovery_distance": 1.0,
        "recovery_speed": 0.5,
    },
    "mission": {
        "dt": 0.01,
        "timeout": 120.0,
        "gps_blend": 0.01,
        "gps_period": 1.0,
        "tracking_period": 1.0,
        "park_time": 3.0,
        "seed": 0,
        "noise": True,
        "drive_engaged": True,
    },
    "output": {
        "world": "",
        "out_dir": ".",
        "design_file": "design.json",
        "trace_file": "trace.jsonl",
        "tracking_file": "tracking.jsonl",
    },
}


@dataclass(frozen=True)
class MissionSettings:
    dt: float = 0.01
    timeout: float = 120.0
    gps_blend: float = 0.01
    gps_period: float = 1.0
    tracking_period: float = 1.0
    park_time: float = 3.0
    seed: int = 0
    noise: bool = True
    drive_engaged: bool = True

    def __post_init__(self):
        if not 0 < self.dt <= 0.05:
            raise ValueError("dt must lie in (0, 0.05] s")
        if not 0 <= self.gps_blend <= 1:
            raise ValueError("gps_blend must lie in [0, 1]")
        if min(self.timeout, self.gps_period, self.tracking_period) <= 0 or self.park_time < 0:
            raise ValueError("periods and timeout must be positive")


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(raw: str, default):
    text = raw.strip()
    if isinstance(default, bool):
        low = text.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        value = float(text)
        if not math.isfinite(value):
            raise ValueError(f"expected a finite number, got {raw!r}")
        return value
    return text


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class Config:
    """Validated configuration. ``Config()`` gives the shipped defaults."""

    def __init__(self, values: dict | None = None, lines: dict | None = None):
        self.values = copy.deepcopy(DEFAULTS)
        for section, items in (values or {}).items():
            for key, value in items.items():
                self.values[section][key] = value
        self._lines = lines or {}
        self._build()

    # construction -------------------------------------------------------------------
    @classmethod
    def from_string(cls, text: str, source: str = "<config>") -> Config:
        parser = configparser.ConfigParser(interpolation=None, strict=True, delimiters=("=",),
                                           comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
        parser.optionxform = str
        try:
            parser.read_string(text, source)
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            raise ConfigError(f"{source}: {exc.message if hasattr(exc, 'message') else exc}", line=line) from None
        lines = _key_lines(text)
        values: dict[str, dict] = {}
        for section in parser.sections():
            if section not in DEFAULTS:
                raise ConfigError(f"unknown section [{section}]", field=section, line=lines.get((section, None)))
            for key, raw in parser.items(section):
                name = f"{section}.{key}"
                if key not in DEFAULTS[section]:
                    raise ConfigError("unknown key", field=name, line=lines.get((section, key)))
                try:
                    values.setdefault(section, {})[key] = _coerce(raw, DEFAULTS[section][key])
                except ValueError as exc:
                    raise ConfigError(str(exc), field=name, line=lines.get((section, key))) from None
        return cls(values, lines)

    @classmethod
    def from_file(cls, path) -> Config:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
        return cls.from_string(text, str(path))

    def with_overrides(self, overrides: dict[str, str]) -> Config:
        """Return a copy with ``{"section.key": "text"}`` overrides applied."""
        values = copy.deepcopy(self.values)
        for dotted, raw in overrides.items():
            section, _, key = dotted.partition(".")
            if section not in DEFAULTS or key not in DEFAULTS[section]:
                raise ConfigError("unknown key", field=dotted)
            try:
                values[section][key] = _coerce(str(raw), DEFAULTS[section][key])
            except ValueError as exc:
                raise ConfigError(str(exc), field=dotted) from None
        return Config(values, self._lines)

    def to_ini(self) -> str:
        out = []
        for section, items in self.values.items():
            out.append(f"[{section}]")
            out.extend(f"{key} = {_render(value)}" for key, value in items.items())
            out.append("")
        return "\n".join(out)

    def __eq__(self, other):
        return isinstance(other, Config) and self.values == other.values

    # runtime objects ------------------------------------------------------------------
    def _build(self):
        v = self.values
        try:
            b, s, m, p, sn, bt, c, a, ms = (v[k] for k in ("bike", "spring", "material", "plant", "sensors",
                                                             "battery", "control", "avoidance", "mission"))
            self._section = "bike"
            self.bike = BikeParams(b["mass"], b["com_height"], b["rear_wheel_radius"], b["trainer_wheel_radius"],
                                   b["wheelbase"], b["com_rear_offset"], b["hub_distance"], rad(b["max_steer_deg"]),
                                   rad(b["design_tilt_deg"]), b["turn_speed"], b["max_speed"], b["gravity"])
            self._section = "spring"
            self.spring = SpringSpec(s["wire_diameter"], s["mean_coil_diameter"], s["body_turns"],
                                     s["leg1_length"], s["leg2_length"], per_degree_to_per_radian(s["rate_per_degree"]))
            if s["trainer_wheel_rating"] <= 0:
                raise ValueError("trainer_wheel_rating must be positive")
            self.trainer_wheel_rating = s["trainer_wheel_rating"]
            self._section = "material"
            self.material = SpringMaterial(m["elastic_modulus"], m["strength_coeff"], m["strength_exponent"],
                                           m["yield_fraction"])
            self._section = "battery"
            battery = Battery(bt["capacity"], bt["voltage"], bt["max_discharge"])
            if not 0 <= bt["cruise_speed"] <= b["max_speed"]:
                raise ValueError("cruise_speed must lie in [0, max_speed]")
            self.cruise_speed = bt["cruise_speed"]
            self._section = "plant"
            self.plant = PlantConfig(
                damping=p["damping"], motor_tau=p["motor_tau"], steer_rate_max=rad(p["steer_rate_max_deg"]),
                steer_slip=p["steer_slip"], slip_direction=p["slip_direction"],
                slip_bias_limit=rad(p["slip_bias_limit_deg"]), brake_decel=p["brake_decel"],
                brake_stroke_time=p["brake_stroke_time"], drive_counts_per_rev=p["drive_counts_per_rev"],
                steer_counts_per_rev=p["steer_counts_per_rev"], pot_range=rad(p["pot_range_deg"]),
                contact_radius=p["contact_radius"], sonar_beam_width=rad(p["sonar_beam_width_deg"]),
                sonar_mount_yaw=rad(p["sonar_mount_yaw_deg"]), sonar_min_range=p["sonar_min_range"],
                sonar_max_range=p["sonar_max_range"], mag_noise=rad(sn["mag_noise_deg"]),
                gps_noise=sn["gps_noise"], pot_noise=rad(sn["pot_noise_deg"]), origin_lat=sn["origin_lat"],
                origin_lon=sn["origin_lon"], idle_current=bt["idle_current"], full_current=bt["full_current"],
                electronics_current=bt["electronics_current"], brake_motor_current=bt["brake_motor_current"],
                battery=battery)
            if not -90 <= sn["origin_lat"] <= 90 or not -180 <= sn["origin_lon"] <= 180:
                self._section = "sensors"
                raise ValueError("origin coordinates out of range")
            self._section = "control"
            lim = c["speed_integral_limit"]
            self.speed_pid = PidState(c["speed_kp"], c["speed_ki"], c["speed_kd"], output_limits=(-1.0, 1.0),
                                      integral_limits=(-lim, lim))
            rate_max = self.plant.steer_rate_max
            self.steer = SteerController(
                inner=PidState(c["steer_rate_kp"] / rate_max, output_limits=(-1.0, 1.0)),
                outer_gain=c["steer_outer_gain"], rate_max=rate_max,
                counts_per_rev=self.plant.steer_counts_per_rev, pot_range=self.plant.pot_range,
                seek_rate=rad(c["steer_seek_rate_deg"]), seek_limit=rad(c["steer_seek_limit_deg"]))
            self.planner = PlannerConfig(c["heading_gain"], self.bike.max_speed, self.bike.turn_speed,
                                         rad(c["taper_angle_deg"]), c["arrival_radius"], c["approach_gain"],
                                         self.bike.max_steer)
            self._section = "avoidance"
            self.avoidance = AvoidanceConfig(a["stop_threshold"], a["avoid_threshold"],
                                             rad(a["evasion_angle_deg"]), a["evasion_speed"], a["tie_margin"],
                                             a["hold_distance"], a["recovery_delay"], a["recovery_distance"],
                                             a["recovery_speed"])
            if not 0 < self.avoidance.stop_threshold < self.avoidance.avoid_threshold:
                raise ValueError("stop_threshold must be positive and below avoid_threshold")
            self._section = "mission"
            self.mission = MissionSettings(**ms)
        except (SpringBikeError, ValueError, TypeError) as exc:
            section = self._section
            raise ConfigError(str(exc), field=section, line=self._lines.get((section, None))) from None
        self.output = dict(v["output"])


def _key_lines(text: str) -> dict:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    lines: dict = {}
    section = None
    for n, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        head = re.match(r"\[([^\]]+)\]", stripped)
        if head:
            section = head.group(1).strip()
            lines.setdefault((section, None), n)
        elif section and "=" in stripped and not stripped.startswith(("#", ";")):
            lines.setdefault((section, stripped.split("=", 1)[0].strip()), n)
    return lines


def load_config(path=None, overrides: dict | None = None) -> Config:
    cfg = Config.from_file(path) if path else Config.from_file(DEFAULT_CONFIG_PATH)
    return cfg.with_overrides(overrides) if overrides else cfg
