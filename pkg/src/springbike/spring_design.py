"""Torsion-spring balancer sizing and verification.

All quantities are SI with angles in radians. The wire-rate formula is
conventionally written per degree, so the conversions between the two are
explicit functions rather than silent factors.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from .errors import InvalidGeometryError, InvalidTurnError, SingularIndexError, SpringBikeError
from .geometry import min_turn_radius

DEG = math.pi / 180.0

#: Values printed in the original design write-up. They are reported next to
#: the recomputed values and never substituted for them.
PUBLISHED = {
    "k_min_upright_n_m_per_rad": 117.7,
    "k_equilibrium_n_m_per_deg": 4.9,
    "wire_diameter_m": 0.0147,
    "yield_strength_mpa": 491.4,
    "max_safe_moment_n_m": 119.7,
    "max_safe_angle_deg": 24.4,
    "min_turn_radius_m": 1.78,
    "max_moment_for_trainer_load": 641.5,
    "leg2_length_m": 0.11,
    "trainer_wheel_fos": 2.0,
}

#: Trainer-wheel force rating: a factor of safety of 2 on the published
#: moment/leg-2 pairing.
DEFAULT_TRAINER_WHEEL_RATING = (PUBLISHED["trainer_wheel_fos"]
                                * PUBLISHED["max_moment_for_trainer_load"]
                                / PUBLISHED["leg2_length_m"])

MIN_SPRING_INDEX = 1.2


def per_degree_to_per_radian(k_per_deg: float) -> float:
    return k_per_deg / DEG


def per_radian_to_per_degree(k_per_rad: float) -> float:
    return k_per_rad * DEG


@dataclass(frozen=True)
class SpringMaterial:
    """Wire material. ``strength_coeff`` is in MPa·mm^m (diameter in mm)."""

    elastic_modulus: float = 180e9
    strength_coeff: float = 2911.0
    strength_exponent: float = 0.478
    yield_fraction: float = 0.61

    def __post_init__(self):
        if min(self.elastic_modulus, self.strength_coeff, self.strength_exponent, self.yield_fraction) <= 0:
            raise ValueError("material constants must be strictly positive")
        if not 0 < self.strength_exponent < 1:
            raise ValueError("strength_exponent must lie in (0, 1)")
        if not 0 < self.yield_fraction <= 1:
            raise ValueError("yield_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class SpringSpec:
    """A designed balancer spring. ``rate`` is in N·m/rad."""

    wire_diameter: float = 0.0147
    mean_coil_diameter: float = 0.05
    body_turns: float = 2.25
    leg1_length: float = 0.215
    leg2_length: float = 0.11
    rate: float = per_degree_to_per_radian(4.9)

    def __post_init__(self):
        if self.wire_diameter <= 0 or self.mean_coil_diameter <= 0:
            raise InvalidGeometryError("wire and coil diameters must be positive")
        if self.index < MIN_SPRING_INDEX:
            raise SingularIndexError(
                f"spring index D/d = {self.index:.3f} is below {MIN_SPRING_INDEX}")
        if self.leg1_length <= 0 or self.leg2_length <= 0:
            raise InvalidGeometryError("leg lengths must be positive")
        if self.body_turns <= 0:
            raise InvalidGeometryError("body_turns must be positive")
        if self.rate <= 0:
            raise InvalidGeometryError("spring rate must be positive")

    @property
    def index(self) -> float:
        return self.mean_coil_diameter / self.wire_diameter

    @property
    def rate_per_degree(self) -> float:
        return per_radian_to_per_degree(self.rate)


@dataclass(frozen=True)
class BikeParams:
    mass: float = 25.0
    com_height: float = 0.6
    rear_wheel_radius: float = 0.3
    trainer_wheel_radius: float = 0.06
    wheelbase: float = 1.0
    com_rear_offset: float = 0.4
    hub_distance: float = 1.0
    max_steer: float = 30 * DEG
    design_tilt: float = 10 * DEG
    turn_speed: float = 2.0
    max_speed: float = 5.0
    gravity: float = 9.81

    def __post_init__(self):
        lengths = (self.com_height, self.rear_wheel_radius, self.trainer_wheel_radius,
                   self.wheelbase, self.com_rear_offset, self.hub_distance)
        if self.mass <= 0 or min(lengths) <= 0:
            raise InvalidGeometryError("mass and lengths must be positive")
        if self.com_rear_offset > self.hub_distance:
            raise InvalidGeometryError("com_rear_offset must not exceed hub_distance")
        if not 0 < self.design_tilt < math.pi / 2:
            raise InvalidGeometryError("design_tilt must lie in (0, 90) degrees")
        if self.trainer_wheel_radius >= self.rear_wheel_radius:
            raise InvalidGeometryError("trainer wheel must be smaller than the rear wheel")
        if not 0 < self.max_steer < math.pi / 2:
            raise InvalidGeometryError("max_steer must lie in (0, 90) degrees")
        if self.turn_speed <= 0 or self.max_speed <= 0 or self.gravity <= 0:
            raise InvalidGeometryError("speeds and gravity must be positive")


# --- torque balance -----------------------------------------------------------

def leg1_length(rear_wheel_radius: float, trainer_wheel_radius: float, mean_coil_diameter: float) -> float:
    """Leg 1 spans from the coil edge down to the trainer wheel axle."""
    length = rear_wheel_radius - trainer_wheel_radius - mean_coil_diameter / 2
    if length <= 0:
        raise InvalidGeometryError(
            f"rear radius {rear_wheel_radius} leaves no room for leg 1 "
            f"(trainer radius {trainer_wheel_radius}, coil diameter {mean_coil_diameter})")
    return length


def gravity_torque(params: BikeParams, tilt: float) -> float:
    return params.mass * params.gravity * params.com_height * math.sin(tilt)


def spring_torque(spec: SpringSpec, params: BikeParams, tilt: float) -> float:
    return spec.rate * tilt * params.rear_wheel_radius / spec.leg1_length


def centrifugal_torque(params: BikeParams, speed: float, turn_radius: float, tilt: float) -> float:
    if turn_radius <= 0:
        raise InvalidTurnError(f"turn radius must be positive, got {turn_radius}")
    return params.mass * speed ** 2 * params.com_height * math.cos(tilt) / turn_radius


def min_upright_rate(params: BikeParams, leg1: float | None = None) -> float:
    """Small-angle stability threshold ``m g h l1 / R`` in N·m/rad.

    ``leg1`` defaults to the geometric leg-1 length of a 5 cm coil.
    """
    if leg1 is None:
        leg1 = leg1_length(params.rear_wheel_radius, params.trainer_wheel_radius, 0.05)
    return params.mass * params.gravity * params.com_height * leg1 / params.rear_wheel_radius


def equilibrium_rate(params: BikeParams, turn_radius: float, leg1: float | None = None) -> float:
    """Rate (N·m/rad) that holds the design tilt in a turn at ``turn_speed``."""
    if turn_radius <= 0:
        raise InvalidTurnError(f"turn radius must be positive, got {turn_radius}")
    if leg1 is None:
        leg1 = leg1_length(params.rear_wheel_radius, params.trainer_wheel_radius, 0.05)
    theta = params.design_tilt
    m, g, h = params.mass, params.gravity, params.com_height
    load = m * g * h * math.sin(theta) + m * params.turn_speed ** 2 * h * math.cos(theta) / turn_radius
    return load * leg1 / (theta * params.rear_wheel_radius)


# --- wire sizing ----------------------------------------------------------------

def active_turns(spec: SpringSpec) -> float:
    """Body turns plus the end-leg contribution."""
    return spec.body_turns + (spec.leg1_length + spec.leg2_length) / (3 * math.pi * spec.mean_coil_diameter)


def rate_from_wire(spec: SpringSpec, material: SpringMaterial, n_active: float | None = None) -> float:
    """Spring rate in N·m per degree implied by the wire geometry."""
    if n_active is None:
        n_active = active_turns(spec)
    d, big_d = spec.wire_diameter, spec.mean_coil_diameter
    return d ** 4 * material.elastic_modulus * math.pi / (64 * 180 * big_d * n_active)


def wire_diameter_for_rate(k_target: float, material: SpringMaterial, mean_coil_diameter: float,
                           n_active: float) -> float:
    """Invert :func:`rate_from_wire`; ``k_target`` is in N·m per degree."""
    if k_target <= 0:
        raise ValueError("k_target must be positive")
    return (k_target * 64 * 180 * mean_coil_diameter * n_active
            / (material.elastic_modulus * math.pi)) ** 0.25


# --- strength ---------------------------------------------------------------------

def tensile_strength(d: float, material: SpringMaterial) -> float:
    """Minimum tensile strength in Pa for wire diameter ``d`` in metres.

    The correlation is calibrated with the diameter in millimetres and
    returns MPa; both conversions happen here.
    """
    d_mm = d * 1000.0
    return material.strength_coeff / d_mm ** material.strength_exponent * 1e6


def yield_strength(s_ut: float, material: SpringMaterial) -> float:
    return material.yield_fraction * s_ut


def stress_correction(c: float) -> float:
    """Inner-fibre bending stress factor for a round-wire torsion spring."""
    if c <= 1:
        raise SingularIndexError(f"spring index must exceed 1, got {c}")
    return (4 * c * c - c - 1) / (4 * c * (c - 1))


def bending_stress(d: float, moment: float, k_i: float) -> float:
    return 32 * k_i * moment / (math.pi * d ** 3)


def max_safe_moment(d: float, s_y: float, k_i: float) -> float:
    """Moment at which the bending stress reaches the yield strength."""
    return math.pi * d ** 3 * s_y / (32 * k_i)


def max_safe_angle(moment: float, k: float) -> float:
    """Wind-up angle in radians reached at ``moment`` for a rate in N·m/rad."""
    if k <= 0:
        raise ValueError("spring rate must be positive")
    return moment / k


def trainer_wheel_load(moment: float, leg2: float) -> float:
    if leg2 <= 0:
        raise InvalidGeometryError("leg 2 length must be positive")
    return moment / leg2


# --- report --------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float | None
    limit: float | None
    margin: float | None
    unit: str = ""
    message: str = ""


@dataclass(frozen=True)
class DesignReport:
    k: float | None = None
    k_min_upright: float | None = None
    k_required_equilibrium: float | None = None
    min_turn_radius: float | None = None
    leg1_geometric: float | None = None
    active_turns: float | None = None
    wire_rate_per_degree: float | None = None
    wire_diameter_solved: float | None = None
    S_ut: float | None = None
    S_y: float | None = None
    spring_index: float | None = None
    K_i: float | None = None
    M_safe: float | None = None
    theta_max_safe: float | None = None
    trainer_wheel_load: float | None = None
    trainer_wheel_rating: float | None = None
    checks: tuple[Check, ...] = ()
    published: dict = field(default_factory=lambda: dict(PUBLISHED))

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["checks"] = [asdict(c) for c in self.checks]
        out["passed"] = self.passed
        out["derived"] = {
            "k_per_degree": _maybe(per_radian_to_per_degree, self.k),
            "k_required_equilibrium_per_degree": _maybe(per_radian_to_per_degree, self.k_required_equilibrium),
            "theta_max_safe_deg": _maybe(math.degrees, self.theta_max_safe),
        }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        rows = [
            ("spring rate k", _fmt(self.k, 1, "N·m/rad"), _fmt(_maybe(per_radian_to_per_degree, self.k), 1, "N·m/deg")),
            ("upright threshold k_min", _fmt(self.k_min_upright, 1, "N·m/rad"),
             f"published {PUBLISHED['k_min_upright_n_m_per_rad']} N·m/rad"),
            ("turn-equilibrium rate", _fmt(self.k_required_equilibrium, 1, "N·m/rad"),
             _fmt(_maybe(per_radian_to_per_degree, self.k_required_equilibrium), 1, "N·m/deg")
             + f" (published {PUBLISHED['k_equilibrium_n_m_per_deg']} N·m/deg)"),
            ("minimum turn radius", _fmt(self.min_turn_radius, 1e0, "m"),
             f"published {PUBLISHED['min_turn_radius_m']} m"),
            ("leg 1 (geometric)", _fmt(self.leg1_geometric, 1, "m"), ""),
            ("active turns N_a", _fmt(self.active_turns, 1, ""), ""),
            ("rate from wire", _fmt(self.wire_rate_per_degree, 1, "N·m/deg"), ""),
            ("wire diameter for k", _fmt(self.wire_diameter_solved, 1e3, "mm"),
             f"published {PUBLISHED['wire_diameter_m'] * 1e3:g} mm"),
            ("tensile strength S_ut", _fmt(self.S_ut, 1e-6, "MPa"), ""),
            ("yield strength S_y", _fmt(self.S_y, 1e-6, "MPa"), f"published {PUBLISHED['yield_strength_mpa']} MPa"),
            ("spring index c", _fmt(self.spring_index, 1, ""), ""),
            ("stress factor K_i", _fmt(self.K_i, 1, ""), ""),
            ("max safe moment", _fmt(self.M_safe, 1, "N·m"), f"published {PUBLISHED['max_safe_moment_n_m']} N·m"),
            ("max safe angle", _fmt(_maybe(math.degrees, self.theta_max_safe), 1, "deg"),
             f"published {PUBLISHED['max_safe_angle_deg']} deg"),
            ("trainer wheel load", _fmt(self.trainer_wheel_load, 1, "N"),
             "rating " + _fmt(self.trainer_wheel_rating, 1, "N")),
        ]
        width = max(len(r[0]) for r in rows)
        lines = ["Balancer spring design report", "=" * 29]
        lines += [f"{name:<{width}}  {value:<22} {note}".rstrip() for name, value, note in rows]
        lines.append("")
        lines.append("Checks")
        for c in self.checks:
            verdict = "PASS" if c.passed else "FAIL"
            margin = "" if c.margin is None else f"margin {c.margin:+.4g}{(' ' + c.unit) if c.unit else ''}"
            lines.append(f"  [{verdict}] {c.name:<20} {margin} {c.message}".rstrip())
        lines.append(f"Overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _maybe(fn, value):
    return None if value is None else fn(value)


def _fmt(value, scale, unit):
    if value is None:
        return "n/a"
    text = f"{value * scale:.4g}"
    return f"{text} {unit}".strip()


def validate_design(spec: SpringSpec, material: SpringMaterial, params: BikeParams,
                    trainer_wheel_rating: float = DEFAULT_TRAINER_WHEEL_RATING) -> DesignReport:
    """Run the full sizing chain for ``spec`` and grade it.

    Sub-calculation failures become failed checks; nothing is raised.
    """
    values: dict = {"k": spec.rate, "trainer_wheel_rating": trainer_wheel_rating}
    checks: list[Check] = []

    def attempt(name, fn):
        try:
            return fn()
        except (SpringBikeError, ValueError, ZeroDivisionError, OverflowError) as exc:
            checks.append(Check(name, False, None, None, None, message=str(exc)))
            return None

    values["leg1_geometric"] = attempt(
        "geometry", lambda: leg1_length(params.rear_wheel_radius, params.trainer_wheel_radius,
                                        spec.mean_coil_diameter))
    values["k_min_upright"] = attempt("upright_stability", lambda: min_upright_rate(params, spec.leg1_length))
    values["min_turn_radius"] = attempt(
        "turn_equilibrium", lambda: min_turn_radius(params.wheelbase, params.com_rear_offset, params.max_steer))
    if values["min_turn_radius"] is not None:
        values["k_required_equilibrium"] = attempt(
            "turn_equilibrium", lambda: equilibrium_rate(params, values["min_turn_radius"], spec.leg1_length))
    values["active_turns"] = attempt("wire_sizing", lambda: active_turns(spec))
    if values["active_turns"] is not None:
        n_a = values["active_turns"]
        values["wire_rate_per_degree"] = attempt("wire_sizing", lambda: rate_from_wire(spec, material, n_a))
        values["wire_diameter_solved"] = attempt(
            "wire_sizing", lambda: wire_diameter_for_rate(spec.rate_per_degree, material,
                                                          spec.mean_coil_diameter, n_a))
    values["S_ut"] = attempt("compression_safety", lambda: tensile_strength(spec.wire_diameter, material))
    values["spring_index"] = spec.index
    values["K_i"] = attempt("compression_safety", lambda: stress_correction(spec.index))
    if values["S_ut"] is not None and values["K_i"] is not None:
        values["S_y"] = yield_strength(values["S_ut"], material)
        values["M_safe"] = max_safe_moment(spec.wire_diameter, values["S_y"], values["K_i"])
        values["theta_max_safe"] = attempt("compression_safety",
                                           lambda: max_safe_angle(values["M_safe"], spec.rate))
    values["trainer_wheel_load"] = attempt(
        "trainer_wheel_load", lambda: trainer_wheel_load(spec.rate * params.design_tilt, spec.leg2_length))

    failed = {c.name for c in checks}
    if "upright_stability" not in failed:
        k_min = values["k_min_upright"]
        checks.append(Check("upright_stability", spec.rate >= k_min, spec.rate, k_min,
                            spec.rate / k_min - 1.0, "fraction"))
    if "turn_equilibrium" not in failed:
        k_eq = values["k_required_equilibrium"]
        checks.append(Check("turn_equilibrium", spec.rate >= k_eq, spec.rate, k_eq,
                            spec.rate / k_eq - 1.0, "fraction"))
    if "compression_safety" not in failed:
        theta = values["theta_max_safe"]
        checks.append(Check("compression_safety", theta > params.design_tilt, math.degrees(theta),
                            math.degrees(params.design_tilt), math.degrees(theta - params.design_tilt), "deg"))
    if "trainer_wheel_load" not in failed:
        load = values["trainer_wheel_load"]
        checks.append(Check("trainer_wheel_load", load <= trainer_wheel_rating, load, trainer_wheel_rating,
                            trainer_wheel_rating - load, "N"))
    order = ["geometry", "upright_stability", "turn_equilibrium", "compression_safety",
             "trainer_wheel_load", "wire_sizing"]
    checks.sort(key=lambda c: order.index(c.name))
    return DesignReport(checks=tuple(checks), **values)
