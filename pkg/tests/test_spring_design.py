import json
import math

import pytest
from hypothesis import given, strategies as st

from springbike.errors import InvalidGeometryError, InvalidTurnError, SingularIndexError
from springbike.geometry import min_turn_radius
from springbike.spring_design import (
    PUBLISHED, BikeParams, SpringMaterial, SpringSpec, active_turns, centrifugal_torque, equilibrium_rate,
    gravity_torque, leg1_length, max_safe_angle, max_safe_moment, min_upright_rate, per_degree_to_per_radian,
    rate_from_wire, spring_torque, stress_correction, tensile_strength, trainer_wheel_load, validate_design,
    wire_diameter_for_rate, yield_strength,
)

DEG = math.pi / 180
BIKE = BikeParams()
STEEL = SpringMaterial()


def rel(a, b):
    return abs(a - b) / abs(b)


# --- leg 1 -------------------------------------------------------------------------

def test_leg1_published_example():
    assert leg1_length(0.30, 0.06, 0.05) == pytest.approx(0.215, abs=1e-12)


def test_leg1_equal_radii_rejected():
    with pytest.raises(InvalidGeometryError):
        leg1_length(0.30, 0.30, 0.05)


def test_leg1_hand_arithmetic():
    assert leg1_length(0.35, 0.05, 0.04) == pytest.approx(0.28, abs=1e-12)


# --- torques -----------------------------------------------------------------------

def test_gravity_torque_examples():
    assert gravity_torque(BIKE, 0.0) == 0.0
    assert gravity_torque(BIKE, 10 * DEG) == pytest.approx(25.55, abs=0.01)
    assert gravity_torque(BIKE, 90 * DEG) == pytest.approx(147.15, rel=1e-12)


@given(st.floats(-math.pi / 2, math.pi / 2))
def test_gravity_torque_is_odd(theta):
    assert gravity_torque(BIKE, -theta) == -gravity_torque(BIKE, theta)


def test_spring_torque_examples():
    spec = SpringSpec(rate=280.0)
    assert spring_torque(spec, BIKE, 0.0) == 0.0
    assert spring_torque(spec, BIKE, 0.1) == pytest.approx(39.07, abs=0.01)
    double = SpringSpec(rate=560.0)
    assert spring_torque(double, BIKE, 0.1) == pytest.approx(2 * spring_torque(spec, BIKE, 0.1), rel=1e-12)


def test_centrifugal_torque_examples():
    assert centrifugal_torque(BIKE, 0.0, 1.78, 10 * DEG) == 0.0
    assert centrifugal_torque(BIKE, 2.0, 1.78, 10 * DEG) == pytest.approx(33.20, abs=0.01)
    assert centrifugal_torque(BIKE, 2.0, 1e12, 10 * DEG) < 1e-9
    with pytest.raises(InvalidTurnError):
        centrifugal_torque(BIKE, 2.0, 0.0, 0.0)


# --- rate thresholds ---------------------------------------------------------------------

def test_min_upright_rate_oracle():
    assert min_upright_rate(BIKE) == pytest.approx(105.46, abs=0.01)
    assert min_upright_rate(BikeParams(mass=50.0)) == pytest.approx(2 * min_upright_rate(BIKE), rel=1e-12)
    assert PUBLISHED["k_min_upright_n_m_per_rad"] == 117.7


def test_equilibrium_rate_oracle():
    k = equilibrium_rate(BIKE, 1.78)
    th = 10 * DEG
    oracle = (25 * 9.81 * 0.6 * math.sin(th) + 25 * 4 * 0.6 * math.cos(th) / 1.78) * 0.215 / (th * 0.3)
    assert rel(k, oracle) < 1e-12
    assert k == pytest.approx(241, abs=0.5)
    assert k * DEG == pytest.approx(4.21, abs=0.01)
    assert PUBLISHED["k_equilibrium_n_m_per_deg"] == 4.9


def test_equilibrium_rate_reduces_to_upright_limit():
    still = BikeParams(turn_speed=1e-9, design_tilt=1e-6)
    assert equilibrium_rate(still, 1.78) == pytest.approx(min_upright_rate(still), rel=1e-9)


def test_equilibrium_rate_rejects_bad_radius():
    with pytest.raises(InvalidTurnError):
        equilibrium_rate(BIKE, -1.0)


@given(st.floats(1.001, 3.0), st.floats(0.1, 30.0))
def test_restoring_torque_above_threshold(factor, tilt_deg):
    spec = SpringSpec(rate=min_upright_rate(BIKE) * factor)
    theta = tilt_deg * DEG
    assert spring_torque(spec, BIKE, theta) - gravity_torque(BIKE, theta) > 0


# --- wire sizing -------------------------------------------------------------------------

def test_active_turns_examples():
    assert active_turns(SpringSpec()) == pytest.approx(2.940, abs=5e-4)
    # legs shrunk toward zero leave the body turns
    tiny = SpringSpec(leg1_length=1e-12, leg2_length=1e-12)
    assert active_turns(tiny) == pytest.approx(2.25, abs=1e-9)


def test_rate_from_wire_example():
    spec = SpringSpec(wire_diameter=0.011)
    assert rate_from_wire(spec, STEEL, 2.94) == pytest.approx(4.9, rel=0.01)


@given(st.floats(0.005, 0.03), st.floats(1e-4, 5e-3))
def test_rate_from_wire_increasing(d, step):
    a = rate_from_wire(SpringSpec(wire_diameter=d), STEEL, 2.94)
    b = rate_from_wire(SpringSpec(wire_diameter=d + step), STEEL, 2.94)
    assert b > a


def test_wire_diameter_for_rate_examples():
    d = wire_diameter_for_rate(4.9, STEEL, 0.05, 2.94)
    assert d == pytest.approx(0.0110, abs=5e-5)
    assert wire_diameter_for_rate(16 * 4.9, STEEL, 0.05, 2.94) == pytest.approx(2 * d, rel=1e-12)
    with pytest.raises(ValueError):
        wire_diameter_for_rate(0.0, STEEL, 0.05, 2.94)


@given(st.floats(0.005, 0.03))
def test_wire_inversion_roundtrip(d):
    k = rate_from_wire(SpringSpec(wire_diameter=d), STEEL, 2.94)
    assert rel(wire_diameter_for_rate(k, STEEL, 0.05, 2.94), d) < 1e-9
    assert rel(rate_from_wire(SpringSpec(wire_diameter=wire_diameter_for_rate(k, STEEL, 0.05, 2.94)),
                              STEEL, 2.94), k) < 1e-9


# --- strength -----------------------------------------------------------------------------

def test_tensile_and_yield_strength():
    s_ut = tensile_strength(0.0147, STEEL)
    assert s_ut / 1e6 == pytest.approx(805.4, abs=0.1)
    assert yield_strength(s_ut, STEEL) / 1e6 == pytest.approx(491.4, rel=0.005)
    assert tensile_strength(0.001, STEEL) / 1e6 == pytest.approx(2911.0, rel=1e-12)


def test_stress_correction_examples():
    assert stress_correction(50 / 14.7) == pytest.approx(1.282, abs=5e-4)
    assert stress_correction(10.0) == pytest.approx(389 / 360, rel=1e-12)
    assert stress_correction(1e9) == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(SingularIndexError):
        stress_correction(1.0)


# K_i reaches 2 where 4c^2 - 7c + 1 = 0; below that index it exceeds 2
K_I_TWO = (7 + math.sqrt(33)) / 8


@given(st.floats(1.2, 1e6), st.floats(1e-3, 10.0))
def test_stress_correction_decreasing_above_one(c, dc):
    k = stress_correction(c)
    assert k > 1.0
    assert stress_correction(c + dc) < k


@given(st.floats(K_I_TWO, 1e6))
def test_stress_correction_at_most_two(c):
    assert stress_correction(c) <= 2.0 + 1e-12


def test_stress_correction_exceeds_two_near_singular_index():
    assert stress_correction(1.5) == pytest.approx(6.5 / 3, rel=1e-12)
    assert stress_correction(K_I_TWO) == pytest.approx(2.0, rel=1e-12)


def test_max_safe_moment_examples():
    assert max_safe_moment(0.0147, 491.4e6, 1.282) == pytest.approx(119.7, rel=0.005)
    assert max_safe_moment(0.0147, 2 * 491.4e6, 1.282) == pytest.approx(2 * max_safe_moment(0.0147, 491.4e6, 1.282))
    assert max_safe_moment(0.01, 400e6, 1.2) == pytest.approx(32.7, abs=0.05)


def test_chain_consistency():
    d = 0.0147
    m = max_safe_moment(d, yield_strength(tensile_strength(d, STEEL), STEEL), stress_correction(0.05 / d))
    assert rel(m, 119.7) < 0.005


def test_max_safe_angle_examples():
    k = per_degree_to_per_radian(4.9)
    assert max_safe_angle(119.7, k) / DEG == pytest.approx(24.4, abs=0.05)
    assert max_safe_angle(0.0, k) == 0.0


def test_trainer_wheel_load_examples():
    assert trainer_wheel_load(49.0, 0.11) == pytest.approx(445.5, abs=0.05)
    assert trainer_wheel_load(641.5, 0.22) == pytest.approx(trainer_wheel_load(641.5, 0.11) / 2)
    with pytest.raises(InvalidGeometryError):
        trainer_wheel_load(10.0, 0.0)


# --- types -------------------------------------------------------------------------------

def test_spring_index_guard():
    with pytest.raises(SingularIndexError):
        SpringSpec(wire_diameter=0.05, mean_coil_diameter=0.05)


def test_bike_params_guards():
    with pytest.raises(InvalidGeometryError):
        BikeParams(com_rear_offset=1.5)
    with pytest.raises(InvalidGeometryError):
        BikeParams(trainer_wheel_radius=0.3)


def test_material_guards():
    with pytest.raises(ValueError):
        SpringMaterial(strength_exponent=1.2)
    with pytest.raises(ValueError):
        SpringMaterial(yield_fraction=0.0)


# --- report ------------------------------------------------------------------------------

def test_nominal_design_passes():
    report = validate_design(SpringSpec(), STEEL, BIKE)
    assert report.passed
    safety = report.check("compression_safety")
    assert safety.passed and report.theta_max_safe / DEG == pytest.approx(24.4, abs=0.05)
    assert [c.name for c in report.checks] == ["upright_stability", "turn_equilibrium", "compression_safety",
                                                "trainer_wheel_load"]


def test_soft_spring_fails_upright():
    report = validate_design(SpringSpec(rate=90.0), STEEL, BIKE)
    assert not report.check("upright_stability").passed
    assert not report.passed


def test_report_prints_published_values():
    text = validate_design(SpringSpec(), STEEL, BIKE).to_text()
    assert "published 117.7 N·m/rad" in text
    assert "published 4.9 N·m/deg" in text


def test_report_never_raises_on_broken_geometry():
    bike = BikeParams(rear_wheel_radius=0.1, trainer_wheel_radius=0.09)
    report = validate_design(SpringSpec(), STEEL, bike)
    assert not report.check("geometry").passed
    assert not report.passed


def test_report_is_pure():
    a = validate_design(SpringSpec(), STEEL, BIKE)
    b = validate_design(SpringSpec(), STEEL, BIKE)
    assert a == b and a.to_json() == b.to_json()
    assert json.loads(a.to_json())["passed"] is True


def test_perturbed_design_matches_hand_computation():
    bike = BikeParams(mass=30.0)
    spec = SpringSpec()
    report = validate_design(spec, STEEL, bike)

    m, g, h, R, l1 = 30.0, 9.81, 0.6, 0.3, 0.215
    k = 4.9 * 180 / math.pi
    k_min = m * g * h * l1 / R
    rear = 1.0 / math.tan(math.radians(30))
    r = math.sqrt(0.4 ** 2 + rear ** 2)
    th = math.radians(10)
    k_eq = (m * g * h * math.sin(th) + m * 2.0 ** 2 * h * math.cos(th) / r) * l1 / (th * R)
    n_a = 2.25 + (0.215 + 0.11) / (3 * math.pi * 0.05)
    wire_rate = 0.0147 ** 4 * 180e9 * math.pi / (64 * 180 * 0.05 * n_a)
    d_solved = (4.9 * 64 * 180 * 0.05 * n_a / (180e9 * math.pi)) ** 0.25
    s_ut = 2911 / 14.7 ** 0.478 * 1e6
    s_y = 0.61 * s_ut
    c = 0.05 / 0.0147
    k_i = (4 * c * c - c - 1) / (4 * c * (c - 1))
    moment = math.pi * 0.0147 ** 3 * s_y / (32 * k_i)
    theta_max = moment / k
    load = k * th / 0.11

    expected = {"k_min_upright": k_min, "k_required_equilibrium": k_eq, "min_turn_radius": r,
                "active_turns": n_a, "wire_rate_per_degree": wire_rate, "wire_diameter_solved": d_solved,
                "S_ut": s_ut, "S_y": s_y, "K_i": k_i, "M_safe": moment, "theta_max_safe": theta_max,
                "trainer_wheel_load": load}
    for name, value in expected.items():
        assert rel(getattr(report, name), value) < 1e-9, name
    assert report.check("upright_stability").passed == (k >= k_min)
    assert report.check("turn_equilibrium").passed == (k >= k_eq)
    assert report.min_turn_radius == pytest.approx(min_turn_radius(1.0, 0.4))
