"""Fixed-step plant model of the spring-balanced bicycle.

Frame conventions: ``x`` east, ``y`` north, yaw counter-clockwise from east,
steer positive to the left. Roll is positive toward the outside of a left
turn, which is the direction the centrifugal load pushes a bicycle riding
on spring-loaded trainer wheels.

The roll model is a point-mass inverted pendulum about the ground contact
line with inertia ``m h^2`` and a viscous damper standing in for the
balancer's damping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geodesy import local_to_geodetic
from .geometry import signed_turn_radius_cm
from .localization import arc_advance, wrap_angle
from .spring_design import BikeParams, SpringSpec

DEG = math.pi / 180.0

CAPSIZE = "capsize"
COLLISION = "collision"
BATTERY_EMPTY = "battery_empty"
BATTERY_FAULT = "battery_fault"
CENTER_CROSSING = "center_crossing"
TERMINAL_EVENTS = frozenset({CAPSIZE, COLLISION, BATTERY_EMPTY})

MAX_DT = 0.05


@dataclass(frozen=True, slots=True)
class Battery:
    capacity: float = 2.2          # A·h
    voltage: float = 11.7          # V
    max_discharge: float = 66.0    # A, 30C on 2200 mA·h

    def __post_init__(self):
        if min(self.capacity, self.voltage, self.max_discharge) <= 0:
            raise ValueError("battery ratings must be positive")


@dataclass(frozen=True, slots=True)
class PlantConfig:
    damping: float = 15.0                   # N·m·s/rad
    motor_tau: float = 0.3                  # s
    steer_rate_max: float = 150 * DEG       # rad/s of steer at full duty
    steer_slip: float = 0.1
    slip_direction: int = 1
    slip_bias_limit: float = 10 * DEG       # play between motor and steering column
    brake_decel: float = 2.5                # m/s^2
    brake_stroke_time: float = 0.4          # s
    drive_counts_per_rev: int = 4096
    steer_counts_per_rev: int = 4096
    pot_range: float = 45 * DEG
    contact_radius: float = 0.25            # m
    sonar_beam_width: float = 25 * DEG
    sonar_mount_yaw: float = 10 * DEG
    sonar_min_range: float = 0.02
    sonar_max_range: float = 4.0
    mag_noise: float = 0.5 * DEG
    gps_noise: float = 2.0
    pot_noise: float = 0.0
    origin_lat: float = 22.3194
    origin_lon: float = 87.3091
    capsize_angle: float = 24.4 * DEG
    idle_current: float = 0.8
    full_current: float = 7.5
    electronics_current: float = 0.5
    brake_motor_current: float = 2.0
    battery: Battery = field(default_factory=Battery)

    def __post_init__(self):
        if not 0.0 <= self.steer_slip <= 0.3:
            raise ValueError("steer_slip must lie in [0, 0.3]")
        if not 0.0 <= self.slip_bias_limit < self.pot_range:
            raise ValueError("slip_bias_limit must be non-negative and keep the pot inside its range")
        if self.slip_direction not in (-1, 1):
            raise ValueError("slip_direction must be +1 or -1")
        if min(self.motor_tau, self.steer_rate_max, self.brake_stroke_time, self.capsize_angle) <= 0:
            raise ValueError("time constants, rates and capsize angle must be positive")
        if self.drive_counts_per_rev <= 0 or self.steer_counts_per_rev <= 0:
            raise ValueError("encoder resolutions must be positive")
        if min(self.mag_noise, self.gps_noise, self.pot_noise, self.damping, self.brake_decel) < 0:
            raise ValueError("noise levels, damping and deceleration must be non-negative")
        if not 0 < self.sonar_min_range < self.sonar_max_range:
            raise ValueError("sonar range limits must be ordered and positive")


@dataclass(frozen=True, slots=True)
class SimState:
    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0
    roll: float = 0.0
    roll_rate: float = 0.0
    speed: float = 0.0
    steer: float = 0.0
    drive_engaged: bool = True
    battery_charge: float = 2.2
    time: float = 0.0
    # hidden actuator/sensor substrate
    wheel_rotation: float = 0.0
    steer_motor_angle: float = 0.0
    brake_level: float = 0.0
    brake_motor_time: float = 0.0
    current: float = 0.0


@dataclass(frozen=True, slots=True)
class Obstacle:
    x: float
    y: float
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("obstacle radius must be positive")


@dataclass(frozen=True, slots=True)
class SensorFrame:
    drive_encoder_counts: int = 0
    steer_encoder_counts: int = 0
    magnetometer_heading: float = 0.0
    sonar_left: float | None = None
    sonar_right: float | None = None
    gps_lat: float = 0.0
    gps_lon: float = 0.0
    steer_pot_angle: float = 0.0
    moc_center_pulse: bool = False

    def nearest_sonar(self) -> float:
        readings = [r for r in (self.sonar_left, self.sonar_right) if r is not None]
        return min(readings) if readings else math.inf


@dataclass(frozen=True, slots=True)
class ActuatorInputs:
    drive_duty: float = 0.0
    steer_duty: float = 0.0
    brake_engaged: bool = False
    engage_drive: bool | None = None


def _clamp(v, lo, hi):
    return lo if v < lo else hi if v > hi else v


# --- dynamics ---------------------------------------------------------------------

def roll_accel(state: SimState, spec: SpringSpec, params: BikeParams, turn_radius: float,
               damping: float = 15.0) -> float:
    """Roll acceleration (rad/s^2) from weight, turn, spring and damper torques.

    ``turn_radius`` is the signed centre-of-mass radius, ``inf`` when straight.
    """
    m, h = params.mass, params.com_height
    theta = state.roll
    t_weight = m * params.gravity * h * math.sin(theta)
    t_turn = 0.0 if math.isinf(turn_radius) else m * state.speed ** 2 * h * math.cos(theta) / turn_radius
    t_spring = spec.rate * theta * params.rear_wheel_radius / spec.leg1_length
    return (t_weight + t_turn - t_spring - damping * state.roll_rate) / (m * h * h)


def steer_slip_model(delta: float, slip: float = 0.1, slip_direction: int = 1) -> float:
    """Actual steer change for a commanded ``delta``; lossy in one direction only."""
    if delta * slip_direction > 0:
        return delta * (1.0 - slip)
    return delta


def battery_draw(inputs: ActuatorInputs, drive_engaged: bool, brake_motor_active: bool = False,
                 config: PlantConfig | None = None) -> float:
    """Total current (A).

    Each motor interpolates linearly from its idle current at zero duty to the
    full current at unit duty. The drive motor is powered whenever it is
    engaged; the steer motor only while it is commanded.
    """
    cfg = config or DEFAULT_PLANT
    span = cfg.full_current - cfg.idle_current
    current = cfg.electronics_current
    if drive_engaged:
        current += cfg.idle_current + span * min(abs(inputs.drive_duty), 1.0)
    if inputs.steer_duty != 0.0:
        current += cfg.idle_current + span * min(abs(inputs.steer_duty), 1.0)
    if brake_motor_active:
        current += cfg.brake_motor_current
    return current


# --- sensing --------------------------------------------------------------------------

def _cone_distance(px, py, axis, half, ox, oy, r, max_range):
    dx, dy = ox - px, oy - py
    dist = math.hypot(dx, dy)
    if dist - r > max_range:
        return math.inf
    if dist <= r:
        return 0.0
    bearing = wrap_angle(math.atan2(dy, dx) - axis)
    if abs(bearing) <= half:
        return dist - r
    best = math.inf
    r2 = r * r
    for edge in (axis - half, axis + half):
        t = dx * math.cos(edge) + dy * math.sin(edge)
        if t <= 0:
            continue
        perp2 = dist * dist - t * t
        if perp2 <= r2:
            best = min(best, t - math.sqrt(r2 - perp2))
    return best


def sample_sonar(state: SimState, world, config: PlantConfig | None = None) -> tuple[float | None, float | None]:
    """Nearest obstacle surface inside each sonar cone, ``None`` when out of range."""
    cfg = config or DEFAULT_PLANT
    half = cfg.sonar_beam_width / 2
    readings = []
    for axis in (state.yaw + cfg.sonar_mount_yaw, state.yaw - cfg.sonar_mount_yaw):
        best = math.inf
        for ob in world:
            d = _cone_distance(state.x, state.y, axis, half, ob.x, ob.y, ob.radius, cfg.sonar_max_range)
            if d < best:
                best = d
        if best > cfg.sonar_max_range:
            readings.append(None)
        else:
            readings.append(max(best, cfg.sonar_min_range))
    return readings[0], readings[1]


def sample_sensors(state: SimState, world, config: PlantConfig | None = None,
                   rng: np.random.Generator | None = None, moc_pulse: bool = False) -> SensorFrame:
    """Read every sensor at ``state``. ``rng=None`` gives noise-free readings.

    The potentiometer sits on the motor side of the steering chain, so it
    reads the true steer angle plus whatever slip has accumulated. The
    magnetometer heading is measured counter-clockwise from north.
    """
    cfg = config or DEFAULT_PLANT
    if rng is None:
        n_mag = n_gx = n_gy = n_pot = 0.0
    else:
        n_mag, n_gx, n_gy, n_pot = rng.standard_normal(4).tolist()
    left, right = sample_sonar(state, world, cfg)
    lat, lon = local_to_geodetic(state.x + cfg.gps_noise * n_gx, state.y + cfg.gps_noise * n_gy,
                                 cfg.origin_lat, cfg.origin_lon, check=False)
    return SensorFrame(
        drive_encoder_counts=round(state.wheel_rotation / (2 * math.pi) * cfg.drive_counts_per_rev),
        steer_encoder_counts=round(state.steer_motor_angle / (2 * math.pi) * cfg.steer_counts_per_rev),
        magnetometer_heading=wrap_angle(state.yaw - math.pi / 2 + cfg.mag_noise * n_mag),
        sonar_left=left,
        sonar_right=right,
        gps_lat=lat,
        gps_lon=lon,
        steer_pot_angle=state.steer_motor_angle + cfg.pot_noise * n_pot,
        moc_center_pulse=moc_pulse,
    )


# --- integrator --------------------------------------------------------------------------

def step(state: SimState, inputs: ActuatorInputs, world, spec: SpringSpec, params: BikeParams,
         dt: float, config: PlantConfig | None = None, rng: np.random.Generator | None = None):
    """Advance the plant by ``dt`` seconds.

    Returns ``(state, frame, events)``. When the steering passes through
    centre the motor is halted on the centre flap for the rest of the tick,
    so the sample carrying the pulse is taken with the steering exactly
    centred.
    """
    cfg = config or DEFAULT_PLANT
    if not 0.0 < dt <= MAX_DT:
        raise ValueError(f"dt must lie in (0, {MAX_DT}] s, got {dt}")
    events = []

    engaged = state.drive_engaged if inputs.engage_drive is None else bool(inputs.engage_drive)
    drive_duty = _clamp(inputs.drive_duty, -1.0, 1.0)
    steer_duty = _clamp(inputs.steer_duty, -1.0, 1.0)

    # steering chain
    steer, motor = state.steer, state.steer_motor_angle
    pulse = False
    d_motor = steer_duty * cfg.steer_rate_max * dt
    if d_motor != 0.0:
        d_steer = steer_slip_model(d_motor, cfg.steer_slip, cfg.slip_direction)
        # slip stops once the coupling has taken up all of its play
        bias = motor + d_motor - (steer + d_steer)
        if abs(bias) > cfg.slip_bias_limit:
            d_steer = motor + d_motor - steer - math.copysign(cfg.slip_bias_limit, bias)
        new_steer = steer + d_steer
        limit = params.max_steer
        if abs(new_steer) > limit:
            new_steer = math.copysign(limit, new_steer)
            d_motor *= (new_steer - steer) / d_steer
            d_steer = new_steer - steer
        if steer != 0.0 and (new_steer == 0.0 or (new_steer > 0.0) != (steer > 0.0)):
            d_motor *= steer / (steer - new_steer)
            new_steer = 0.0
            pulse = True
            events.append(CENTER_CROSSING)
        steer, motor = new_steer, motor + d_motor

    # brake: pads bite at once, release ramps down over one stroke
    brake_time = max(state.brake_motor_time - dt, 0.0)
    if inputs.brake_engaged:
        if state.brake_level < 1.0:
            brake_time = cfg.brake_stroke_time
        brake_level = 1.0
    else:
        if state.brake_level == 1.0:
            brake_time = cfg.brake_stroke_time
        brake_level = max(state.brake_level - dt / cfg.brake_stroke_time, 0.0)

    # drive: first-order motor toward duty * v_max, then brake deceleration
    v0 = state.speed
    v = v0
    if engaged:
        target = drive_duty * params.max_speed
        v = target + (v0 - target) * math.exp(-dt / cfg.motor_tau)
    decel = brake_level * cfg.brake_decel * dt
    if v > 0.0:
        v = max(v - decel, 0.0)
    elif v < 0.0:
        v = min(v + decel, 0.0)
    v = _clamp(v, -params.max_speed, params.max_speed)

    ds = 0.5 * (v0 + v) * dt
    x, y, yaw = arc_advance(state.x, state.y, state.yaw, ds, steer, params.wheelbase)

    # roll, semi-implicit Euler
    radius = signed_turn_radius_cm(params.wheelbase, params.com_rear_offset, steer)
    probe = SimState(roll=state.roll, roll_rate=state.roll_rate, speed=v)
    acc = roll_accel(probe, spec, params, radius, cfg.damping)
    roll_rate = state.roll_rate + acc * dt
    roll = state.roll + roll_rate * dt

    # battery
    applied = ActuatorInputs(drive_duty if engaged else 0.0, steer_duty, inputs.brake_engaged)
    current = battery_draw(applied, engaged, brake_time > 0.0 or state.brake_motor_time > 0.0, cfg)
    if current > cfg.battery.max_discharge:
        events.append(BATTERY_FAULT)
        current = cfg.battery.max_discharge
    charge = state.battery_charge - current * dt / 3600.0
    if charge <= 0.0:
        charge = 0.0
        events.append(BATTERY_EMPTY)

    new = SimState(x, y, yaw, roll, roll_rate, v, steer, engaged, charge, state.time + dt,
                   state.wheel_rotation + ds / params.rear_wheel_radius, motor, brake_level,
                   brake_time, current)

    if abs(roll) > cfg.capsize_angle:
        events.append(CAPSIZE)
    for ob in world:
        if math.hypot(ob.x - x, ob.y - y) - ob.radius < cfg.contact_radius:
            events.append(COLLISION)
            break

    frame = sample_sensors(new, world, cfg, rng, moc_pulse=pulse)
    return new, frame, events


DEFAULT_PLANT = PlantConfig()
