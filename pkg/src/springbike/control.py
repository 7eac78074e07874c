"""Drive, steering, planning, avoidance and braking controllers.

Every controller is a pure step function: state in, state out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import SensorFault
from .geometry import MAX_STEER
from .localization import PoseEstimate, wrap_angle
from .plant import ActuatorInputs, SensorFrame
from .spring_design import BikeParams

DEG = math.pi / 180.0

PLANNER = "planner"
AVOIDANCE = "avoidance"
BRAKE = "brake"


def _clamp(v, lo, hi):
    return lo if v < lo else hi if v > hi else v


# --- PID ------------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class PidState:
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    integral: float = 0.0
    prev_error: float | None = None
    output_limits: tuple[float, float] = (-math.inf, math.inf)
    integral_limits: tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self):
        if self.output_limits[0] > self.output_limits[1]:
            raise ValueError("output_limits must be ordered")
        if self.integral_limits[0] > self.integral_limits[1]:
            raise ValueError("integral_limits must be ordered")

    def reset(self) -> PidState:
        return replace(self, integral=0.0, prev_error=None)


def pid_step(s: PidState, setpoint: float, measurement: float, dt: float) -> tuple[float, PidState]:
    """Positional PID with a clamped integral (anti-windup) and clamped output.

    The derivative term is zero on the first call after a reset.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    error = setpoint - measurement
    integral = _clamp(s.integral + error * dt, *s.integral_limits)
    derivative = 0.0 if s.prev_error is None else (error - s.prev_error) / dt
    output = s.kp * error + s.ki * integral + s.kd * derivative
    output = _clamp(output, *s.output_limits)
    return output, replace(s, integral=integral, prev_error=error)


def default_speed_pid() -> PidState:
    return PidState(kp=0.8, ki=1.5, kd=0.0, output_limits=(-1.0, 1.0), integral_limits=(-0.6, 0.6))


# --- steering ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class SteerController:
    """Closed-loop steer angle control with centre-flap re-zeroing.

    The estimate is the potentiometer reading minus ``bias_correction``.
    Every centre pulse re-zeroes it. When the estimate comes back to centre
    without a pulse having been seen, the controller keeps creeping in the
    same direction (up to ``seek_limit``) until the flap fires.
    """

    inner: PidState = PidState(kp=0.3 / (150 * DEG), output_limits=(-1.0, 1.0))
    target_angle: float = 0.0
    accumulated_estimate: float = 0.0
    bias_correction: float = 0.0
    outer_gain: float = 10.0
    rate_max: float = 150 * DEG
    counts_per_rev: int = 4096
    pot_range: float = 45 * DEG
    deadband: float = 0.05 * DEG
    center_window: float = 1.0 * DEG
    hysteresis: float = 0.5 * DEG
    seek_rate: float = 20 * DEG
    seek_limit: float = 6 * DEG
    prev_counts: int | None = None
    homed: bool = True
    side: int = 0
    seeking: int = 0

    def with_target(self, angle: float) -> SteerController:
        return replace(self, target_angle=_clamp(angle, -MAX_STEER, MAX_STEER))


def steer_estimate(c: SteerController, frame: SensorFrame) -> float:
    """Steer angle estimate implied by ``frame`` under controller ``c``."""
    if frame.moc_center_pulse:
        return 0.0
    return frame.steer_pot_angle - c.bias_correction


def steer_control_step(c: SteerController, frame: SensorFrame, dt: float) -> tuple[float, SteerController]:
    pot = frame.steer_pot_angle
    if abs(pot) > c.pot_range:
        raise SensorFault(f"steer potentiometer reads {math.degrees(pot):.1f} deg, "
                          f"beyond +/-{math.degrees(c.pot_range):.0f} deg")
    target = _clamp(c.target_angle, -MAX_STEER, MAX_STEER)
    homed, side, seeking = c.homed, c.side, c.seeking
    if frame.moc_center_pulse:
        bias, estimate = pot, 0.0
        homed, side, seeking = True, 0, 0
    else:
        bias = c.bias_correction
        estimate = pot - bias
        if abs(estimate) > c.hysteresis:
            homed = False if not seeking else homed
            side = 1 if estimate > 0 else -1
        if seeking:
            if abs(target) > c.center_window:
                seeking = 0
            elif estimate * seeking > c.seek_limit:
                seeking, homed = 0, True
        elif (not homed and side and abs(target) <= c.center_window
              and abs(estimate - target) <= c.center_window):
            seeking = -side

    if seeking:
        desired = seeking * c.seek_rate
    else:
        err = target - estimate
        desired = 0.0 if abs(err) < c.deadband else _clamp(c.outer_gain * err, -c.rate_max, c.rate_max)

    if c.prev_counts is None:
        measured = 0.0
    else:
        measured = (frame.steer_encoder_counts - c.prev_counts) * 2 * math.pi / c.counts_per_rev / dt

    if desired == 0.0:
        duty, inner = 0.0, c.inner.reset()
    else:
        correction, inner = pid_step(c.inner, desired, measured, dt)
        duty = _clamp(desired / c.rate_max + correction, -1.0, 1.0)

    return duty, replace(c, inner=inner, target_angle=target, accumulated_estimate=estimate,
                         bias_correction=bias, prev_counts=frame.steer_encoder_counts,
                         homed=homed, side=side, seeking=seeking)


# --- commands -----------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class ControlCommand:
    speed_setpoint: float
    steer_setpoint: float
    brake: bool = False
    source: str = PLANNER


@dataclass(frozen=True, slots=True)
class PlannerConfig:
    heading_gain: float = 1.0
    cruise_speed: float = 5.0
    turn_speed: float = 2.0
    taper_angle: float = 5 * DEG
    arrival_radius: float = 0.5
    approach_gain: float = 0.8
    max_steer: float = MAX_STEER


@dataclass(frozen=True, slots=True)
class AvoidanceConfig:
    stop_threshold: float = 0.5
    avoid_threshold: float = 3.0
    evasion_angle: float = 20 * DEG
    evasion_speed: float = 2.0
    tie_margin: float = 0.25
    hold_distance: float = 1.0
    recovery_delay: float = 0.5
    recovery_distance: float = 1.0
    recovery_speed: float = 0.5


def turn_steer_limit(speed: float, params: BikeParams) -> float:
    """Largest steer angle whose centripetal load at ``speed`` stays within the
    spring's design turn (``turn_speed`` on the full-lock radius)."""
    v = abs(speed)
    if v <= params.turn_speed:
        return params.max_steer
    rear_min = params.wheelbase / math.tan(params.max_steer)
    r_design = math.sqrt(params.com_rear_offset ** 2 + rear_min ** 2)
    r_needed = r_design * (v / params.turn_speed) ** 2
    rear_needed = math.sqrt(max(r_needed ** 2 - params.com_rear_offset ** 2, 1e-12))
    return min(params.max_steer, math.atan(params.wheelbase / rear_needed))


def plan_step(pose: PoseEstimate, waypoint: tuple[float, float], params: BikeParams,
              config: PlannerConfig | None = None, speed: float | None = None) -> tuple[ControlCommand, bool]:
    """Proportional heading steering toward ``waypoint``.

    Returns the command and an arrival flag. When the current ``speed`` is
    given, steering is further limited so the turn load stays within the
    balancer's design point.
    """
    cfg = config or PlannerConfig()
    dx, dy = waypoint[0] - pose.x, waypoint[1] - pose.y
    distance = math.hypot(dx, dy)
    if distance <= cfg.arrival_radius:
        return ControlCommand(0.0, 0.0, False, PLANNER), True
    bearing = wrap_angle(math.atan2(dy, dx) - pose.yaw)
    limit = cfg.max_steer if speed is None else min(cfg.max_steer, turn_steer_limit(speed, params))
    steer = _clamp(cfg.heading_gain * bearing, -limit, limit)
    a = abs(steer)
    if a > cfg.taper_angle:
        v = cfg.turn_speed
    else:
        v = cfg.cruise_speed - (cfg.cruise_speed - cfg.turn_speed) * a / cfg.taper_angle
    v = min(v, cfg.approach_gain * distance)
    return ControlCommand(v, steer, False, PLANNER), False


def avoid_step(frame: SensorFrame, incoming: ControlCommand,
               config: AvoidanceConfig | None = None,
               previous: ControlCommand | None = None) -> ControlCommand:
    """Reactive sonar override: brake when close, swerve when near, else pass through.

    Readings closer than ``tie_margin`` count as equal. Ties keep the side of
    an ongoing evasion (``previous``), otherwise follow the incoming steer.
    """
    cfg = config or AvoidanceConfig()
    left = math.inf if frame.sonar_left is None else frame.sonar_left
    right = math.inf if frame.sonar_right is None else frame.sonar_right
    nearest = min(left, right)
    if nearest < cfg.stop_threshold:
        return ControlCommand(0.0, incoming.steer_setpoint, True, BRAKE)
    if nearest < cfg.avoid_threshold:
        if left < right - cfg.tie_margin:
            direction = -1.0
        elif right < left - cfg.tie_margin:
            direction = 1.0
        elif previous is not None and previous.source == AVOIDANCE and previous.steer_setpoint != 0.0:
            direction = math.copysign(1.0, previous.steer_setpoint)
        elif left != right:
            direction = -1.0 if left < right else 1.0
        else:
            direction = 1.0 if incoming.steer_setpoint > 0 else -1.0
        return ControlCommand(cfg.evasion_speed, direction * cfg.evasion_angle, False, AVOIDANCE)
    return incoming


def hold_heading(cmd: ControlCommand) -> ControlCommand:
    """Planner command with the steering held straight.

    Used for a short distance after an evasion, while the obstacle that
    caused it is beside the bicycle and outside the sonar cones.
    """
    return replace(cmd, steer_setpoint=0.0)


def recovery_command(direction: float, config: AvoidanceConfig | None = None) -> ControlCommand:
    """Back away from an obstacle that stopped the bicycle.

    ``direction`` is the side the bicycle will evade to (+1 left, -1 right).
    Reversing with the opposite steer swings the nose toward that side.
    """
    cfg = config or AvoidanceConfig()
    return ControlCommand(-cfg.recovery_speed, -math.copysign(cfg.evasion_angle, direction), False, AVOIDANCE)


def arbitrate(planner_cmd: ControlCommand | None, avoidance_cmd: ControlCommand | None,
              brake_request: ControlCommand | None) -> ControlCommand:
    """Strict priority: brake, then avoidance, then planner.

    With nothing active the bicycle is held with the brake.
    """
    for cmd in (brake_request, avoidance_cmd, planner_cmd):
        if cmd is not None:
            return cmd
    return HOLD


HOLD = ControlCommand(0.0, 0.0, True, BRAKE)


def brake_command(engage: bool, inputs: ActuatorInputs, speed: float) -> ActuatorInputs:
    """Open-loop brake request.

    Sets the brake flag; while engaged the drive may only oppose the current
    motion, so braking never reverses the bicycle.
    """
    if not engage:
        return replace(inputs, brake_engaged=False)
    duty = inputs.drive_duty
    if speed > 0.0:
        duty = _clamp(duty, -1.0, 0.0)
    elif speed < 0.0:
        duty = _clamp(duty, 0.0, 1.0)
    else:
        duty = 0.0
    return replace(inputs, drive_duty=duty, brake_engaged=True)
