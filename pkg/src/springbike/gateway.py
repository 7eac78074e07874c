"""Text command protocol, tracking stream and the closed-loop mission runner.

Command grammar (case-insensitive, whitespace separated, at most 160
characters)::

    GOTO <lat> <lon>     absolute destination in decimal degrees
    REL <dx> <dy>        destination relative to the start, metres east/north
    ENGAGE | DISENGAGE   couple or free the drive motor
    STOP                 brake to a standstill

Numbers are plain decimals with an optional sign.
"""
from __future__ import annotations

import copy
import json
import math
import queue
import re
import threading
from collections import Counter
from dataclasses import dataclass, field, replace
from decimal import Decimal

import numpy as np

from . import control as ctl
from .config import Config
from .errors import (ArityError, CoordinateRangeError, MessageTooLongError, ModeError, NonNumericError,
                     ParseError, UnknownVerbError)
from .geodesy import geodetic_to_local, local_to_geodetic
from .localization import PoseEstimate, blend_gps, counts_to_distance, odometry_step, yaw_update
from .plant import (BATTERY_EMPTY, CAPSIZE, COLLISION, MAX_DT, ActuatorInputs, SimState, sample_sensors, step)
from .spring_design import BikeParams, SpringSpec, validate_design

MAX_MESSAGE = 160
GOTO, REL, ENGAGE, DISENGAGE, STOP = "GOTO", "REL", "ENGAGE", "DISENGAGE", "STOP"
_ARITY = {GOTO: 2, REL: 2, ENGAGE: 0, DISENGAGE: 0, STOP: 0}
_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)\Z")
_TOKEN = re.compile(r"\S+")

ARRIVED = "arrived"
STOPPED = "stopped"
CAPSIZED = "capsized"
COLLIDED = "collided"
BATTERY = "battery_empty"
TIMEOUT = "timeout"
OUTCOMES = (ARRIVED, STOPPED, CAPSIZED, COLLIDED, BATTERY, TIMEOUT)


class EncodingError(ParseError):
    pass


class TrackingError(OSError):
    """A tracking record could not be delivered."""


# --- commands -----------------------------------------------------------------------

@dataclass(frozen=True)
class MissionCommand:
    verb: str
    payload: tuple[float, ...] = ()

    def __post_init__(self):
        if self.verb not in _ARITY:
            raise UnknownVerbError(f"unknown verb {self.verb!r}")
        if len(self.payload) != _ARITY[self.verb]:
            raise ArityError(f"{self.verb} takes {_ARITY[self.verb]} values, got {len(self.payload)}")
        if self.verb == GOTO:
            lat, lon = self.payload
            if not -90.0 <= lat <= 90.0:
                raise CoordinateRangeError(f"latitude {lat} outside [-90, 90]")
            if not -180.0 <= lon <= 180.0:
                raise CoordinateRangeError(f"longitude {lon} outside [-180, 180]")


def parse_command(text: str | bytes) -> MissionCommand:
    """Parse one command message; every failure is a :class:`ParseError` subclass."""
    if isinstance(text, (bytes, bytearray)):
        if len(text) > MAX_MESSAGE:
            raise MessageTooLongError(f"message is {len(text)} bytes, limit {MAX_MESSAGE}")
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EncodingError("message is not valid UTF-8", exc.start) from None
    if len(text) > MAX_MESSAGE:
        raise MessageTooLongError(f"message is {len(text)} characters, limit {MAX_MESSAGE}")
    tokens = [(m.group(), m.start()) for m in _TOKEN.finditer(text)]
    if not tokens:
        raise UnknownVerbError("empty command", 0)
    word, pos = tokens[0]
    verb = word.upper()
    if verb not in _ARITY:
        raise UnknownVerbError(f"unknown verb {word!r}", pos)
    args = tokens[1:]
    if len(args) != _ARITY[verb]:
        where = args[_ARITY[verb]][1] if len(args) > _ARITY[verb] else len(text)
        raise ArityError(f"{verb} takes {_ARITY[verb]} values, got {len(args)}", where)
    values = []
    for tok, tpos in args:
        if not _NUMBER.match(tok):
            raise NonNumericError(f"{tok!r} is not a decimal number", tpos)
        values.append(float(tok))
    if verb == GOTO:
        if not -90.0 <= values[0] <= 90.0:
            raise CoordinateRangeError(f"latitude {values[0]} outside [-90, 90]", args[0][1])
        if not -180.0 <= values[1] <= 180.0:
            raise CoordinateRangeError(f"longitude {values[1]} outside [-180, 180]", args[1][1])
    return MissionCommand(verb, tuple(values))


def _format_number(v: float) -> str:
    text = format(Decimal(repr(v)).normalize(), "f")
    return "0" if text == "-0" else text


def format_command(cmd: MissionCommand) -> str:
    """Canonical text form; ``parse_command(format_command(c)) == c``."""
    return " ".join([cmd.verb, *(_format_number(v) for v in cmd.payload)])


# --- tracking ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class TrackingRecord:
    t: float
    lat: float
    lon: float
    v: float
    mode: str
    event: str | None = None

    def to_json(self) -> str:
        return json.dumps({"t": round(self.t, 3), "lat": round(self.lat, 8), "lon": round(self.lon, 8),
                           "v": round(self.v, 4), "mode": self.mode, "event": self.event})


def emit_tracking(record: TrackingRecord, sink) -> None:
    """Append ``record`` as one JSON line to ``sink``.

    Raises :class:`TrackingError` when the sink cannot be written.
    """
    try:
        sink.write(record.to_json() + "\n")
    except (OSError, ValueError) as exc:
        raise TrackingError(f"tracking sink write failed: {exc}") from exc


class TrackingEmitter:
    """Background writer fed through a bounded queue.

    Records are dropped (and counted) when the queue is full, mirroring a
    best-effort uplink.
    """

    def __init__(self, sink, maxsize: int = 1024):
        self.sink = sink
        self.dropped = 0
        self.errors = 0
        self._queue: queue.Queue = queue.Queue(maxsize)
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def __call__(self, record: TrackingRecord) -> None:
        try:
            self._queue.put_nowait(record)
        except queue.Full:
            self.dropped += 1

    def _run(self):
        while True:
            record = self._queue.get()
            if record is None:
                return
            try:
                emit_tracking(record, self.sink)
            except TrackingError:
                self.errors += 1

    def close(self) -> None:
        self._queue.put(None)
        self._thread.join()


# --- mission runner ---------------------------------------------------------------------------

@dataclass
class MissionResult:
    outcome: str
    final_state: SimState
    estimate: PoseEstimate
    waypoint: tuple[float, float] | None = None
    trace: list = field(default_factory=list)
    tracking: list = field(default_factory=list)
    events: list = field(default_factory=list)
    distance: float = 0.0
    duration: float = 0.0
    energy_used: float = 0.0
    current_integral: float = 0.0
    peak_current: float = 0.0
    min_sonar: float = math.inf
    max_roll: float = 0.0
    pulse_errors: list = field(default_factory=list)
    final_steer_bias: float = 0.0
    sources: Counter = field(default_factory=Counter)
    actuated_while_disengaged: int = 0
    tracking_errors: list = field(default_factory=list)

    @property
    def collisions(self) -> int:
        return sum(1 for _, kind in self.events if kind == COLLISION)

    @property
    def endpoint_error(self) -> float:
        s = self.final_state
        return math.hypot(self.estimate.x - s.x, self.estimate.y - s.y)

    def summary(self) -> dict:
        return {
            "outcome": self.outcome,
            "distance_m": round(self.distance, 3),
            "duration_s": round(self.duration, 3),
            "energy_used_ah": round(self.energy_used, 6),
            "energy_used_wh": round(self.energy_used * 11.7, 4),
            "min_sonar_clearance_m": None if math.isinf(self.min_sonar) else round(self.min_sonar, 3),
            "max_roll_deg": round(math.degrees(self.max_roll), 3),
            "collisions": self.collisions,
            "avoidance_steps": self.sources.get(ctl.AVOIDANCE, 0),
            "brake_steps": self.sources.get(ctl.BRAKE, 0),
            "final_position": [round(self.final_state.x, 3), round(self.final_state.y, 3)],
            "endpoint_error_m": round(self.endpoint_error, 4),
        }


def _trace_record(s: SimState, est: PoseEstimate, source: str, events) -> dict:
    return {
        "t": round(s.time, 4), "x": round(s.x, 6), "y": round(s.y, 6), "yaw": round(s.yaw, 6),
        "roll": round(s.roll, 6), "v": round(s.speed, 6), "steer": round(s.steer, 6),
        "battery": round(s.battery_charge, 8), "current": round(s.current, 4), "events": list(events),
        "source": source,
        "est_x": round(est.x, 6), "est_y": round(est.y, 6), "est_yaw": round(est.yaw, 6),
    }


def resolve_waypoint(cmd: MissionCommand, state: SimState, config: Config) -> tuple[float, float]:
    if cmd.verb == GOTO:
        return geodetic_to_local(cmd.payload[0], cmd.payload[1], config.plant.origin_lat, config.plant.origin_lon)
    if cmd.verb == REL:
        return state.x + cmd.payload[0], state.y + cmd.payload[1]
    raise ValueError(f"{cmd.verb} has no destination")


def run_mission(cmd: MissionCommand, state: SimState, world, spec: SpringSpec, params: BikeParams,
                config: Config | None = None, seed: int | None = None, tracking_sink=None,
                record_trace: bool = True) -> MissionResult:
    """Execute one command in closed loop and report how it ended.

    ``tracking_sink`` is either a writable text stream or a callable taking
    a :class:`TrackingRecord`. Tracking failures are collected in the result
    and never change the outcome.
    """
    cfg = config or Config()
    ms = cfg.mission
    if cmd.verb in (ENGAGE, DISENGAGE):
        new = replace(state, drive_engaged=cmd.verb == ENGAGE)
        return MissionResult(STOPPED, new, PoseEstimate(new.x, new.y, new.yaw))
    if not state.drive_engaged:
        raise ModeError(f"{cmd.verb} requested while the drive is disengaged; send ENGAGE first")

    waypoint = None if cmd.verb == STOP else resolve_waypoint(cmd, state, cfg)
    est = PoseEstimate(state.x, state.y, state.yaw)
    result = MissionResult(ARRIVED, state, est, waypoint)
    if waypoint is not None and math.hypot(waypoint[0] - state.x, waypoint[1] - state.y) <= cfg.planner.arrival_radius:
        return result

    report = validate_design(spec, cfg.material, params, cfg.trainer_wheel_rating)
    plant_cfg = cfg.plant
    if report.theta_max_safe is not None:
        plant_cfg = replace(plant_cfg, capsize_angle=report.theta_max_safe)
    rng = np.random.default_rng(ms.seed if seed is None else seed) if ms.noise else None
    dt = ms.dt

    frame = sample_sensors(state, world, plant_cfg, rng)
    # the controller trusts its stored pot calibration until the first centre pulse
    steer_ctl = replace(cfg.steer, prev_counts=frame.steer_encoder_counts, homed=False,
                        accumulated_estimate=frame.steer_pot_angle - cfg.steer.bias_correction)
    speed_pid = cfg.speed_pid
    prev_counts = frame.drive_encoder_counts
    mag_prev = frame.magnetometer_heading
    wheel_r, cpr, b = params.rear_wheel_radius, plant_cfg.drive_counts_per_rev, params.wheelbase
    origin = (plant_cfg.origin_lat, plant_cfg.origin_lon)
    gps_steps = max(1, round(ms.gps_period / dt))
    track_steps = max(1, round(ms.tracking_period / dt))
    max_steps = round(ms.timeout / dt)
    park_steps = round(ms.park_time / dt)
    parking_since = None if cmd.verb != STOP else 0
    docking_since = None
    dock_cfg = replace(cfg.planner, arrival_radius=0.5 * cfg.planner.arrival_radius)
    outcome = TIMEOUT
    last_track_t = -math.inf
    charge0 = state.battery_charge
    start_time = state.time
    hold = recover_left = stopped_for = evade_dir = 0.0

    def track(s: SimState, event=None):
        nonlocal last_track_t
        if s.time <= last_track_t:
            return
        last_track_t = s.time
        lat, lon = local_to_geodetic(s.x, s.y, *origin, check=False) if rng is None else (frame.gps_lat, frame.gps_lon)
        rec = TrackingRecord(s.time, lat, lon, s.speed, "autonomous" if s.drive_engaged else "manual", event)
        result.tracking.append(rec)
        if tracking_sink is None:
            return
        try:
            if callable(tracking_sink):
                tracking_sink(rec)
            else:
                emit_tracking(rec, tracking_sink)
        except TrackingError as exc:
            result.tracking_errors.append(str(exc))

    for k in range(1, max_steps + 1):
        # localisation
        counts = frame.drive_encoder_counts
        ds = counts_to_distance(counts - prev_counts, cpr, wheel_r)
        prev_counts = counts
        yaw_before = est.yaw
        est = odometry_step(est, ds, ctl.steer_estimate(steer_ctl, frame), b)
        est = PoseEstimate(est.x, est.y, yaw_update(yaw_before, mag_prev, frame.magnetometer_heading), est.drift)
        mag_prev = frame.magnetometer_heading
        measured_speed = ds / dt if k > 1 else state.speed
        if rng is not None and k % gps_steps == 0:
            gps_xy = geodetic_to_local(frame.gps_lat, frame.gps_lon, *origin, check=False)
            est = blend_gps(est, gps_xy, ms.gps_blend)

        # planning and arbitration
        if docking_since is None and parking_since is None:
            planner_cmd, arrived = ctl.plan_step(est, waypoint, params, cfg.planner, speed=measured_speed)
            if arrived:
                docking_since = k
        if docking_since is not None and parking_since is None:
            # inside the arrival radius: creep on toward the point itself, then park
            planner_cmd, docked = ctl.plan_step(est, waypoint, params, dock_cfg, speed=measured_speed)
            if docked or k - docking_since >= park_steps:
                parking_since = k
        if parking_since is not None:
            planner_cmd = None
            brake_request = ctl.ControlCommand(0.0, 0.0, True, ctl.BRAKE)
            avoidance_cmd = None
        else:
            previous = None if not evade_dir else ctl.ControlCommand(0.0, evade_dir, False, ctl.AVOIDANCE)
            av = ctl.avoid_step(frame, planner_cmd, cfg.avoidance, previous=previous)
            avoidance_cmd = av if av.source == ctl.AVOIDANCE else None
            brake_request = av if av.source == ctl.BRAKE else None
            if recover_left > 0.0:
                avoidance_cmd, brake_request = ctl.recovery_command(evade_dir, cfg.avoidance), None
                recover_left -= abs(ds)
            elif brake_request is not None and abs(measured_speed) < 0.05:
                stopped_for += dt
                if stopped_for >= cfg.avoidance.recovery_delay:
                    if not evade_dir:
                        left = math.inf if frame.sonar_left is None else frame.sonar_left
                        right = math.inf if frame.sonar_right is None else frame.sonar_right
                        evade_dir = -1.0 if left <= right else 1.0
                    recover_left, stopped_for = cfg.avoidance.recovery_distance, 0.0
            else:
                stopped_for = 0.0
        command = ctl.arbitrate(planner_cmd, avoidance_cmd, brake_request)
        if command.source == ctl.AVOIDANCE:
            if command.speed_setpoint > 0.0:
                evade_dir = math.copysign(1.0, command.steer_setpoint)
            hold = cfg.avoidance.hold_distance
        elif command.source == ctl.PLANNER:
            evade_dir = 0.0
            if hold > 0.0:
                command = ctl.hold_heading(command)
                hold -= abs(ds)
        result.sources[command.source] += 1

        # actuation
        if command.brake:
            speed_pid = speed_pid.reset()
        duty, speed_pid = ctl.pid_step(speed_pid, command.speed_setpoint, measured_speed, dt)
        steer_ctl = steer_ctl.with_target(command.steer_setpoint)
        steer_duty, steer_ctl = ctl.steer_control_step(steer_ctl, frame, dt)
        if frame.moc_center_pulse:
            result.pulse_errors.append(steer_ctl.accumulated_estimate - state.steer)
        inputs = ctl.brake_command(command.brake, ActuatorInputs(duty, steer_duty), measured_speed)
        if not state.drive_engaged and (inputs.drive_duty != 0.0):
            result.actuated_while_disengaged += 1

        state, frame, events = step(state, inputs, world, spec, params, dt, plant_cfg, rng)
        result.current_integral += state.current * dt / 3600.0
        result.peak_current = max(result.peak_current, state.current)
        result.distance += abs(state.speed) * dt
        result.max_roll = max(result.max_roll, abs(state.roll))
        near = frame.nearest_sonar()
        if near < result.min_sonar:
            result.min_sonar = near
        for e in events:
            result.events.append((state.time, e))
        if record_trace:
            result.trace.append(_trace_record(state, est, command.source, events))
        if k % track_steps == 0:
            track(state)

        if CAPSIZE in events:
            outcome = CAPSIZED
            break
        if COLLISION in events:
            outcome = COLLIDED
            break
        if BATTERY_EMPTY in events:
            outcome = BATTERY
            break
        if parking_since is not None:
            settled = (abs(state.speed) < 1e-3 and not steer_ctl.seeking
                       and abs(steer_ctl.accumulated_estimate) < 0.1 * math.pi / 180)
            if settled or k - parking_since >= park_steps:
                outcome = ARRIVED if cmd.verb != STOP else STOPPED
                break

    result.outcome = outcome
    result.final_state = state
    result.estimate = est
    result.duration = state.time - start_time
    result.energy_used = float(charge0 - state.battery_charge)
    result.final_steer_bias = steer_ctl.accumulated_estimate - state.steer
    track(state, outcome)
    return result


def run_commands(cmds, state: SimState, world, spec: SpringSpec, params: BikeParams,
                 config: Config | None = None, seed: int | None = None, tracking_sink=None):
    """Run ``cmds`` back to back; stops at the first mission that does not end cleanly."""
    results = []
    for i, cmd in enumerate(cmds):
        res = run_mission(cmd, state, world, spec, params, config,
                          None if seed is None else seed + i, tracking_sink)
        results.append(res)
        state = res.final_state
        if res.outcome not in (ARRIVED, STOPPED):
            break
    return results


@dataclass(frozen=True)
class EnduranceResult:
    hours: float
    mean_current: float
    peak_current: float
    speed: float


def simulate_endurance(config: Config | None = None, speed: float | None = None, window: float = 60.0,
                       until_empty: bool = False) -> EnduranceResult:
    """Battery life when cruising straight at ``speed`` (default: the configured cruise speed).

    By default the closed loop runs for ``window`` seconds and the mean
    draw over its second half is extrapolated to the full capacity. With
    ``until_empty`` the run continues at the largest step until the pack
    is flat.
    """
    cfg = copy.copy(config or Config())
    v = cfg.cruise_speed if speed is None else speed
    if not 0.0 < v <= cfg.bike.max_speed:
        raise ValueError(f"cruise speed must lie in (0, {cfg.bike.max_speed}] m/s")
    cfg.planner = replace(cfg.planner, cruise_speed=v, turn_speed=min(v, cfg.planner.turn_speed))
    mission = replace(cfg.mission, noise=False)
    if until_empty:
        mission = replace(mission, dt=MAX_DT, timeout=24 * 3600.0)
    else:
        mission = replace(mission, timeout=window)
    cfg.mission = mission
    capacity = cfg.plant.battery.capacity
    far = MissionCommand(REL, (1e7, 0.0))
    res = run_mission(far, SimState(battery_charge=capacity), [], cfg.spring, cfg.bike, cfg, record_trace=True)
    if until_empty:
        hours = res.duration / 3600.0
        mean = res.current_integral * 3600.0 / res.duration
    else:
        tail = res.trace[len(res.trace) // 2:]
        mean = sum(r["current"] for r in tail) / len(tail)
        hours = capacity / mean
    return EnduranceResult(hours, mean, res.peak_current, v)
