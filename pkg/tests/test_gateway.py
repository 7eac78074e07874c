import io
import json
import math
import random

import pytest
from hypothesis import given, strategies as st

from springbike.config import Config
from springbike.errors import (ArityError, CoordinateRangeError, MessageTooLongError, ModeError,
                               NonNumericError, ParseError, UnknownVerbError)
from springbike.gateway import (
    ARRIVED, DISENGAGE, ENGAGE, GOTO, REL, STOP, STOPPED, MissionCommand, TrackingEmitter, TrackingError,
    TrackingRecord, emit_tracking, format_command, parse_command, run_commands, run_mission,
)
from springbike.geodesy import local_to_geodetic
from springbike.plant import Obstacle, SimState

CFG = Config()
QUIET = CFG.with_overrides({"mission.noise": "false", "plant.steer_slip": "0"})


def mission(text, world=(), config=CFG, state=None, **kw):
    return run_mission(parse_command(text), state or SimState(), list(world), config.spring, config.bike,
                       config, **kw)


# --- parser ---------------------------------------------------------------------------

def test_parse_examples():
    assert parse_command("GOTO 22.3194 87.3091") == MissionCommand(GOTO, (22.3194, 87.3091))
    assert parse_command("REL 10 -5") == MissionCommand(REL, (10.0, -5.0))
    assert parse_command("  engage ") == MissionCommand(ENGAGE)
    assert parse_command(b"Stop") == MissionCommand(STOP)


@pytest.mark.parametrize("text, error, position", [
    ("GOTO 95 10", CoordinateRangeError, 5),
    ("GOTO 10 190", CoordinateRangeError, 8),
    ("FLY 1 2", UnknownVerbError, 0),
    ("REL 1", ArityError, 5),
    ("STOP now", ArityError, 5),
    ("REL 1 x2", NonNumericError, 6),
    ("REL 1e3 2", NonNumericError, 4),
    ("", UnknownVerbError, 0),
])
def test_parse_errors(text, error, position):
    with pytest.raises(error) as info:
        parse_command(text)
    assert info.value.position == position


def test_parse_rejects_long_and_undecodable_messages():
    with pytest.raises(MessageTooLongError):
        parse_command("REL " + "1" * 200 + " 0")
    with pytest.raises(ParseError):
        parse_command(b"REL \xff 1")


@given(st.binary(max_size=160))
def test_parser_total_on_bytes(data):
    try:
        parse_command(data)
    except ParseError:
        pass


@given(st.text(max_size=160))
def test_parser_total_on_text(text):
    try:
        parse_command(text)
    except ParseError:
        pass


numbers = st.floats(-1e6, 1e6, allow_nan=False).map(lambda v: round(v, 6))
commands = st.one_of(
    st.builds(lambda a, b: MissionCommand(GOTO, (a, b)), st.floats(-90, 90).map(lambda v: round(v, 7)),
              st.floats(-180, 180).map(lambda v: round(v, 7))),
    st.builds(lambda a, b: MissionCommand(REL, (a, b)), numbers, numbers),
    st.sampled_from([MissionCommand(ENGAGE), MissionCommand(DISENGAGE), MissionCommand(STOP)]),
)


@given(commands)
def test_round_trip(cmd):
    text = format_command(cmd)
    assert parse_command(text) == cmd
    assert format_command(parse_command(text)) == text


def test_canonical_form():
    assert format_command(parse_command("  rel  010.50   -0005 ")) == "REL 10.5 -5"
    assert format_command(parse_command("goto -0.0 +1.")) == "GOTO 0 1"


# --- tracking -------------------------------------------------------------------------

def test_tracking_record_line():
    buf = io.StringIO()
    emit_tracking(TrackingRecord(1.0, 22.3, 87.3, 1.5, "autonomous"), buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 1
    assert set(json.loads(lines[0])) == {"t", "lat", "lon", "v", "mode", "event"}


def test_tracking_hundred_records():
    buf = io.StringIO()
    for t in range(1, 101):
        emit_tracking(TrackingRecord(float(t), 0.0, 0.0, 0.0, "manual"), buf)
    times = [json.loads(line)["t"] for line in buf.getvalue().splitlines()]
    assert len(times) == 100 and all(b > a for a, b in zip(times, times[1:]))


def test_closed_sink_raises_but_mission_continues():
    buf = io.StringIO()
    buf.close()
    with pytest.raises(TrackingError):
        emit_tracking(TrackingRecord(1.0, 0.0, 0.0, 0.0, "manual"), buf)
    res = mission("REL 8 0", config=QUIET, tracking_sink=buf)
    assert res.outcome == ARRIVED
    assert res.tracking_errors


def test_emitter_counts_drops():
    sink = io.StringIO()
    emitter = TrackingEmitter(sink, maxsize=1)
    for t in range(500):
        emitter(TrackingRecord(float(t), 0.0, 0.0, 0.0, "manual"))
    emitter.close()
    written = len(sink.getvalue().splitlines())
    assert written + emitter.dropped == 500


# --- missions ------------------------------------------------------------------------------

def test_rel_zero_arrives_at_once():
    res = mission("REL 0 0")
    assert res.outcome == ARRIVED and res.trace == [] and res.duration == 0.0


def test_rel_twenty_empty_world():
    res = mission("REL 20 0")
    s = res.final_state
    assert res.outcome == ARRIVED
    assert math.hypot(s.x - 20.0, s.y) <= 0.5


def test_rel_twenty_with_obstacle():
    res = mission("REL 20 0", world=[Obstacle(10.0, 0.0, 1.0)])
    assert res.outcome == ARRIVED and res.collisions == 0
    assert any(r["source"] == "avoidance" for r in res.trace)


def test_goto_resolves_through_the_origin():
    lat, lon = local_to_geodetic(6.0, 8.0, CFG.plant.origin_lat, CFG.plant.origin_lon)
    res = mission(f"GOTO {lat:.8f} {lon:.8f}", config=QUIET)
    assert res.outcome == ARRIVED
    assert res.waypoint == pytest.approx((6.0, 8.0), abs=1e-3)


def test_mission_while_disengaged():
    with pytest.raises(ModeError):
        mission("REL 5 0", state=SimState(drive_engaged=False))


def test_engage_disengage_and_stop():
    results = run_commands([parse_command(c) for c in ("DISENGAGE", "ENGAGE", "REL 6 0", "STOP")],
                           SimState(), [], CFG.spring, CFG.bike, CFG, seed=1)
    assert [r.outcome for r in results] == [STOPPED, STOPPED, ARRIVED, STOPPED]
    assert not results[0].final_state.drive_engaged and results[1].final_state.drive_engaged
    assert all(r.actuated_while_disengaged == 0 for r in results)


def test_noise_free_dead_reckoning_matches_plant():
    for text, world in (("REL 20 0", []), ("REL 20 0", [Obstacle(10.0, 0.0, 1.0)]), ("REL -5 12", [])):
        res = mission(text, world=world, config=QUIET)
        assert res.outcome == ARRIVED
        assert res.endpoint_error <= 1e-3


def test_tracking_stream_is_valid_json_lines():
    buf = io.StringIO()
    res = mission("REL 15 5", tracking_sink=buf)
    lines = buf.getvalue().splitlines()
    records = [json.loads(line) for line in lines]
    assert len(records) == len(res.tracking) >= 5
    assert all(b["t"] > a["t"] for a, b in zip(records, records[1:]))
    assert records[-1]["event"] == ARRIVED


def test_bicycle_turns_at_turn_speed():
    res = mission("REL -10 10", world=[Obstacle(-4.0, 4.0, 0.6)])
    for rec in res.trace:
        if abs(rec["steer"]) > math.radians(5) and rec["source"] == "planner":
            assert rec["v"] <= 2.0 + 0.05


def test_mission_is_deterministic():
    a = mission("REL 12 -4", world=[Obstacle(6.0, -2.0, 0.5)], seed=9)
    b = mission("REL 12 -4", world=[Obstacle(6.0, -2.0, 0.5)], seed=9)
    assert a.trace == b.trace


def test_random_mission_commands_never_crash():
    rng = random.Random(5)
    for _ in range(5):
        dx, dy = rng.uniform(-15, 15), rng.uniform(-15, 15)
        res = mission(f"REL {dx:.2f} {dy:.2f}", seed=rng.randrange(100))
        assert res.outcome == ARRIVED
