"""``springbike`` command line: spring design reports, mission simulation and trace tools."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from collections import Counter
from pathlib import Path

from .config import ConfigError, DEFAULT_CONFIG_PATH, load_config
from .errors import ModeError, ParseError, SpringBikeError
from .gateway import (ARRIVED, BATTERY, CAPSIZED, COLLIDED, STOPPED, TIMEOUT, TrackingEmitter, parse_command,
                      run_commands)
from .plant import Obstacle, SimState
from .spring_design import validate_design

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_DESIGN = 2
EXIT_UNSAFE = 3
EXIT_INCOMPLETE = 4

OUTCOME_EXIT = {
    ARRIVED: EXIT_OK,
    STOPPED: EXIT_OK,
    CAPSIZED: EXIT_UNSAFE,
    COLLIDED: EXIT_UNSAFE,
    BATTERY: EXIT_INCOMPLETE,
    TIMEOUT: EXIT_INCOMPLETE,
}

TRACE_COLUMNS = ("t", "x", "y", "yaw", "roll", "v", "steer", "battery", "current", "source", "events",
                 "est_x", "est_y", "est_yaw")


class InputError(Exception):
    """Bad user input: reported on stderr with exit code 1."""


def exit_code(outcome: str) -> int:
    return OUTCOME_EXIT[outcome]


def _fail(message: str) -> int:
    print(f"springbike: error: {message}", file=sys.stderr)
    return EXIT_INPUT


def _overrides(pairs) -> dict:
    out = {}
    for item in pairs or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise InputError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _load(args):
    path = args.config
    if path is not None and not Path(path).is_file():
        raise InputError(f"config file not found: {path}")
    return load_config(path, _overrides(args.set))


def _config_error(exc: ConfigError) -> str:
    return f"config: {exc}"


def load_world(path):
    """Read a world file.

    Either a JSON list of obstacles or an object with ``obstacles`` and an
    optional ``origin`` ``[lat, lon]`` and ``start`` ``{x, y, yaw_deg}``.
    Each obstacle is ``{"center": [x, y], "radius": r}`` in local metres.
    """
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read world file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"world file {path}: line {exc.lineno}: {exc.msg}") from None
    if isinstance(data, list):
        data = {"obstacles": data}
    if not isinstance(data, dict):
        raise InputError("world file must hold a list of obstacles or an object")
    unknown = set(data) - {"obstacles", "origin", "start"}
    if unknown:
        raise InputError(f"world file: unknown keys {sorted(unknown)}")
    obstacles = []
    try:
        for ob in data.get("obstacles", []):
            (x, y), r = ob["center"], ob["radius"]
            obstacles.append(Obstacle(float(x), float(y), float(r)))
        origin = data.get("origin")
        if origin is not None:
            origin = (float(origin[0]), float(origin[1]))
        start = data.get("start") or {}
        start = (float(start.get("x", 0.0)), float(start.get("y", 0.0)), math.radians(float(start.get("yaw_deg", 0.0))))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InputError(f"world file: malformed entry ({exc})") from None
    return obstacles, origin, start


# --- design --------------------------------------------------------------------------

def cmd_design(args) -> int:
    try:
        cfg = _load(args)
    except InputError as exc:
        return _fail(str(exc))
    except ConfigError as exc:
        return _fail(_config_error(exc))
    report = validate_design(cfg.spring, cfg.material, cfg.bike, cfg.trainer_wheel_rating)
    print(report.to_text())
    out = Path(args.out or cfg.output["out_dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / cfg.output["design_file"]).write_text(report.to_json() + "\n")
    except OSError as exc:
        return _fail(f"cannot write design report: {exc}")
    return EXIT_OK if report.passed else EXIT_DESIGN


# --- simulate --------------------------------------------------------------------------

def _read_commands(args):
    if args.cmd is not None:
        lines = [args.cmd]
    elif args.cmd_file is not None:
        try:
            lines = Path(args.cmd_file).read_text().splitlines()
        except OSError as exc:
            raise InputError(f"cannot read command file: {exc}") from None
    else:
        lines = sys.stdin.read().splitlines()
    cmds = []
    for n, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        try:
            cmds.append(parse_command(text))
        except ParseError as exc:
            raise InputError(f"command line {n}: {exc}") from None
    if not cmds:
        raise InputError("no command given")
    return cmds


def cmd_simulate(args) -> int:
    try:
        cfg = _load(args)
        cmds = _read_commands(args)
        world_path = args.world or cfg.output["world"]
        obstacles, origin, start = load_world(world_path) if world_path else ([], None, (0.0, 0.0, 0.0))
        if origin is not None:
            cfg = cfg.with_overrides({"sensors.origin_lat": repr(origin[0]), "sensors.origin_lon": repr(origin[1])})
    except InputError as exc:
        return _fail(str(exc))
    except ConfigError as exc:
        return _fail(_config_error(exc))

    out = Path(args.out or cfg.output["out_dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        tracking_file = open(out / cfg.output["tracking_file"], "w", encoding="utf-8")
    except OSError as exc:
        return _fail(f"cannot open output directory: {exc}")
    seed = cfg.mission.seed if args.seed is None else args.seed
    state = SimState(x=start[0], y=start[1], yaw=start[2], battery_charge=cfg.plant.battery.capacity,
                     drive_engaged=cfg.mission.drive_engaged)
    emitter = TrackingEmitter(tracking_file, maxsize=1 << 16)
    try:
        results = run_commands(cmds, state, obstacles, cfg.spring, cfg.bike, cfg, seed=seed, tracking_sink=emitter)
    except ModeError as exc:
        return _fail(str(exc))
    except SpringBikeError as exc:
        return _fail(f"simulation aborted: {exc}")
    finally:
        emitter.close()
        tracking_file.close()

    try:
        with open(out / cfg.output["trace_file"], "w", encoding="utf-8") as fh:
            for res in results:
                for rec in res.trace:
                    fh.write(json.dumps(rec) + "\n")
    except OSError as exc:
        return _fail(f"cannot write trace: {exc}")

    for cmd, res in zip(cmds, results):
        summary = res.summary()
        print(f"command: {cmd.verb} {' '.join(format(v, 'g') for v in cmd.payload)}".rstrip())
        for key, value in summary.items():
            print(f"  {key}: {value}")
    if emitter.dropped:
        print(f"warning: {emitter.dropped} tracking records dropped", file=sys.stderr)
    return exit_code(results[-1].outcome)


# --- trace -------------------------------------------------------------------------------

def read_trace(path):
    """Parse a JSON-lines trace; raises :class:`InputError` naming the bad line."""
    records = []
    try:
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise InputError(f"{path}: line {n}: {exc.msg}") from None
                if not isinstance(rec, dict) or not {"t", "x", "y"} <= rec.keys():
                    raise InputError(f"{path}: line {n}: not a trace record")
                records.append(rec)
    except OSError as exc:
        raise InputError(f"cannot read trace: {exc}") from None
    return records


def trace_summary(records) -> dict:
    if not records:
        return {"steps": 0}
    distance = sum(math.hypot(b["x"] - a["x"], b["y"] - a["y"]) for a, b in zip(records, records[1:]))
    events = Counter(e for r in records for e in r.get("events", []))
    return {
        "steps": len(records),
        "start_time_s": records[0]["t"],
        "end_time_s": records[-1]["t"],
        "path_length_m": round(distance, 3),
        "max_speed_mps": round(max(abs(r.get("v", 0.0)) for r in records), 4),
        "max_abs_roll_deg": round(math.degrees(max(abs(r.get("roll", 0.0)) for r in records)), 4),
        "max_abs_steer_deg": round(math.degrees(max(abs(r.get("steer", 0.0)) for r in records)), 4),
        "final_battery_ah": records[-1].get("battery"),
        "sources": dict(sorted(Counter(r.get("source") for r in records if "source" in r).items())),
        "events": dict(sorted(events.items())),
    }


def write_csv(records, stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for r in records:
        row = []
        for col in TRACE_COLUMNS:
            value = r.get(col, "")
            row.append(";".join(value) if isinstance(value, list) else value)
        writer.writerow(row)


def cmd_trace(args) -> int:
    try:
        records = read_trace(args.trace)
    except InputError as exc:
        return _fail(str(exc))
    if args.csv:
        write_csv(records, sys.stdout)
    else:
        for key, value in trace_summary(records).items():
            print(f"{key}: {value}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------------------

def _add_config_flags(p):
    p.add_argument("--config", metavar="PATH",
                   help=f"INI configuration file (default: the bundled {Path(DEFAULT_CONFIG_PATH).name})")
    p.add_argument("--set", metavar="SECTION.KEY=VALUE", action="append",
                   help="override one configuration value; may be repeated")
    p.add_argument("--out", metavar="DIR", help="directory for output files (default: [output] out_dir)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="springbike",
        description="Spring-balanced autonomous bicycle: balancer design and mission simulation.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("design", help="size and check the torsion-spring balancer",
                       description="Print the balancer design report and write it as JSON. "
                                   "Exit 0 when every check passes, 2 when one fails, 1 on bad input.")
    _add_config_flags(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="run mission commands in closed loop",
                       description="Run mission commands (GOTO lat lon, REL dx dy, ENGAGE, DISENGAGE, STOP) "
                                   "and write trace and tracking JSON lines. Commands come from --cmd, "
                                   "--cmd-file or standard input. Exit 0 arrived or stopped, 1 bad input, "
                                   "3 capsize or collision, 4 battery empty or timeout.")
    _add_config_flags(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--cmd", metavar="STRING", help="a single command")
    src.add_argument("--cmd-file", metavar="PATH", help="file with one command per line")
    p.add_argument("--seed", type=int, metavar="N", help="noise seed (default: [mission] seed)")
    p.add_argument("--world", metavar="PATH", help="JSON world file with obstacles and origin")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("trace", help="summarise or convert a trace file",
                       description="Summarise a JSON-lines trace or convert it to CSV on standard output.")
    p.add_argument("trace", metavar="TRACE", help="trace.jsonl written by simulate")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--summary", action="store_true", help="print aggregate statistics (default)")
    mode.add_argument("--csv", action="store_true", help="write the trace as CSV")
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # output piped into something like ``head`` that stopped reading
        sys.stderr.close()
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
