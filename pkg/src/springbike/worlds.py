"""Seeded random obstacle worlds and the batch mission suite."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .config import Config
from .gateway import MissionCommand, MissionResult, REL, run_mission
from .plant import Obstacle, SimState

MAX_DENSITY = 0.05      # obstacles per square metre
CORRIDOR_HALF_WIDTH = 6.0
CORRIDOR_MARGIN = 3.0


@dataclass(frozen=True)
class World:
    seed: int
    obstacles: tuple[Obstacle, ...]
    goal: tuple[float, float]
    start_yaw: float
    cruise_speed: float
    density: float

    @property
    def path_length(self) -> float:
        return math.hypot(*self.goal)

    def command(self) -> MissionCommand:
        return MissionCommand(REL, (round(self.goal[0], 3), round(self.goal[1], 3)))

    def to_json(self) -> str:
        return json.dumps({"obstacles": [{"center": [o.x, o.y], "radius": o.radius} for o in self.obstacles]})


def random_world(seed: int, max_density: float = MAX_DENSITY, max_speed: float = 5.0,
                 length: tuple[float, float] = (10.0, 30.0),
                 radius: tuple[float, float] = (0.2, 1.0)) -> World:
    """Scatter disc obstacles over a corridor around a straight-line mission.

    Obstacles keep clear of the start and goal and leave at least a 1 m gap
    between each other, so every world has a free path.
    """
    if not 0 <= max_density <= MAX_DENSITY:
        raise ValueError(f"density must lie in [0, {MAX_DENSITY}] per m^2")
    rng = np.random.default_rng(seed)
    L = rng.uniform(*length)
    heading = rng.uniform(-math.pi, math.pi)
    goal = (L * math.cos(heading), L * math.sin(heading))
    start_yaw = heading + rng.uniform(-0.5, 0.5)
    speed = rng.uniform(1.0, max_speed)
    density = rng.uniform(0.0, max_density)

    along_lo, along_hi = -CORRIDOR_MARGIN, L + CORRIDOR_MARGIN
    area = (along_hi - along_lo) * 2 * CORRIDOR_HALF_WIDTH
    target = int(density * area)
    c, s = math.cos(heading), math.sin(heading)
    placed: list[Obstacle] = []
    for _ in range(20 * target):
        if len(placed) >= target:
            break
        u = rng.uniform(along_lo, along_hi)
        w = rng.uniform(-CORRIDOR_HALF_WIDTH, CORRIDOR_HALF_WIDTH)
        r = rng.uniform(*radius)
        ox, oy = u * c - w * s, u * s + w * c
        if math.hypot(ox, oy) < r + 2.5 or math.hypot(ox - goal[0], oy - goal[1]) < r + 1.5:
            continue
        if any(math.hypot(ox - o.x, oy - o.y) < r + o.radius + 1.0 for o in placed):
            continue
        placed.append(Obstacle(ox, oy, r))
    return World(seed, tuple(placed), goal, start_yaw, speed, len(placed) / area)


def run_world(world: World, config: Config | None = None, noise: bool = True,
              record_trace: bool = False, tracking_sink=None) -> MissionResult:
    """Fly ``world``'s mission at its cruise speed."""
    cfg = config or Config()
    planner = replace(cfg.planner, cruise_speed=min(cfg.planner.cruise_speed, world.cruise_speed),
                      turn_speed=min(cfg.planner.turn_speed, world.cruise_speed))
    cfg = copy.copy(cfg)
    cfg.planner, cfg.mission = planner, replace(cfg.mission, noise=noise)
    state = SimState(yaw=world.start_yaw, battery_charge=cfg.plant.battery.capacity)
    return run_mission(world.command(), state, world.obstacles, cfg.spring, cfg.bike, cfg,
                       seed=world.seed, tracking_sink=tracking_sink, record_trace=record_trace)


def run_suite(n: int = 200, base_seed: int = 0, config: Config | None = None, noise: bool = True):
    """Run ``n`` consecutive seeded worlds; returns ``[(world, result), ...]``."""
    out = []
    for i in range(n):
        w = random_world(base_seed + i)
        out.append((w, run_world(w, config, noise)))
    return out
