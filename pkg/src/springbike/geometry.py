"""Steering torque requirement and turning geometry.

Steer angles are signed, positive for a left turn. Radii carry the sign of
the steer angle; straight-line motion is signalled by ``math.inf`` rather
than an exception.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidGeometryError

#: Published steer actuator requirement (N·m). The inputs behind it are not
#: recoverable, so it is carried as a constant for actuator sizing.
PUBLISHED_STEER_TORQUE = 2.7
#: Published minimum centre-of-mass turn radius at full lock (m).
PUBLISHED_MIN_TURN_RADIUS = 1.78
MAX_STEER = math.radians(30.0)


@dataclass(frozen=True)
class SteerTorqueParams:
    """Inputs of the stem torque balance.

    ``trail_scalar`` and ``frame_lean`` default to zero (flat, no-lean
    evaluation). The expression multiplies a handlebar angle in radians by a
    weight term and is dimensionally loose; it is evaluated verbatim.
    """

    trail_scalar: float = 0.0
    frame_lean: float = 0.0
    steer_axis_angle: float = math.radians(72.0)
    handlebar_turn: float = 0.0
    com_rear_offset: float = 0.4
    hub_distance: float = 1.0
    total_mass: float = 25.0
    gravity: float = 9.81

    def __post_init__(self):
        if self.hub_distance <= 0:
            raise InvalidGeometryError("hub_distance must be positive")
        if self.com_rear_offset > self.hub_distance:
            raise InvalidGeometryError("com_rear_offset must not exceed hub_distance")
        if not 0.0 <= self.steer_axis_angle <= math.pi / 2:
            raise InvalidGeometryError("steer_axis_angle must lie in [0, 90] degrees")


@dataclass(frozen=True)
class TurnGeometry:
    wheelbase: float = 1.0
    com_rear_offset: float = 0.4
    steer_angle: float = MAX_STEER

    def __post_init__(self):
        if self.wheelbase <= 0:
            raise InvalidGeometryError("wheelbase must be positive")
        if abs(self.steer_angle) > MAX_STEER + 1e-12:
            raise InvalidGeometryError("steer angle exceeds the 30 degree lock")


def steer_torque(p: SteerTorqueParams) -> float:
    """Torque the steer motor must overcome at the stem (N·m)."""
    return (p.trail_scalar * p.frame_lean * math.sin(p.steer_axis_angle)
            + p.handlebar_turn * math.cos(p.steer_axis_angle)
            * (p.com_rear_offset / p.hub_distance) * p.total_mass * p.gravity)


def rear_axle_turn_radius(wheelbase: float, steer_angle: float) -> float:
    """Signed radius ``b / tan(steer)`` of the rear-axle path; ``inf`` when straight."""
    if steer_angle == 0.0:
        return math.inf
    return wheelbase / math.tan(steer_angle)


def turn_radius_cm(g: TurnGeometry) -> float:
    """Radius of the circle traced by the centre of mass (always positive)."""
    if g.steer_angle == 0.0:
        return math.inf
    rear = g.wheelbase / math.tan(g.steer_angle)
    return math.sqrt(g.com_rear_offset ** 2 + rear ** 2)


def signed_turn_radius_cm(wheelbase: float, com_rear_offset: float, steer_angle: float) -> float:
    if steer_angle == 0.0:
        return math.inf
    rear = wheelbase / math.tan(steer_angle)
    return math.copysign(math.sqrt(com_rear_offset ** 2 + rear ** 2), steer_angle)


def min_turn_radius(wheelbase: float, com_rear_offset: float, max_steer: float = MAX_STEER) -> float:
    return turn_radius_cm(TurnGeometry(wheelbase, com_rear_offset, max_steer))
