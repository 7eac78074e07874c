"""Dead reckoning on the rear-axle arc model, magnetometer yaw and GPS blending."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

#: Drift budget growth per metre travelled (the 7 % odometry quality bound).
DRIFT_PER_METRE = 0.07
SMALL_ANGLE_LIMIT = math.radians(30.0)


class YawDiscontinuityWarning(UserWarning):
    pass


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a, 2 * math.pi)
    if a <= -math.pi:
        a += 2 * math.pi
    elif a > math.pi:
        a -= 2 * math.pi
    return a


@dataclass(frozen=True, slots=True)
class PoseEstimate:
    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0
    drift: float = 0.0


def counts_to_distance(counts: int, counts_per_rev: int, wheel_radius: float) -> float:
    if counts_per_rev <= 0:
        raise ValueError("counts_per_rev must be positive")
    return 2 * math.pi * wheel_radius * counts / counts_per_rev


def arc_advance(x: float, y: float, yaw: float, ds: float, steer: float, wheelbase: float):
    """Advance a rear-axle pose by ``ds`` along the arc fixed by ``steer``.

    The chord of an arc of radius ``b / tan(steer)`` is written as
    ``ds * sinc(dpsi / 2)`` along the mean heading, which stays exact as the
    radius grows without bound. Returns the new ``(x, y, yaw)``; yaw is wrapped.
    """
    dpsi = ds * math.tan(steer) / wheelbase
    half = 0.5 * dpsi
    chord = ds if half == 0.0 else ds * math.sin(half) / half
    mid = yaw + half
    return x + chord * math.cos(mid), y + chord * math.sin(mid), wrap_angle(yaw + dpsi)


def odometry_step(est: PoseEstimate, ds: float, steer: float, wheelbase: float) -> PoseEstimate:
    x, y, yaw = arc_advance(est.x, est.y, est.yaw, ds, steer, wheelbase)
    return PoseEstimate(x, y, yaw, est.drift + DRIFT_PER_METRE * abs(ds))


def yaw_update(yaw: float, mag_prev: float, mag_now: float) -> float:
    """Accumulate the wrapped magnetometer change into ``yaw``.

    A change above 30 degrees in one step breaks the small-angle assumption;
    a :class:`YawDiscontinuityWarning` is issued but the delta is still applied.
    """
    delta = wrap_angle(mag_now - mag_prev)
    if abs(delta) >= SMALL_ANGLE_LIMIT:
        warnings.warn(f"magnetometer jumped {math.degrees(delta):.1f} deg in one step",
                      YawDiscontinuityWarning, stacklevel=2)
    return wrap_angle(yaw + delta)


def blend_gps(est: PoseEstimate, gps_xy: tuple[float, float], weight: float) -> PoseEstimate:
    """Complementary position update toward a GPS fix; yaw is left alone."""
    if not 0.0 <= weight <= 1.0:
        raise ValueError("blend weight must lie in [0, 1]")
    if weight == 1.0:
        return PoseEstimate(float(gps_xy[0]), float(gps_xy[1]), est.yaw, 0.0)
    keep = 1.0 - weight
    return PoseEstimate(keep * est.x + weight * gps_xy[0], keep * est.y + weight * gps_xy[1],
                        est.yaw, keep * est.drift)
