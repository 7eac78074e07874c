"""Local equirectangular projection about a fixed geodetic origin.

``x`` points east and ``y`` north, both in metres.
"""
from __future__ import annotations

import math

from .errors import OutOfDomainError

EARTH_RADIUS = 6_371_000.0
VALIDITY_RADIUS = 10_000.0


def geodetic_to_local(lat: float, lon: float, origin_lat: float, origin_lon: float,
                      check: bool = True) -> tuple[float, float]:
    dlon = (lon - origin_lon + 180.0) % 360.0 - 180.0
    x = EARTH_RADIUS * math.radians(dlon) * math.cos(math.radians(origin_lat))
    y = EARTH_RADIUS * math.radians(lat - origin_lat)
    if check and math.hypot(x, y) > VALIDITY_RADIUS:
        raise OutOfDomainError(f"point ({lat}, {lon}) is {math.hypot(x, y) / 1000:.1f} km from the origin; "
                               f"the flat-earth mapping is limited to {VALIDITY_RADIUS / 1000:g} km")
    return x, y


def local_to_geodetic(x: float, y: float, origin_lat: float, origin_lon: float,
                      check: bool = True) -> tuple[float, float]:
    if check and math.hypot(x, y) > VALIDITY_RADIUS:
        raise OutOfDomainError(f"local point ({x:.0f}, {y:.0f}) m is beyond the validity radius")
    lat = origin_lat + math.degrees(y / EARTH_RADIUS)
    lon = origin_lon + math.degrees(x / (EARTH_RADIUS * math.cos(math.radians(origin_lat))))
    return lat, lon
