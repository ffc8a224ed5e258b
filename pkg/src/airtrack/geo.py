"""Geodetic <-> local Cartesian conversions on the WGS-84 ellipsoid.

All solver math in this package runs in a local east-north-up (ENU) frame
anchored at a declared origin; this module provides the frame conversions
plus the small geometric helpers (distance, elevation angle) everything
else builds on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# WGS-84 ellipsoid
WGS84_A = 6378137.0                 # semi-major axis [m]
WGS84_F = 1.0 / 298.257223563       # flattening
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)  # first eccentricity squared


@dataclass(frozen=True)
class GeodeticPosition:
    """Latitude/longitude in degrees, altitude in meters above the ellipsoid."""

    lat_deg: float
    lon_deg: float
    alt_m: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude {self.lat_deg} outside [-90, 90]")
        if not -180.0 < self.lon_deg <= 180.0:
            raise ValueError(f"longitude {self.lon_deg} outside (-180, 180]")
        if not math.isfinite(self.alt_m):
            raise ValueError("altitude must be finite")


@dataclass(frozen=True)
class CartesianPosition:
    """East/north/up coordinates in meters, relative to a declared origin."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError("Cartesian components must be finite")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


def _geodetic_to_ecef(p: GeodeticPosition) -> tuple[float, float, float]:
    lat = math.radians(p.lat_deg)
    lon = math.radians(p.lon_deg)
    sin_lat, cos_lat = math.sin(lat), math.cos(lat)
    sin_lon, cos_lon = math.sin(lon), math.cos(lon)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
    x = (n + p.alt_m) * cos_lat * cos_lon
    y = (n + p.alt_m) * cos_lat * sin_lon
    z = (n * (1.0 - WGS84_E2) + p.alt_m) * sin_lat
    return x, y, z


def _ecef_to_geodetic(x: float, y: float, z: float) -> GeodeticPosition:
    lon = math.atan2(y, x)
    rho = math.hypot(x, y)
    # Iterative latitude/altitude recovery; converges to sub-mm in a few steps.
    lat = math.atan2(z, rho * (1.0 - WGS84_E2))
    alt = 0.0
    for _ in range(8):
        sin_lat = math.sin(lat)
        n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
        alt = rho / math.cos(lat) - n if rho > 1.0 else z / sin_lat - n * (1.0 - WGS84_E2)
        lat = math.atan2(z, rho * (1.0 - WGS84_E2 * n / (n + alt)))
    lon_deg = math.degrees(lon)
    if lon_deg <= -180.0:
        lon_deg += 360.0
    return GeodeticPosition(math.degrees(lat), lon_deg, alt)


def geodetic_to_local(p: GeodeticPosition, origin: GeodeticPosition) -> CartesianPosition:
    """Map a geodetic position into the ENU frame anchored at ``origin``."""
    px, py, pz = _geodetic_to_ecef(p)
    ox, oy, oz = _geodetic_to_ecef(origin)
    dx, dy, dz = px - ox, py - oy, pz - oz
    lat = math.radians(origin.lat_deg)
    lon = math.radians(origin.lon_deg)
    sin_lat, cos_lat = math.sin(lat), math.cos(lat)
    sin_lon, cos_lon = math.sin(lon), math.cos(lon)
    east = -sin_lon * dx + cos_lon * dy
    north = -sin_lat * cos_lon * dx - sin_lat * sin_lon * dy + cos_lat * dz
    up = cos_lat * cos_lon * dx + cos_lat * sin_lon * dy + sin_lat * dz
    return CartesianPosition(east, north, up)


def local_to_geodetic(p: CartesianPosition, origin: GeodeticPosition) -> GeodeticPosition:
    """Inverse of :func:`geodetic_to_local` for the same ``origin``."""
    ox, oy, oz = _geodetic_to_ecef(origin)
    lat = math.radians(origin.lat_deg)
    lon = math.radians(origin.lon_deg)
    sin_lat, cos_lat = math.sin(lat), math.cos(lat)
    sin_lon, cos_lon = math.sin(lon), math.cos(lon)
    dx = -sin_lon * p.x - sin_lat * cos_lon * p.y + cos_lat * cos_lon * p.z
    dy = cos_lon * p.x - sin_lat * sin_lon * p.y + cos_lat * sin_lon * p.z
    dz = cos_lat * p.y + sin_lat * p.z
    return _ecef_to_geodetic(ox + dx, oy + dy, oz + dz)


def distance(a: CartesianPosition, b: CartesianPosition) -> float:
    """Euclidean distance in meters."""
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


def elevation_angle(ground: CartesianPosition, air: CartesianPosition) -> float:
    """Elevation of ``air`` as seen from ``ground``, in degrees within [0, 90].

    Co-located points are treated as straight overhead (90 deg).
    """
    h = air.z - ground.z
    r = math.hypot(air.x - ground.x, air.y - ground.y)
    if r == 0.0:
        return 90.0
    return math.degrees(math.atan2(max(h, 0.0), r))
