"""Rectangular spatial grid over a lat/lon bounding box.

Cell counts come from an equirectangular approximation of the box extent in
meters. Cells tile the box exactly, so each is at most ``cell_size`` wide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, OutOfBoundsError

EARTH_RADIUS_M = 6_371_000.0
_M_PER_DEG = math.pi / 180.0 * EARTH_RADIUS_M
# positions within this fraction of a cell from an edge are treated as on the edge
_EDGE_SLACK = 1e-9


@dataclass(frozen=True)
class CellIndex:
    i: int
    j: int


@dataclass(frozen=True)
class GridSpec:
    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float
    cell_size: float
    n: int
    m: int

    @property
    def n_cells(self):
        return self.n * self.m

    @property
    def lon_step(self):
        return (self.max_lon - self.min_lon) / self.n

    @property
    def lat_step(self):
        return (self.max_lat - self.min_lat) / self.m

    def contains(self, lat, lon):
        lat = np.asarray(lat)
        lon = np.asarray(lon)
        return (
            (lat >= self.min_lat) & (lat <= self.max_lat)
            & (lon >= self.min_lon) & (lon <= self.max_lon)
        )

    def cell_center(self, cell):
        """(lat, lon) of the center of ``cell``."""
        return (
            self.min_lat + (cell.j + 0.5) * self.lat_step,
            self.min_lon + (cell.i + 0.5) * self.lon_step,
        )

    def flat_index(self, i, j):
        return np.asarray(i) * self.m + np.asarray(j)

    def unflatten(self, flat):
        return CellIndex(int(flat) // self.m, int(flat) % self.m)


def extent_meters(min_lat, min_lon, max_lat, max_lon):
    """East-west and north-south extent of a box in meters (equirectangular)."""
    mid = math.radians(0.5 * (min_lat + max_lat))
    ew = (max_lon - min_lon) * _M_PER_DEG * math.cos(mid)
    ns = (max_lat - min_lat) * _M_PER_DEG
    return ew, ns


def _cells(extent, cell_size):
    return max(1, math.ceil(extent / cell_size - _EDGE_SLACK))


def build_grid(bbox, cell_size=500.0) -> GridSpec:
    """Build a grid over ``bbox = (min_lat, min_lon, max_lat, max_lon)``.

    Raises
    ------
    DataError
        If the box has zero extent, ``cell_size`` is not positive, or the grid
        would have a single cell (normalized entropy needs ``n * m >= 2``).
    """
    min_lat, min_lon, max_lat, max_lon = (float(v) for v in bbox)
    if not cell_size > 0:
        raise DataError(f"cell_size must be > 0, got {cell_size}", "grid.build_grid")
    if not (min_lat < max_lat and min_lon < max_lon):
        raise DataError(f"degenerate bounding box {bbox}", "grid.build_grid")
    if not (-90 <= min_lat and max_lat <= 90 and -180 <= min_lon and max_lon <= 180):
        raise DataError(f"bounding box {bbox} outside WGS-84 range", "grid.build_grid")
    ew, ns = extent_meters(min_lat, min_lon, max_lat, max_lon)
    n = _cells(ew, cell_size)
    m = _cells(ns, cell_size)
    if n * m < 2:
        raise DataError(
            f"grid has a single cell ({ew:.0f} m x {ns:.0f} m box, cell_size {cell_size} m); "
            "use a smaller cell_size",
            "grid.build_grid",
        )
    return GridSpec(min_lat, min_lon, max_lat, max_lon, float(cell_size), n, m)


def bbox_around(lat, lon, width_m, height_m):
    """Box of the given metric size whose lower-left corner is ``(lat, lon)``."""
    dlat = height_m / _M_PER_DEG
    mid = math.radians(lat + 0.5 * dlat)
    dlon = width_m / (_M_PER_DEG * math.cos(mid))
    return (lat, lon, lat + dlat, lon + dlon)


def locate_many(grid: GridSpec, lat, lon):
    """Vectorized :func:`locate`; returns integer arrays ``(i, j)``.

    Points outside the box are not checked here.
    """
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    i = np.floor((lon - grid.min_lon) / grid.lon_step + _EDGE_SLACK).astype(np.int64)
    j = np.floor((lat - grid.min_lat) / grid.lat_step + _EDGE_SLACK).astype(np.int64)
    return np.clip(i, 0, grid.n - 1), np.clip(j, 0, grid.m - 1)


def locate(grid: GridSpec, lat, lon) -> CellIndex:
    """Cell containing ``(lat, lon)``; points on the upper edges map to the last cell."""
    if not grid.contains(lat, lon):
        raise OutOfBoundsError(f"point ({lat}, {lon}) outside grid bounding box", "grid.locate")
    i, j = locate_many(grid, [lat], [lon])
    return CellIndex(int(i[0]), int(j[0]))
