"""Per-time-slice normalized spatio-temporal entropy.

For every slice ``t`` the share of time spent in each grid cell, ``p_ij``, is
turned into a percentage

    entropy_t = -100 * sum(p_ij * log p_ij) / log(n * m)

which is 0 when the user never leaves one cell and 100 when time is spread
evenly over every cell of the grid.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Mapping

import numpy as np

from .errors import DataError, OutOfBoundsError
from .grid import CellIndex, GridSpec, locate_many

logger = logging.getLogger(__name__)

DAY = 86_400


class Alignment(enum.Enum):
    MIDNIGHT_UTC = "midnight_utc"
    FIRST_FIX = "first_fix"


class ProportionMode(enum.Enum):
    DWELL = "dwell"
    COUNT = "count"


@dataclass(frozen=True)
class TimeSliceSpec:
    origin: int
    duration: int
    T: int

    def __post_init__(self):
        if self.duration <= 0 or self.T < 1:
            raise DataError(f"invalid slice spec {self}", "entropy.TimeSliceSpec")

    def start(self, t):
        return self.origin + t * self.duration

    def start_iso(self, t):
        dt = datetime.fromtimestamp(self.start(t), tz=timezone.utc)
        return dt.strftime("%Y-%m-%dT%H:%M:%SZ")

    def slice_of(self, timestamps):
        return (np.asarray(timestamps, dtype=np.int64) - self.origin) // self.duration


@dataclass(frozen=True)
class EntropyConfig:
    slice_seconds: int = DAY
    max_gap_seconds: int = 3600
    proportion_mode: ProportionMode = ProportionMode.DWELL
    alignment: Alignment = Alignment.MIDNIGHT_UTC
    outside: str = "drop"


@dataclass(frozen=True)
class OccupancyMap:
    """Per-slice ``CellIndex -> weight`` maps.

    Weights are integer dwell seconds (or fix counts in count mode);
    ``covered[t]`` is the total weight attributed to slice ``t``.
    """

    slices: tuple
    covered: tuple
    dropped_outside: int = 0


@dataclass(frozen=True)
class EntropySequence:
    user_id: str
    slice_spec: TimeSliceSpec
    values: tuple

    def __len__(self):
        return len(self.values)

    def as_array(self):
        """Values as floats with NaN for missing slices."""
        return np.array([np.nan if v is None else v for v in self.values], dtype=float)

    def present(self):
        """Indices of slices with an entropy value."""
        return [t for t, v in enumerate(self.values) if v is not None]


def build_slice_spec(trace, duration=DAY, alignment=Alignment.MIDNIGHT_UTC) -> TimeSliceSpec:
    """Equal-length slices covering the whole trace."""
    if len(trace) == 0:
        raise DataError(f"trace {trace.user_id!r} is empty", "entropy.build_slice_spec")
    duration = int(duration)
    first = int(trace.timestamps[0])
    last = int(trace.timestamps[-1])
    alignment = Alignment(alignment)
    origin = first - first % DAY if alignment is Alignment.MIDNIGHT_UTC else first
    T = -(-(last - origin + 1) // duration)
    return TimeSliceSpec(origin, duration, T)


def _cell_codes(trace, grid, outside):
    lat, lon = trace.latitudes, trace.longitudes
    inside = grid.contains(lat, lon)
    if not inside.all() and outside == "error":
        k = int(np.argmin(inside))
        raise OutOfBoundsError(
            f"trace {trace.user_id!r}: fix at ({lat[k]}, {lon[k]}) outside grid",
            "entropy.compute_occupancy",
        )
    i, j = locate_many(grid, lat, lon)
    codes = grid.flat_index(i, j)
    codes[~inside] = -1
    return codes, int((~inside).sum())


def _dwell_pieces(ts, codes, spec, max_gap):
    """Split capped forward intervals at slice boundaries.

    Returns arrays (slice index, cell code, seconds).
    """
    start = ts[:-1]
    end = np.minimum(ts[1:], start + max_gap)
    cell = codes[:-1]
    keep = cell >= 0
    start, end, cell = start[keep], end[keep], cell[keep]
    out_s, out_c, out_w = [], [], []
    while start.size:
        t = (start - spec.origin) // spec.duration
        boundary = spec.origin + (t + 1) * spec.duration
        stop = np.minimum(end, boundary)
        out_s.append(t)
        out_c.append(cell)
        out_w.append(stop - start)
        rest = end > boundary
        start, end, cell = boundary[rest], end[rest], cell[rest]
    if not out_s:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    return np.concatenate(out_s), np.concatenate(out_c), np.concatenate(out_w)


def compute_occupancy(
    trace, grid: GridSpec, spec: TimeSliceSpec, max_gap=3600,
    mode=ProportionMode.DWELL, outside="drop",
) -> OccupancyMap:
    """Time (or fix count) spent in each visited cell, per slice.

    In dwell mode each fix owns the interval up to the next fix, capped at
    ``max_gap`` seconds; the last fix owns nothing. Fixes outside the grid own
    nothing either and are counted in ``dropped_outside``.
    """
    if max_gap <= 0:
        raise DataError("max_gap must be > 0", "entropy.compute_occupancy")
    ts = trace.timestamps
    codes, n_out = _cell_codes(trace, grid, outside)
    if ProportionMode(mode) is ProportionMode.DWELL:
        s, c, w = _dwell_pieces(ts, codes, spec, int(max_gap))
    else:
        keep = codes >= 0
        s, c = spec.slice_of(ts[keep]), codes[keep]
        w = np.ones_like(s)
    valid = (s >= 0) & (s < spec.T) & (w > 0)
    s, c, w = s[valid], c[valid], w[valid]

    keys = s * grid.n_cells + c
    uniq, inv = np.unique(keys, return_inverse=True)
    totals = np.zeros(uniq.size, dtype=np.int64)
    np.add.at(totals, inv, w.astype(np.int64))

    slices = [dict() for _ in range(spec.T)]
    covered = [0] * spec.T
    for key, tot in zip(uniq.tolist(), totals.tolist()):
        t, code = divmod(key, grid.n_cells)
        slices[t][grid.unflatten(code)] = tot
        covered[t] += tot
    if n_out:
        logger.debug("trace %s: %d fixes outside grid dropped", trace.user_id, n_out)
    return OccupancyMap(tuple(slices), tuple(covered), n_out)


def slice_entropy(occupancy: Mapping, grid, base=None):
    """Normalized entropy (percent) of one slice, or ``None`` if it is empty.

    Parameters
    ----------
    occupancy : mapping
        Cell -> non-negative weight for one slice.
    grid : GridSpec or int
        The grid, or directly its number of cells ``n * m``.
    base : float, optional
        Logarithm base. The normalization makes the result independent of it;
        natural log is used by default.
    """
    n_cells = grid.n_cells if isinstance(grid, GridSpec) else int(grid)
    if n_cells < 2:
        raise DataError("normalized entropy needs n * m >= 2", "entropy.slice_entropy")
    weights = sorted(w for w in occupancy.values() if w > 0)
    covered = math.fsum(weights)
    if covered <= 0:
        return None
    log = math.log if base is None else (lambda x: math.log(x, base))
    h = -math.fsum(p * log(p) for p in (w / covered for w in weights)) / log(n_cells) * 100.0
    if h <= 0.0:
        return 0.0
    return min(h, 100.0)


def entropy_sequence(
    trace, grid: GridSpec, spec: TimeSliceSpec, max_gap=3600,
    mode=ProportionMode.DWELL, outside="drop",
) -> EntropySequence:
    """Entropy of every slice of ``spec``; unobserved slices are ``None``."""
    occ = compute_occupancy(trace, grid, spec, max_gap, mode, outside)
    values = tuple(slice_entropy(s, grid) for s in occ.slices)
    return EntropySequence(trace.user_id, spec, values)


def compute_sequences(traces, grid: GridSpec, config: EntropyConfig = EntropyConfig()):
    """Entropy sequences for every trace in ``traces`` (a user -> Trace mapping)."""
    out = {}
    for uid in sorted(traces):
        tr = traces[uid]
        spec = build_slice_spec(tr, config.slice_seconds, config.alignment)
        out[uid] = entropy_sequence(
            tr, grid, spec, config.max_gap_seconds, config.proportion_mode, config.outside
        )
    return out


__all__ = [
    "Alignment",
    "ProportionMode",
    "TimeSliceSpec",
    "EntropyConfig",
    "OccupancyMap",
    "EntropySequence",
    "CellIndex",
    "build_slice_spec",
    "compute_occupancy",
    "slice_entropy",
    "entropy_sequence",
    "compute_sequences",
]
