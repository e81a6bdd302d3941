"""Seeded synthetic mobility traces with class-dependent entropy regimes.

Each simulated day a user visits ``k`` grid cells and splits the day between
them in contiguous blocks; fixes are emitted at a fixed rate at the center of
the cell occupied at that moment. Because the dwell split is known, the
expected entropy of a profile has a closed form, which makes the generator an
independent check on the entropy engine.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .grid import bbox_around, build_grid
from .ingest import (
    AgeGroup,
    Dataset,
    DemographicRecord,
    DemographicVariable,
    Gender,
    Trace,
    WorkingProfile,
)

DAY = 86_400
# Monday 2009-01-05T00:00:00Z
SYNTH_START = 1_231_113_600
LAUSANNE = (46.5, 6.6)

_VARIABLE_OF = {Gender: DemographicVariable.GENDER, AgeGroup: DemographicVariable.AGE_GROUP,
                WorkingProfile: DemographicVariable.WORKING_PROFILE}


@dataclass(frozen=True)
class SynthProfile:
    """Mobility regime of one synthetic class.

    ``dwell_concentration`` is the parameter of a symmetric Dirichlet over the
    day's dwell split; ``None`` splits the day evenly. ``labels`` holds extra
    demographic levels fixed for every user of the profile.
    """

    class_label: object
    cells_per_day: tuple = (1, 1)
    dwell_concentration: float | None = None
    fixes_per_hour: float = 4.0
    days: int = 60
    weekend_modifier: float = 1.0
    labels: tuple = ()


def _cells_today(rng, profile, weekday, n_cells):
    lo, hi = profile.cells_per_day
    k = int(rng.integers(lo, hi + 1))
    if weekday >= 5 and profile.weekend_modifier != 1.0:
        k = int(min(max(round(k * profile.weekend_modifier), 1), n_cells))
    return k


def generate_trace(user_id, profile: SynthProfile, grid, rng, start=SYNTH_START, jitter=False):
    """One user's trace following ``profile``."""
    n_fix = max(1, int(round(24 * profile.fixes_per_hour)))
    step = DAY // n_fix
    offsets = np.arange(n_fix, dtype=np.int64) * step
    ts, lat, lon = [], [], []
    for d in range(profile.days):
        day0 = start + d * DAY
        k = _cells_today(rng, profile, (d + _weekday(start)) % 7, grid.n_cells)
        cells = rng.choice(grid.n_cells, size=k, replace=False)
        if profile.dwell_concentration is None:
            props = np.full(k, 1.0 / k)
        else:
            props = rng.dirichlet(np.full(k, float(profile.dwell_concentration)))
        bounds = np.cumsum(props)[:-1] * DAY
        which = cells[np.searchsorted(bounds, offsets, side="right")]
        i, j = which // grid.m, which % grid.m
        clat = grid.min_lat + (j + 0.5) * grid.lat_step
        clon = grid.min_lon + (i + 0.5) * grid.lon_step
        if jitter:
            clat = clat + rng.uniform(-0.4, 0.4, n_fix) * grid.lat_step
            clon = clon + rng.uniform(-0.4, 0.4, n_fix) * grid.lon_step
        ts.append(day0 + offsets)
        lat.append(clat)
        lon.append(clon)
    return Trace(user_id, np.concatenate(ts), np.concatenate(lat), np.concatenate(lon))


def _weekday(epoch):
    return int((epoch // DAY + 3) % 7)


def _record(uid, profile, rng, random_labels):
    values = {}
    for level in (profile.class_label, *profile.labels):
        values[_VARIABLE_OF[type(level)].value] = level
    if random_labels:
        for var in DemographicVariable:
            if var.value not in values:
                values[var.value] = var.levels[int(rng.integers(len(var.levels)))]
    return DemographicRecord(uid, **values)


def generate_dataset(profiles, users_per_profile, seed, grid, start=SYNTH_START,
                     random_labels=True, jitter=False) -> Dataset:
    """Simulate ``users_per_profile`` users for every profile.

    Users are named ``u0000``, ``u0001``, ... in profile order. Each user has
    its own generator seeded from ``(seed, user index)``; labels not fixed by
    the profile are drawn uniformly when ``random_labels`` is set.
    """
    for p in profiles:
        lo, hi = p.cells_per_day
        top = hi if p.weekend_modifier <= 1 else min(grid.n_cells, math.ceil(hi * p.weekend_modifier))
        if not 1 <= lo <= hi or hi > grid.n_cells or top > grid.n_cells:
            raise DataError(
                f"profile {p.class_label}: cells_per_day {p.cells_per_day} does not fit a "
                f"{grid.n}x{grid.m} grid",
                "synth.generate_dataset",
            )
    traces, demo = {}, {}
    idx = 0
    for profile in profiles:
        for _ in range(users_per_profile):
            uid = f"u{idx:04d}"
            rng = np.random.default_rng([seed, idx])
            traces[uid] = generate_trace(uid, profile, grid, rng, start, jitter)
            demo[uid] = _record(uid, profile, np.random.default_rng([seed, idx, 1]),
                                random_labels)
            idx += 1
    return Dataset(traces, demo)


def expected_entropy(proportions, n_cells):
    """Closed-form normalized entropy (percent) of a dwell split."""
    p = np.asarray([q for q in proportions if q > 0], dtype=float)
    return float(-np.sum(p * np.log(p)) / np.log(n_cells) * 100.0)


def benchmark_grid(size=2, cell_size=500.0, origin=LAUSANNE):
    """``size`` x ``size`` grid of ``cell_size`` meter cells."""
    bbox = bbox_around(origin[0], origin[1], size * cell_size, size * cell_size)
    return build_grid(bbox, cell_size)


def synth_a(seed=42, users_per_profile=100, days=60, fixes_per_hour=4.0):
    """Two-class benchmark on a 2x2 grid; the signal-bearing variable is gender.

    "low" users (Female) visit 1-2 cells with a concentrated dwell split,
    "high" users (Male) visit 3-4 cells with a near-even one. Age group and
    working profile are random labels.
    """
    grid = benchmark_grid(2)
    profiles = [
        SynthProfile(Gender.FEMALE, (1, 2), 0.5, fixes_per_hour, days),
        SynthProfile(Gender.MALE, (3, 4), 20.0, fixes_per_hour, days),
    ]
    return generate_dataset(profiles, users_per_profile, seed, grid), grid


def synth_3class(seed=42, users_per_profile=70, days=60, fixes_per_hour=4.0):
    """Three ordered entropy regimes on a 3x3 grid.

    Age group and working profile both follow the regime (low entropy: 33+
    and full time; high entropy: under 22 and other); gender is random.
    """
    grid = benchmark_grid(3)
    profiles = [
        SynthProfile(AgeGroup.FROM33UP, (1, 2), 0.5, fixes_per_hour, days,
                     labels=(WorkingProfile.FULL_TIME,)),
        SynthProfile(AgeGroup.FROM22TO32, (3, 4), 2.0, fixes_per_hour, days,
                     labels=(WorkingProfile.PART_TIME,)),
        SynthProfile(AgeGroup.UNDER22, (6, 9), 20.0, fixes_per_hour, days,
                     labels=(WorkingProfile.OTHER,)),
    ]
    return generate_dataset(profiles, users_per_profile, seed, grid), grid


BENCHMARKS = {"synth-a": synth_a, "synth-3class": synth_3class}


__all__ = [
    "SynthProfile",
    "generate_trace",
    "generate_dataset",
    "expected_entropy",
    "benchmark_grid",
    "synth_a",
    "synth_3class",
    "BENCHMARKS",
    "SYNTH_START",
]
