"""Per-(user, slice) covariate rows for the demographic models."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import DataError
from .ingest import DemographicVariable

logger = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0


def haversine(a, b):
    """Great-circle distance in kilometers between two ``(lat, lon)`` points."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    h = (
        math.sin((lat2 - lat1) / 2) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    )
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(min(1.0, h)))


def pairwise_haversine(lat, lon):
    """Matrix of great-circle distances (km) between all points."""
    lat = np.radians(np.asarray(lat, dtype=float))
    lon = np.radians(np.asarray(lon, dtype=float))
    dlat = lat[:, None] - lat[None, :]
    dlon = lon[:, None] - lon[None, :]
    h = np.sin(dlat / 2) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.minimum(h, 1.0)))


def _diameter(lat, lon):
    if lat.size < 2:
        return 0.0
    pts = np.unique(np.column_stack([lat, lon]), axis=0)
    if len(pts) < 2:
        return 0.0
    return float(pairwise_haversine(pts[:, 0], pts[:, 1]).max())


def max_distance_in_slice(trace, spec, t):
    """Largest pairwise distance (km) among the fixes of slice ``t``."""
    if not 0 <= t < spec.T:
        raise DataError(f"slice {t} outside [0, {spec.T})", "features.max_distance_in_slice")
    lo, hi = spec.start(t), spec.start(t + 1)
    ts = trace.timestamps
    a, b = np.searchsorted(ts, lo, "left"), np.searchsorted(ts, hi, "left")
    return _diameter(trace.latitudes[a:b], trace.longitudes[a:b])


def day_of_week(epoch_seconds):
    """0 = Monday ... 6 = Sunday, in UTC."""
    return datetime.fromtimestamp(int(epoch_seconds), tz=timezone.utc).weekday()


@dataclass(frozen=True)
class CovariateRow:
    user_id: str
    slice_index: int
    entropy: float
    max_distance: float
    day_of_week: int
    label: object = None


@dataclass(frozen=True)
class FeatureTable:
    target_variable: DemographicVariable
    rows: tuple
    class_levels: tuple
    warnings: tuple = field(default=(), compare=False)

    def __len__(self):
        return len(self.rows)

    def users(self):
        return sorted({r.user_id for r in self.rows})

    def user_labels(self):
        return {r.user_id: r.label for r in self.rows}

    def subset(self, users):
        keep = set(users)
        rows = tuple(r for r in self.rows if r.user_id in keep)
        return FeatureTable(self.target_variable, rows, self.class_levels, self.warnings)

    def rows_for(self, user_id):
        return [r for r in self.rows if r.user_id == user_id]

    def covariates(self):
        """Column arrays keyed by covariate name."""
        return rows_to_covariates(self.rows)

    def label_index(self):
        """Integer position of each row's label within ``class_levels``."""
        pos = {lvl: k for k, lvl in enumerate(self.class_levels)}
        return np.array([pos[r.label] for r in self.rows], dtype=np.int64)

    def with_labels(self, labels):
        """Copy with per-user labels replaced (``labels``: user -> level)."""
        rows = tuple(
            CovariateRow(r.user_id, r.slice_index, r.entropy, r.max_distance,
                         r.day_of_week, labels[r.user_id])
            for r in self.rows
        )
        return FeatureTable(self.target_variable, rows, self.class_levels, self.warnings)


def rows_to_covariates(rows):
    return {
        "entropy": np.array([r.entropy for r in rows], dtype=float),
        "max_distance": np.array([r.max_distance for r in rows], dtype=float),
        "day_of_week": np.array([r.day_of_week for r in rows], dtype=np.int64),
    }


def user_rows(trace, sequence, label=None):
    """Covariate rows of one user's present slices."""
    spec = sequence.slice_spec
    return [
        CovariateRow(
            trace.user_id, t, float(sequence.values[t]),
            max_distance_in_slice(trace, spec, t), day_of_week(spec.start(t)), label,
        )
        for t in sequence.present()
    ]


def assemble_features(dataset, sequences, target) -> FeatureTable:
    """One row per present slice of every user labeled for ``target``.

    Rows are ordered by user id, then slice index.
    """
    target = DemographicVariable(target)
    rows = []
    for uid in dataset.labeled_users(target):
        if uid not in sequences:
            continue
        label = dataset.demographics[uid].get(target)
        rows.extend(user_rows(dataset.traces[uid], sequences[uid], label))
    if not rows:
        raise DataError(
            f"no usable rows for target {target.value!r} (no labeled users with observed slices)",
            "features.assemble_features",
        )
    levels = target.levels
    counts = {lvl: 0 for lvl in levels}
    for r in rows:
        counts[r.label] += 1
    warnings = tuple(f"class {lvl.label} has no rows" for lvl in levels if counts[lvl] == 0)
    for w in warnings:
        logger.warning("%s: %s", target.value, w)
    return FeatureTable(target, tuple(rows), levels, warnings)


__all__ = [
    "haversine",
    "pairwise_haversine",
    "max_distance_in_slice",
    "day_of_week",
    "CovariateRow",
    "FeatureTable",
    "rows_to_covariates",
    "user_rows",
    "assemble_features",
]
