"""Reading and writing location traces and demographic labels.

Traces are delimited text files with a header ``user_id,timestamp,lat,lon``
(``latitude``/``longitude`` are accepted as column names too). Timestamps are
integer epoch seconds or ISO-8601 UTC strings such as ``2009-01-05T08:00:00Z``.

Demographics files have the header ``user_id,gender,age_group,working_profile``
with an empty field meaning "unknown".
"""
from __future__ import annotations

import csv
import enum
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .errors import DataError, FormatError

logger = logging.getLogger(__name__)

__all__ = [
    "Gender",
    "AgeGroup",
    "WorkingProfile",
    "DemographicVariable",
    "LocationRecord",
    "Trace",
    "DemographicRecord",
    "Dataset",
    "TraceFormat",
    "Traces",
    "parse_timestamp",
    "parse_traces",
    "parse_demographics",
    "write_traces",
    "write_demographics",
    "load_dataset",
]


class _Level(enum.Enum):
    """Enum whose members carry a canonical token plus accepted aliases."""

    def __new__(cls, token, *aliases):
        obj = object.__new__(cls)
        obj._value_ = token
        obj.aliases = (token,) + aliases
        return obj

    @classmethod
    def parse(cls, text):
        key = text.strip().lower()
        for member in cls:
            if key in member.aliases or key == member.name.lower():
                return member
        raise KeyError(text)

    def __str__(self):
        return self.label

    @property
    def label(self):
        return _LABELS[self]


class Gender(_Level):
    FEMALE = "female", "f"
    MALE = "male", "m"


class AgeGroup(_Level):
    UNDER22 = "lt22", "<22", "under22"
    FROM22TO32 = "22to32", ">=22&<33", "from22to32"
    FROM33UP = "ge33", ">=33", "from33up"


class WorkingProfile(_Level):
    FULL_TIME = "full_time", "fulltime", "full time"
    PART_TIME = "part_time", "parttime", "part time"
    OTHER = "other",


_LABELS = {
    Gender.FEMALE: "Female",
    Gender.MALE: "Male",
    AgeGroup.UNDER22: "Under22",
    AgeGroup.FROM22TO32: "From22To32",
    AgeGroup.FROM33UP: "From33Up",
    WorkingProfile.FULL_TIME: "FullTime",
    WorkingProfile.PART_TIME: "PartTime",
    WorkingProfile.OTHER: "Other",
}


class DemographicVariable(enum.Enum):
    GENDER = "gender"
    AGE_GROUP = "age_group"
    WORKING_PROFILE = "working_profile"

    @property
    def levels(self):
        """Ordered class levels for this variable."""
        return tuple(_LEVEL_TYPES[self])

    def parse_level(self, text):
        return _LEVEL_TYPES[self].parse(text)

    @classmethod
    def parse(cls, text):
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise DataError(
                f"unknown target variable {text!r}; expected one of "
                + ", ".join(v.value for v in cls)
            ) from None


_LEVEL_TYPES = {
    DemographicVariable.GENDER: Gender,
    DemographicVariable.AGE_GROUP: AgeGroup,
    DemographicVariable.WORKING_PROFILE: WorkingProfile,
}


@dataclass(frozen=True)
class LocationRecord:
    user_id: str
    timestamp: int
    latitude: float
    longitude: float


class Trace:
    """Time-ordered fixes of one user, stored column-wise.

    The arrays are read-only; build a new trace rather than editing one.
    """

    __slots__ = ("user_id", "timestamps", "latitudes", "longitudes")

    def __init__(self, user_id, timestamps, latitudes, longitudes):
        ts = np.array(timestamps, dtype=np.int64)
        lat = np.array(latitudes, dtype=float)
        lon = np.array(longitudes, dtype=float)
        if not (ts.shape == lat.shape == lon.shape) or ts.ndim != 1:
            raise DataError("trace columns must be 1-d and equally long", "ingest.Trace")
        if ts.size and np.any(np.diff(ts) <= 0):
            raise DataError(
                f"trace {user_id!r} timestamps are not strictly increasing", "ingest.Trace"
            )
        if ts.size and (ts[0] < 0 or np.any(np.abs(lat) > 90) or np.any(np.abs(lon) > 180)):
            raise DataError(f"trace {user_id!r} has out-of-range values", "ingest.Trace")
        for arr in (ts, lat, lon):
            arr.flags.writeable = False
        self.user_id = str(user_id)
        self.timestamps = ts
        self.latitudes = lat
        self.longitudes = lon

    @classmethod
    def from_records(cls, records):
        records = sorted(records, key=lambda r: r.timestamp)
        if not records:
            raise DataError("cannot build a trace from zero records", "ingest.Trace")
        uid = records[0].user_id
        if any(r.user_id != uid for r in records):
            raise DataError("records belong to several users", "ingest.Trace")
        return cls(
            uid,
            [r.timestamp for r in records],
            [r.latitude for r in records],
            [r.longitude for r in records],
        )

    @property
    def records(self):
        return [
            LocationRecord(self.user_id, int(t), float(a), float(o))
            for t, a, o in zip(self.timestamps, self.latitudes, self.longitudes)
        ]

    def __len__(self):
        return int(self.timestamps.size)

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.user_id == other.user_id
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.latitudes, other.latitudes)
            and np.array_equal(self.longitudes, other.longitudes)
        )

    def __repr__(self):
        return f"Trace({self.user_id!r}, n={len(self)})"


@dataclass(frozen=True)
class DemographicRecord:
    user_id: str
    gender: Gender | None = None
    age_group: AgeGroup | None = None
    working_profile: WorkingProfile | None = None

    def get(self, variable: DemographicVariable):
        return getattr(self, variable.value)


@dataclass(frozen=True)
class Dataset:
    """Traces plus (possibly partial) demographic labels."""

    traces: Mapping[str, Trace]
    demographics: Mapping[str, DemographicRecord] = field(default_factory=dict)

    def __post_init__(self):
        missing = sorted(set(self.demographics) - set(self.traces))
        if missing:
            raise DataError(
                f"{len(missing)} labeled users have no trace (e.g. {missing[0]!r})",
                "ingest.Dataset",
            )

    def labeled_users(self, variable):
        """Sorted users that have both a trace and a label for ``variable``."""
        return sorted(
            uid for uid, rec in self.demographics.items() if rec.get(variable) is not None
        )

    def without_users(self, users):
        drop = set(users)
        return Dataset(
            {u: t for u, t in self.traces.items() if u not in drop},
            {u: d for u, d in self.demographics.items() if u not in drop},
        )

    def with_demographics(self, demographics):
        return Dataset(self.traces, demographics)


@dataclass(frozen=True)
class TraceFormat:
    """Column layout of a trace file."""

    delimiter: str = ","
    user_column: tuple = ("user_id", "user", "uid")
    time_column: tuple = ("timestamp", "time", "ts")
    lat_column: tuple = ("lat", "latitude")
    lon_column: tuple = ("lon", "longitude", "lng")


class Traces(dict):
    """``user_id -> Trace`` mapping that also remembers rejected-row counts.

    ``rejected`` counts rows by reason: ``malformed``, ``out_of_range``
    and ``duplicate``.
    """

    def __init__(self, *args, rejected=None, **kwargs):
        super().__init__(*args, **kwargs)
        self.rejected = Counter(rejected or {})

    @property
    def warning_count(self):
        return sum(self.rejected.values())


def parse_timestamp(text):
    """Epoch seconds from an integer string or an ISO-8601 UTC string."""
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    iso = text[:-1] + "+00:00" if text.endswith(("Z", "z")) else text
    dt = datetime.fromisoformat(iso)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _column_index(header, names, path):
    lowered = [h.strip().lower() for h in header]
    for name in names:
        if name in lowered:
            return lowered.index(name)
    raise FormatError(f"{path}: header lacks a column named one of {names}", "ingest.parse_traces")


def parse_traces(path, fmt: TraceFormat | None = None) -> Traces:
    """Parse a trace file into per-user, timestamp-sorted traces.

    Rows that cannot be parsed or have out-of-range coordinates are skipped and
    counted; repeated ``(user, timestamp)`` pairs keep the first occurrence.
    If more than half the data rows are malformed the file is assumed to be of
    the wrong kind and :class:`FormatError` is raised.
    """
    fmt = fmt or TraceFormat()
    path = Path(path)
    rejected = Counter()
    per_user: dict[str, dict[int, tuple[float, float]]] = {}
    n_rows = 0
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=fmt.delimiter)
        header = next(reader, None)
        if header is None:
            raise FormatError(f"{path}: empty file", "ingest.parse_traces")
        iu = _column_index(header, fmt.user_column, path)
        it = _column_index(header, fmt.time_column, path)
        ila = _column_index(header, fmt.lat_column, path)
        ilo = _column_index(header, fmt.lon_column, path)
        width = len(header)
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            n_rows += 1
            try:
                if len(row) != width:
                    raise ValueError("field count")
                uid = row[iu].strip()
                if not uid:
                    raise ValueError("empty user")
                ts = parse_timestamp(row[it])
                lat = float(row[ila])
                lon = float(row[ilo])
            except ValueError:
                rejected["malformed"] += 1
                continue
            if ts < 0 or not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
                rejected["out_of_range"] += 1
                continue
            fixes = per_user.setdefault(uid, {})
            if ts in fixes:
                rejected["duplicate"] += 1
                continue
            fixes[ts] = (lat, lon)

    bad = rejected["malformed"] + rejected["out_of_range"]
    if n_rows and bad > 0.5 * n_rows:
        raise FormatError(
            f"{path}: {bad} of {n_rows} rows are malformed; is this a trace file?",
            "ingest.parse_traces",
        )
    if rejected:
        logger.warning("%s: rejected rows %s", path, dict(rejected))

    traces = Traces(rejected=rejected)
    for uid in sorted(per_user):
        fixes = per_user[uid]
        ts = sorted(fixes)
        traces[uid] = Trace(uid, ts, [fixes[t][0] for t in ts], [fixes[t][1] for t in ts])
    return traces


_DEMO_FIELDS = ("gender", "age_group", "working_profile")


def parse_demographics(path) -> dict[str, DemographicRecord]:
    """Parse a demographics file; unknown tokens raise :class:`DataError`."""
    path = Path(path)
    out = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise FormatError(f"{path}: empty file", "ingest.parse_demographics")
        names = [h.strip().lower() for h in header]
        if names[:1] != ["user_id"] or any(f not in names for f in _DEMO_FIELDS):
            raise FormatError(
                f"{path}: expected header user_id,gender,age_group,working_profile",
                "ingest.parse_demographics",
            )
        idx = {f: names.index(f) for f in _DEMO_FIELDS}
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(names):
                raise DataError(
                    f"{path}:{lineno}: expected {len(names)} fields, got {len(row)}",
                    "ingest.parse_demographics",
                )
            uid = row[0].strip()
            values = {}
            for fname in _DEMO_FIELDS:
                token = row[idx[fname]].strip()
                if not token:
                    values[fname] = None
                    continue
                try:
                    values[fname] = DemographicVariable(fname).parse_level(token)
                except KeyError:
                    raise DataError(
                        f"row {uid!r} (line {lineno}): unknown {fname} token {token!r} "
                        f"in field {fname!r}",
                        "ingest.parse_demographics",
                    ) from None
            if uid in out:
                raise DataError(
                    f"row {uid!r} (line {lineno}): duplicate user", "ingest.parse_demographics"
                )
            out[uid] = DemographicRecord(uid, **values)
    return out


def _iter_trace_rows(traces) -> Iterator[tuple]:
    for uid in sorted(traces):
        tr = traces[uid]
        for t, a, o in zip(tr.timestamps, tr.latitudes, tr.longitudes):
            yield uid, int(t), repr(float(a)), repr(float(o))


def write_traces(traces, path):
    """Write traces in the canonical format (epoch seconds, round-trip floats)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "timestamp", "lat", "lon"])
        w.writerows(_iter_trace_rows(traces))


def write_demographics(demographics, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", *_DEMO_FIELDS])
        for uid in sorted(demographics):
            levels = [getattr(demographics[uid], f) for f in _DEMO_FIELDS]
            w.writerow([uid] + [lvl.value if lvl is not None else "" for lvl in levels])


def load_dataset(traces_path, demographics_path=None) -> Dataset:
    """Parse both files into a :class:`Dataset`.

    Labeled users without any valid fix are dropped with a warning.
    """
    traces = parse_traces(traces_path)
    demographics = parse_demographics(demographics_path) if demographics_path else {}
    orphans = sorted(set(demographics) - set(traces))
    if orphans:
        logger.warning("dropping %d labeled users without trace", len(orphans))
        demographics = {u: d for u, d in demographics.items() if u in traces}
    return Dataset(traces, demographics)
