"""Flat ``key = value`` run configuration.

Every recognized key, its default and a one-line description live in
:data:`KEYS`; unknown keys are rejected. Values given on the command line
(``--set key=value``) override the file.
"""
from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .entropy import Alignment, EntropyConfig, ProportionMode
from .errors import DataError
from .gam.model import FitControl, GamSpec
from .grid import build_grid


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    parse.__name__ = "|".join(options)
    return parse


def _optional_float(text):
    return None if text == "" else float(text)


def _lambda_grid(text):
    lo, hi, count = text.split(":")
    count = int(count)
    if count < 1:
        raise ValueError("grid needs at least one point")
    return tuple(10.0 ** np.linspace(float(lo), float(hi), count))


# key -> (parser, default text, description)
KEYS = {
    "grid.min_lat": (_optional_float, "", "southern edge of the study box (degrees); empty = fit to data"),
    "grid.min_lon": (_optional_float, "", "western edge of the study box (degrees)"),
    "grid.max_lat": (_optional_float, "", "northern edge of the study box (degrees)"),
    "grid.max_lon": (_optional_float, "", "eastern edge of the study box (degrees)"),
    "grid.cell_size_m": (float, "500", "cell edge length in meters"),
    "grid.outside": (_choice("drop", "error"), "drop", "policy for fixes outside the box"),
    "entropy.slice_seconds": (int, "86400", "time slice length in seconds"),
    "entropy.max_gap_seconds": (int, "3600", "cap on the dwell time credited to one fix"),
    "entropy.proportion_mode": (_choice("dwell", "count"), "dwell", "time shares from dwell time or fix counts"),
    "entropy.alignment": (_choice("midnight_utc", "first_fix"), "midnight_utc", "where slice 0 starts"),
    "gam.basis_dim": (int, "10", "B-spline basis functions per smooth"),
    "gam.penalty_order": (int, "2", "order of the coefficient difference penalty"),
    "gam.lambda_grid_log10": (_lambda_grid, "-3:3:13", "smoothing grid as log10 start:stop:count"),
    "gam.max_iter": (int, "100", "P-IRLS iteration limit"),
    "gam.tol": (float, "1e-8", "P-IRLS relative convergence tolerance"),
    "gam.gcv_sweeps": (int, "2", "coordinate sweeps of the GCV search"),
    "pipeline.aggregate": (_choice("mean", "vote"), "mean", "per-user aggregation of slice predictions"),
    "pipeline.test_fraction": (float, "0.1", "share of labeled users held out"),
    "pipeline.repeats": (int, "1", "number of seeded splits (seed, seed+1, ...)"),
    "synth.benchmark": (_choice("synth-a", "synth-3class"), "synth-a", "synthetic benchmark to generate"),
    "synth.users_per_profile": (int, "100", "users per synthetic class"),
    "synth.days": (int, "60", "simulated days per user"),
    "synth.fixes_per_hour": (float, "4", "synthetic sampling rate"),
    "io.traces": (str, "traces.csv", "trace CSV path"),
    "io.demographics": (str, "demographics.csv", "demographics CSV path"),
    "io.out_dir": (str, "out", "output directory"),
    "io.model": (str, "", "model file for predict (default: <out_dir>/model_<target>.txt)"),
    "run.seed": (int, "42", "random seed"),
    "run.target": (_choice("gender", "age_group", "working_profile", "all"), "all", "demographic variable(s)"),
}

_GRID_BOX = ("grid.min_lat", "grid.min_lon", "grid.max_lat", "grid.max_lon")
# keys that change entropy or model values; the fingerprint covers these only
_MODEL_SECTIONS = ("grid.", "entropy.", "gam.", "pipeline.")


class RunConfig:
    """Resolved configuration: raw text values plus typed accessors."""

    def __init__(self, values=None):
        self._raw = {k: spec[1] for k, spec in KEYS.items()}
        for key, val in (values or {}).items():
            self.set(key, val)

    @classmethod
    def parse(cls, text, source="<config>"):
        values = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise DataError(f"{source}:{lineno}: expected 'key = value'", "config.parse")
            values[key.strip()] = val.strip()
        try:
            return cls(values)
        except DataError as exc:
            raise DataError(f"{source}: {exc.args[0]}", "config.parse") from None

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read config {path}: {exc.strerror}", "config.load") from None
        return cls.parse(text, str(path))

    def set(self, key, value):
        key = key.strip()
        if key not in KEYS:
            raise DataError(f"unknown config key {key!r}", "config.set")
        value = str(value).strip()
        try:
            KEYS[key][0](value)
        except ValueError as exc:
            raise DataError(f"bad value {value!r} for {key}: {exc}", "config.set") from None
        self._raw[key] = value
        return self

    def override(self, assignments):
        for item in assignments:
            key, sep, val = item.partition("=")
            if not sep:
                raise DataError(f"--set expects key=value, got {item!r}", "config.set")
            self.set(key, val)
        return self

    def copy(self):
        return RunConfig(dict(self._raw))

    def __getitem__(self, key):
        return KEYS[key][0](self._raw[key])

    def raw(self, key):
        return self._raw[key]

    def to_text(self, keys=None):
        keys = sorted(keys or self._raw)
        return "".join(f"{k} = {self._raw[k]}\n" for k in keys)

    def fingerprint(self):
        """Short hash over the keys that affect computed values."""
        keys = [k for k in self._raw if k.startswith(_MODEL_SECTIONS)]
        return hashlib.sha256(self.to_text(keys).encode()).hexdigest()[:16]

    def has_bbox(self):
        return all(self._raw[k] != "" for k in _GRID_BOX)

    def grid(self, traces=None):
        """Grid from the configured box, or from the union box of ``traces``."""
        if self.has_bbox():
            bbox = tuple(self[k] for k in _GRID_BOX)
        elif traces:
            lat = np.concatenate([t.latitudes for t in traces.values()])
            lon = np.concatenate([t.longitudes for t in traces.values()])
            bbox = (float(lat.min()), float(lon.min()), float(lat.max()), float(lon.max()))
        else:
            raise DataError("grid box not configured and no traces to derive it from",
                            "grid.build_grid")
        return build_grid(bbox, self["grid.cell_size_m"])

    def set_bbox(self, grid):
        for key, val in zip(_GRID_BOX, (grid.min_lat, grid.min_lon, grid.max_lat, grid.max_lon)):
            self.set(key, repr(val))
        return self

    def entropy(self):
        return EntropyConfig(
            self["entropy.slice_seconds"],
            self["entropy.max_gap_seconds"],
            ProportionMode(self["entropy.proportion_mode"]),
            Alignment(self["entropy.alignment"]),
            self["grid.outside"],
        )

    def gam_spec(self):
        return GamSpec(basis_dim=self["gam.basis_dim"], penalty_order=self["gam.penalty_order"])

    def fit_control(self):
        return FitControl(
            lambda_grid=self["gam.lambda_grid_log10"],
            max_iter=self["gam.max_iter"],
            tol=self["gam.tol"],
            sweeps=self["gam.gcv_sweeps"],
        )


def describe_keys():
    """Help text listing every key with its default."""
    lines = ["configuration keys (default in brackets):"]
    for key, (_, default, desc) in KEYS.items():
        lines.append(f"  {key} [{default}]: {desc}")
    return "\n".join(lines)
