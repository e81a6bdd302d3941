"""Plain-text model files.

One ``key = value`` entry per line; ``#`` starts a comment. Values are either
a bare string, or an array written as ``[n] v1 ... vn`` (vector) or
``[r x c] v11 v12 ...`` (matrix, row-major). Reals use Python's shortest
round-trip representation, so a dump followed by a load is exact.

Keys::

    format                       stentropy-gam 1
    meta.<name>                  free-form run metadata (config, fingerprint)
    class_levels                 space-separated level tokens
    smooth                       space-separated smooth names
    factor.<name>                number of levels
    smooth.<name>.degree         B-spline degree
    smooth.<name>.knots          full knot vector
    smooth.<name>.range          training covariate range [lo, hi]
    smooth.<name>.centering      sum-to-zero reparameterization matrix
    smooth.<name>.penalty_order  difference penalty order
    smooth.<name>.penalty_scale  penalty normalization constant
    n_models                     number of binary models
    model.<k>.positive           positive-class token
    model.<k>.reference          reference-class token or ``rest``
    model.<k>.lambdas            smoothing parameters (one per smooth)
    model.<k>.coefficients       coefficient vector
    model.<k>.coef_covariance    coefficient covariance matrix
    model.<k>.deviance, .edf, .gcv, .n_iter
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import FormatError
from .bspline import BSplineBasis
from .model import FactorTerm, FittedGam, ModelLayout, MultiClassGam, SmoothTerm

FORMAT = "stentropy-gam 1"


def _fmt_array(a):
    a = np.asarray(a, dtype=float)
    shape = f"[{a.shape[0]}]" if a.ndim == 1 else f"[{a.shape[0]}x{a.shape[1]}]"
    return " ".join([shape] + [repr(float(v)) for v in a.ravel()])


def _parse_array(text):
    head, _, body = text.partition("]")
    dims = [int(d) for d in head.lstrip("[").split("x")]
    vals = np.array([float(v) for v in body.split()], dtype=float)
    if vals.size != int(np.prod(dims)):
        raise FormatError(f"array {head}] has {vals.size} values", "gam.load_model")
    return vals.reshape(dims)


def _token(level):
    return str(getattr(level, "value", level))


def dumps_model(model: MultiClassGam, meta=None) -> str:
    layout = model.binary_models[0].layout
    lines = ["# stentropy binomial GAM", f"format = {FORMAT}"]
    for key, val in sorted((meta or {}).items()):
        lines.append(f"meta.{key} = {val}")
    lines.append("class_levels = " + " ".join(_token(v) for v in model.class_levels))
    lines.append("smooth = " + " ".join(t.name for t in layout.smooths))
    for f in layout.factors:
        lines.append(f"factor.{f.name} = {f.levels}")
    for t in layout.smooths:
        p = f"smooth.{t.name}"
        lines += [
            f"{p}.degree = {t.basis.degree}",
            f"{p}.knots = {_fmt_array(t.basis.knots)}",
            f"{p}.range = {_fmt_array(t.covariate_range)}",
            f"{p}.centering = {_fmt_array(t.centering)}",
            f"{p}.penalty_order = {t.penalty_order}",
            f"{p}.penalty_scale = {t.penalty_scale!r}",
        ]
    lines.append(f"n_models = {len(model.binary_models)}")
    for k, m in enumerate(model.binary_models):
        p = f"model.{k}"
        lines += [
            f"{p}.positive = {_token(m.positive)}",
            f"{p}.reference = {'rest' if m.reference is None else _token(m.reference)}",
            f"{p}.lambdas = {_fmt_array(m.lambdas)}",
            f"{p}.coefficients = {_fmt_array(m.coefficients)}",
            f"{p}.coef_covariance = {_fmt_array(m.coef_covariance)}",
            f"{p}.deviance = {m.deviance!r}",
            f"{p}.edf = {m.edf!r}",
            f"{p}.gcv = {m.gcv!r}",
            f"{p}.n_iter = {m.n_iter}",
        ]
    return "\n".join(lines) + "\n"


def loads_model(text, parse_level=None):
    """Inverse of :func:`dumps_model`; returns ``(model, meta)``.

    ``parse_level`` maps a level token back to a level object (identity by default).
    """
    parse_level = parse_level or (lambda s: s)
    kv = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise FormatError(f"line {lineno}: expected 'key = value'", "gam.load_model")
        kv[key.strip()] = val.strip()
    if kv.get("format") != FORMAT:
        raise FormatError(f"not a model file (format {kv.get('format')!r})", "gam.load_model")
    try:
        meta = {k[5:]: v for k, v in kv.items() if k.startswith("meta.")}
        levels = tuple(parse_level(t) for t in kv["class_levels"].split())
        smooths = []
        for name in kv["smooth"].split():
            p = f"smooth.{name}"
            basis = BSplineBasis(_parse_array(kv[f"{p}.knots"]), int(kv[f"{p}.degree"]))
            smooths.append(SmoothTerm(
                name, basis, _parse_array(kv[f"{p}.centering"]),
                int(kv[f"{p}.penalty_order"]), float(kv[f"{p}.penalty_scale"]),
            ))
        factors = [
            FactorTerm(k[len("factor."):], int(v)) for k, v in kv.items() if k.startswith("factor.")
        ]
        layout = ModelLayout(smooths, factors)
        models = []
        for k in range(int(kv["n_models"])):
            p = f"model.{k}"
            ref = kv[f"{p}.reference"]
            models.append(FittedGam(
                layout,
                _parse_array(kv[f"{p}.coefficients"]),
                _parse_array(kv[f"{p}.coef_covariance"]),
                tuple(_parse_array(kv[f"{p}.lambdas"]).tolist()),
                float(kv[f"{p}.deviance"]),
                float(kv[f"{p}.edf"]),
                float(kv[f"{p}.gcv"]),
                int(kv[f"{p}.n_iter"]),
                parse_level(kv[f"{p}.positive"]),
                None if ref == "rest" else parse_level(ref),
            ))
    except KeyError as exc:
        raise FormatError(f"model file lacks key {exc.args[0]!r}", "gam.load_model") from None
    return MultiClassGam(levels, tuple(models)), meta


def dump_model(model, path, meta=None):
    Path(path).write_text(dumps_model(model, meta), encoding="utf-8")


def load_model(path, parse_level=None):
    return loads_model(Path(path).read_text(encoding="utf-8"), parse_level)
