"""Binomial P-spline GAMs fitted by penalized IRLS.

The linear predictor is an intercept, one centered cubic B-spline smooth per
continuous covariate and treatment-coded dummies per factor. Each smooth is
penalized by the squared second divided differences of its coefficients, so very
large smoothing parameters shrink it to a straight line.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr, solve_triangular
from scipy.linalg.lapack import dgeqrf as _geqrf
from scipy.special import expit
from scipy.stats import norm

from ..errors import ConvergenceError, DataError, NumericalError
from .bspline import BSplineBasis

logger = logging.getLogger(__name__)

# |eta| beyond this on every row is treated as perfect separation
SEPARATION_ETA = 15.0
# prediction-time cap on |eta| keeps probabilities strictly inside (0, 1)
ETA_CAP = 30.0


@dataclass(frozen=True)
class GamSpec:
    """Model structure: which covariates enter as smooths and which as factors."""

    smooth: tuple = ("entropy", "max_distance")
    factors: tuple = (("day_of_week", 7),)
    basis_dim: int = 10
    degree: int = 3
    penalty_order: int = 2
    link: str = "logit"
    family: str = "binomial"


@dataclass(frozen=True)
class FitControl:
    lambda_grid: tuple = tuple(10.0 ** np.linspace(-3, 3, 13))
    max_iter: int = 100
    tol: float = 1e-8
    sweeps: int = 2
    ridge: float = 1e-8


@dataclass
class SmoothTerm:
    """One centered, penalized B-spline smooth.

    ``centering`` maps the ``basis_dim - 1`` free coefficients onto the full
    basis so that the smooth sums to zero over the training data.
    ``penalty_scale`` puts the difference penalty on the same footing as the
    data cross-product, making ``lambda`` a relative weight.
    """

    name: str
    basis: BSplineBasis
    centering: np.ndarray
    penalty_order: int = 2
    penalty_scale: float = 1.0

    @classmethod
    def from_data(cls, name, x, basis_dim=10, degree=3, penalty_order=2):
        basis = BSplineBasis.from_data(x, basis_dim, degree)
        B = basis.design(x)
        colsum = B.sum(axis=0)[:, None]
        q, _ = np.linalg.qr(colsum, mode="complete")
        Z = q[:, 1:]
        Xc = B @ Z
        P = basis.penalty_operator(penalty_order) @ Z
        S = P.T @ P
        s_norm = np.linalg.norm(S)
        scale = np.linalg.norm(Xc.T @ Xc) / s_norm if s_norm > 0 else 1.0
        return cls(name, basis, Z, penalty_order, float(scale))

    @property
    def n_coef(self):
        return self.centering.shape[1]

    @property
    def covariate_range(self):
        return self.basis.lower, self.basis.upper

    def design(self, x):
        return self.basis.design(x) @ self.centering

    def penalty_root(self):
        """``P`` with ``P.T @ P`` the scaled difference penalty."""
        D = self.basis.penalty_operator(self.penalty_order)
        return np.sqrt(self.penalty_scale) * (D @ self.centering)


@dataclass
class FactorTerm:
    """Categorical covariate with integer levels ``0..levels-1``; level 0 is the reference."""

    name: str
    levels: int

    @property
    def n_coef(self):
        return self.levels - 1

    def design(self, x):
        x = np.asarray(x).astype(np.int64)
        if x.size and (x.min() < 0 or x.max() >= self.levels):
            raise DataError(f"factor {self.name} value outside 0..{self.levels - 1}",
                            "gam.design")
        return (x[:, None] == np.arange(1, self.levels)[None, :]).astype(float)


@dataclass
class ModelLayout:
    """Column layout of the model matrix, frozen from the training data."""

    smooths: list
    factors: list = field(default_factory=list)

    @classmethod
    def from_data(cls, spec: GamSpec, data):
        smooths = [
            SmoothTerm.from_data(name, data[name], spec.basis_dim, spec.degree,
                                 spec.penalty_order)
            for name in spec.smooth
        ]
        factors = [FactorTerm(name, int(levels)) for name, levels in spec.factors]
        return cls(smooths, factors)

    @property
    def n_coef(self):
        return 1 + sum(t.n_coef for t in self.smooths) + sum(f.n_coef for f in self.factors)

    def term_slices(self):
        out, start = {}, 1
        for t in [*self.smooths, *self.factors]:
            out[t.name] = slice(start, start + t.n_coef)
            start += t.n_coef
        return out

    @property
    def unpenalized_dim(self):
        """Columns left free by the penalty: intercept, factors, each smooth's null space."""
        null = sum(min(t.penalty_order, t.basis.basis_dim) - 1 for t in self.smooths)
        return 1 + null + sum(f.n_coef for f in self.factors)

    def design(self, data):
        n = len(np.asarray(data[self.smooths[0].name if self.smooths else self.factors[0].name]))
        blocks = [np.ones((n, 1))]
        blocks += [t.design(data[t.name]) for t in self.smooths]
        blocks += [f.design(data[f.name]) for f in self.factors]
        return np.hstack(blocks)

    def penalty_root(self, lambdas):
        """Stacked square root ``E`` of ``S_lambda = sum_k lambda_k S_k``."""
        lambdas = np.broadcast_to(np.asarray(lambdas, dtype=float), (len(self.smooths),))
        slices = self.term_slices()
        rows = []
        for lam, t in zip(lambdas, self.smooths):
            P = t.penalty_root()
            block = np.zeros((P.shape[0], self.n_coef))
            block[:, slices[t.name]] = np.sqrt(lam) * P
            rows.append(block)
        if not rows:
            return np.zeros((0, self.n_coef))
        return np.vstack(rows)

    def penalty(self, lambdas):
        E = self.penalty_root(lambdas)
        return E.T @ E


def binomial_deviance(y, eta):
    """Deviance of 0/1 responses under the logit link."""
    sign = 1.0 - 2.0 * np.asarray(y, dtype=float)
    return 2.0 * float(np.sum(np.logaddexp(0.0, sign * eta)))


def penalized_deviance(beta, X, y, S):
    """``Dev(beta) + beta' S beta``."""
    return binomial_deviance(y, X @ beta) + float(beta @ S @ beta)


def penalized_deviance_grad(beta, X, y, S):
    mu = expit(X @ beta)
    return -2.0 * X.T @ (np.asarray(y, dtype=float) - mu) + 2.0 * S @ beta


@dataclass
class PirlsResult:
    coefficients: np.ndarray
    coef_covariance: np.ndarray
    deviance: float
    penalized_deviance: float
    edf: float
    gcv: float
    n_iter: int
    trace: list


def _weighted_qr(X, E, eta, y=None):
    """Pivoted QR of ``[sqrt(W) X; E]`` computed in two stages.

    The tall weighted design is first reduced to its triangular factor ``R1``
    (with the working response appended as an extra column so that its
    rotation comes for free); the small stack ``[R1; E]`` then gets a
    column-pivoted, rank-revealing QR. Returns ``(Q2, R, piv, rhs)`` where the
    first ``p`` rows of ``Q2`` carry the influence-matrix trace.
    """
    n, p = X.shape
    mu = expit(eta)
    w = np.maximum(mu * (1.0 - mu), 1e-12)
    sw = np.sqrt(w)
    k = p + (y is not None)
    tall = np.empty((n, k), order="F")
    np.multiply(sw[:, None], X, out=tall[:, :p])
    if y is not None:
        tall[:, p] = sw * (eta + (y - mu) / w)
    qr_raw, _, _, info = _geqrf(tall, overwrite_a=True)
    if info != 0:
        raise NumericalError(f"QR factorization failed (info={info})", "gam.pirls_fit")
    R1 = np.triu(qr_raw[:k])
    if R1.shape[0] < k:
        R1 = np.vstack([R1, np.zeros((k - R1.shape[0], k))])
    small = np.vstack([R1[:p, :p], E])
    Q2, R, piv = qr(small, mode="economic", pivoting=True, check_finite=False)
    rhs = None
    if y is not None:
        rhs = np.concatenate([R1[:p, p], np.zeros(E.shape[0])])
    return Q2, R, piv, rhs


def pirls(X, y, E, max_iter=100, tol=1e-8, start=None):
    """Minimize ``Dev(beta) + ||E beta||^2`` by penalized IRLS.

    Each step solves the weighted, penalized least-squares problem through a
    pivoted QR factorization of ``[sqrt(W) X; E]``. Steps that would raise the
    objective are halved, so the accepted objective values never increase.
    ``start`` optionally warm-starts the coefficients.
    """
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    S = E.T @ E
    beta = np.zeros(p) if start is None else np.array(start, dtype=float)
    eta = X @ beta
    obj = penalized_deviance(beta, X, y, S)
    trace = [obj]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        Q, R, piv, rhs = _weighted_qr(X, E, eta, y)
        step = np.empty(p)
        step[piv] = solve_triangular(R, Q.T @ rhs)
        new_obj = penalized_deviance(step, X, y, S)
        halvings = 0
        while not new_obj <= obj and halvings < 60:
            step = 0.5 * (beta + step)
            new_obj = penalized_deviance(step, X, y, S)
            halvings += 1
        if not new_obj <= obj:
            # no descent left at machine precision
            converged = True
            break
        delta = obj - new_obj
        beta, obj = step, new_obj
        eta = X @ beta
        trace.append(obj)
        if delta <= tol * (abs(obj) + 0.1):
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"P-IRLS did not converge in {max_iter} iterations", "gam.pirls_fit", trace
        )
    if np.all(np.abs(eta) > SEPARATION_ETA):
        warnings.warn("perfect separation: |eta| > 15 on every row", RuntimeWarning)

    Q, R, piv, _ = _weighted_qr(X, E, eta)
    Rinv = solve_triangular(R, np.eye(p))
    cov = np.empty((p, p))
    cov[np.ix_(piv, piv)] = Rinv @ Rinv.T
    edf = float(np.sum(Q[:p] ** 2))
    dev = binomial_deviance(y, eta)
    gcv = n * dev / (n - edf) ** 2 if n > edf else np.inf
    return PirlsResult(beta, cov, dev, obj, edf, gcv, it, trace)


def _as_data(rows):
    """Accept a covariate mapping, a CovariateRow or a list of them."""
    if isinstance(rows, dict):
        return {k: np.atleast_1d(np.asarray(v)) for k, v in rows.items()}
    from ..features import rows_to_covariates

    if not isinstance(rows, (list, tuple)):
        rows = [rows]
    return rows_to_covariates(rows)


@dataclass(frozen=True)
class FittedGam:
    """A fitted binary GAM: ``logit P(y = positive) = X beta``."""

    layout: ModelLayout
    coefficients: np.ndarray
    coef_covariance: np.ndarray
    lambdas: tuple
    deviance: float
    edf: float
    gcv: float
    n_iter: int = 0
    positive: object = 1
    reference: object = 0
    deviance_trace: tuple = ()

    def linear_predictor(self, data):
        return self.layout.design(_as_data(data)) @ self.coefficients

    def predict(self, data):
        """Probability of the positive class."""
        return expit(np.clip(self.linear_predictor(data), -ETA_CAP, ETA_CAP))

    def standard_error(self, data):
        """Standard error of the linear predictor."""
        X = self.layout.design(_as_data(data))
        var = np.einsum("ij,jk,ik->i", X, self.coef_covariance, X)
        return np.sqrt(np.maximum(var, 0.0))

    def smooth_values(self, name, x):
        """Contribution of smooth ``name`` at ``x`` (centered scale)."""
        term = next(t for t in self.layout.smooths if t.name == name)
        return term.design(x) @ self.coefficients[self.layout.term_slices()[name]]


def confidence_interval(model: FittedGam, rows, level=0.95):
    """Pointwise interval for the positive-class probability.

    Built on the logit scale from the coefficient covariance and mapped back,
    so the bounds always lie in (0, 1) and bracket the point estimate.
    """
    if not 0 < level < 1:
        raise DataError(f"level must be in (0, 1), got {level}", "gam.confidence_interval")
    eta = np.clip(model.linear_predictor(rows), -ETA_CAP, ETA_CAP)
    half = norm.ppf(0.5 + level / 2) * model.standard_error(rows)
    return expit(np.clip(eta - half, -ETA_CAP, ETA_CAP)), expit(np.clip(eta + half, -ETA_CAP, ETA_CAP))


def pirls_fit(layout: ModelLayout, X, y, lambdas, control=FitControl(), positive=1, reference=0,
              start=None):
    """Fit at fixed smoothing parameters."""
    y = np.asarray(y, dtype=float)
    if y.min() == y.max():
        raise DataError("response has a single class", "gam.pirls_fit")
    lambdas = tuple(float(v) for v in np.broadcast_to(lambdas, (len(layout.smooths),)))
    E = np.vstack([layout.penalty_root(lambdas), np.sqrt(control.ridge) * np.eye(layout.n_coef)])
    res = pirls(X, y, E, control.max_iter, control.tol, start)
    return FittedGam(
        layout, res.coefficients, res.coef_covariance, lambdas, res.deviance, res.edf,
        res.gcv, res.n_iter, positive, reference, tuple(res.trace),
    )


def gcv_select(layout: ModelLayout, X, y, grid=None, control=FitControl(), **kw):
    """Coordinate-wise grid search for the smoothing parameters minimizing GCV.

    Starts every term at the largest grid value; each sweep scans one term at
    a time with the others held fixed. Ties go to the larger (smoother) value.

    Returns
    -------
    tuple of (lambdas, FittedGam)
    """
    grid = sorted({float(g) for g in (control.lambda_grid if grid is None else grid)},
                  reverse=True)
    if not grid:
        raise DataError("empty smoothing parameter grid", "gam.gcv_select")
    k = len(layout.smooths)
    cache = {}

    def fit(lams):
        if lams not in cache:
            try:
                start = None if best is None else best.coefficients
                cache[lams] = pirls_fit(layout, X, y, lams, control, start=start, **kw)
            except ConvergenceError as exc:
                logger.debug("lambda %s failed: %s", lams, exc)
                cache[lams] = None
        return cache[lams]

    current = tuple([grid[0]] * k)
    best = None
    best = fit(current)
    for _ in range(control.sweeps if len(grid) > 1 else 0):
        for term in range(k):
            for cand in grid:
                lams = current[:term] + (cand,) + current[term + 1:]
                m = fit(lams)
                if m is None:
                    continue
                if best is None or m.gcv < best.gcv * (1 - 1e-12):
                    best, current = m, lams
    if best is None:
        raise ConvergenceError("every smoothing parameter candidate failed", "gam.gcv_select")
    return best.lambdas, best


def fit_gam(data, y, spec=GamSpec(), control=FitControl(), lambdas=None, positive=1,
            reference=0, layout=None):
    """Build the layout from ``data`` and fit, selecting lambdas by GCV unless given."""
    data = _as_data(data)
    layout = layout or ModelLayout.from_data(spec, data)
    X = layout.design(data)
    if lambdas is not None:
        return pirls_fit(layout, X, y, lambdas, control, positive, reference)
    return gcv_select(layout, X, y, control=control, positive=positive, reference=reference)[1]


@dataclass(frozen=True)
class MultiClassGam:
    """One-vs-rest collection of binary GAMs (a single model when K = 2)."""

    class_levels: tuple
    binary_models: tuple

    def predict_proba(self, rows):
        return predict_proba(self, rows)


def fit_multiclass(table, spec=GamSpec(), control=FitControl()) -> MultiClassGam:
    """Fit the per-class models for a feature table."""
    levels = tuple(table.class_levels)
    if len(levels) < 2:
        raise DataError("need at least two class levels", "gam.fit_multiclass")
    labels = table.label_index()
    for k, lvl in enumerate(levels):
        if not np.any(labels == k):
            raise DataError(f"class {getattr(lvl, 'label', lvl)} has no rows",
                            "gam.fit_multiclass")
    data = table.covariates()
    layout = ModelLayout.from_data(spec, data)
    X = layout.design(data)
    targets = [1] if len(levels) == 2 else range(len(levels))
    models = []
    for k in targets:
        y = (labels == k).astype(float)
        rest = levels[0] if len(levels) == 2 else None
        _, model = gcv_select(layout, X, y, control=control, positive=levels[k], reference=rest)
        models.append(model)
    return MultiClassGam(levels, tuple(models))


def predict_proba(model: MultiClassGam, rows):
    """Class probabilities, shape ``(n_rows, K)``; each row sums to one.

    Covariates outside the training range are clamped to it.
    """
    if len(model.class_levels) == 2:
        p = model.binary_models[0].predict(rows)
        return np.column_stack([1.0 - p, p])
    scores = np.column_stack([m.predict(rows) for m in model.binary_models])
    return scores / scores.sum(axis=1, keepdims=True)


__all__ = [
    "GamSpec",
    "FitControl",
    "SmoothTerm",
    "FactorTerm",
    "ModelLayout",
    "binomial_deviance",
    "penalized_deviance",
    "penalized_deviance_grad",
    "pirls",
    "pirls_fit",
    "gcv_select",
    "fit_gam",
    "FittedGam",
    "MultiClassGam",
    "fit_multiclass",
    "predict_proba",
    "confidence_interval",
]
