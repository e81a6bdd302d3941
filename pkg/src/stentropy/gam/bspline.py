"""Clamped B-spline bases and difference penalties."""
from __future__ import annotations

import numpy as np

from ..errors import DataError


class BSplineBasis:
    """B-spline basis on equally spaced knots with clamped boundaries.

    Parameters
    ----------
    knots : array_like
        Full knot vector, boundary knots repeated ``degree + 1`` times.
    degree : int
        Polynomial degree (3 for cubic).
    """

    def __init__(self, knots, degree=3):
        knots = np.asarray(knots, dtype=float)
        if knots.ndim != 1 or np.any(np.diff(knots) < 0):
            raise DataError("knots must be a nondecreasing vector", "gam.BSplineBasis")
        if knots.size < 2 * (degree + 1):
            raise DataError("too few knots for the degree", "gam.BSplineBasis")
        self.knots = knots
        self.degree = int(degree)

    @classmethod
    def from_data(cls, x, basis_dim=10, degree=3):
        """Basis spanning the observed range of ``x`` with ``basis_dim`` functions."""
        x = np.asarray(x, dtype=float)
        if np.unique(x).size < 2:
            raise DataError("need at least 2 distinct values to build a basis",
                            "gam.bspline_design")
        interior = basis_dim - degree - 1
        if interior < 0:
            raise DataError(f"basis_dim {basis_dim} too small for degree {degree}",
                            "gam.BSplineBasis")
        lo, hi = float(x.min()), float(x.max())
        inner = lo + (hi - lo) * np.arange(1, interior + 1) / (interior + 1)
        knots = np.concatenate([np.full(degree + 1, lo), inner, np.full(degree + 1, hi)])
        return cls(knots, degree)

    @property
    def lower(self):
        return float(self.knots[0])

    @property
    def upper(self):
        return float(self.knots[-1])

    @property
    def basis_dim(self):
        return self.knots.size - self.degree - 1

    @property
    def interior_knot_count(self):
        return self.basis_dim - self.degree - 1

    def greville(self):
        """Greville abscissae: the knot averages at which each coefficient acts."""
        p = self.degree
        if p == 0:
            return 0.5 * (self.knots[:-1] + self.knots[1:])
        windows = np.lib.stride_tricks.sliding_window_view(self.knots[1:-1], p)
        return windows.mean(axis=1)

    def penalty_operator(self, order=2):
        """Difference operator on the coefficients, spaced by the Greville abscissae.

        With clamped knots the coefficients are unevenly spaced near the
        boundaries, so plain differences would not vanish on straight lines.
        Dividing by the abscissa gaps makes the null space exactly the
        polynomials of degree ``< order`` in ``x``.
        """
        return difference_matrix(self.basis_dim, order, self.greville())

    def design(self, x):
        """Evaluate every basis function at ``x`` (clamped to the knot range).

        Returns an ``(len(x), basis_dim)`` array whose rows sum to one.
        """
        x = np.clip(np.asarray(x, dtype=float).ravel(), self.lower, self.upper)
        t, p = self.knots, self.degree
        nb = self.basis_dim
        # span index mu with t[mu] <= x < t[mu+1]; the right end joins the last span
        mu = np.clip(np.searchsorted(t, x, side="right") - 1, p, nb - 1)

        # Cox-de Boor triangle, vectorized over x
        vals = np.zeros((x.size, p + 1))
        vals[:, 0] = 1.0
        left = np.zeros((x.size, p + 1))
        right = np.zeros((x.size, p + 1))
        for j in range(1, p + 1):
            left[:, j] = x - t[mu + 1 - j]
            right[:, j] = t[mu + j] - x
            saved = np.zeros(x.size)
            for r in range(j):
                temp = vals[:, r] / (right[:, r + 1] + left[:, j - r])
                vals[:, r] = saved + right[:, r + 1] * temp
                saved = left[:, j - r] * temp
            vals[:, j] = saved

        out = np.zeros((x.size, nb))
        cols = mu[:, None] - p + np.arange(p + 1)[None, :]
        np.put_along_axis(out, cols, vals, axis=1)
        return out

    def __eq__(self, other):
        return (
            isinstance(other, BSplineBasis)
            and self.degree == other.degree
            and np.array_equal(self.knots, other.knots)
        )

    def __repr__(self):
        return f"BSplineBasis(degree={self.degree}, basis_dim={self.basis_dim}, " \
               f"range=[{self.lower:g}, {self.upper:g}])"


def bspline_design(basis: BSplineBasis, x):
    return basis.design(x)


def difference_matrix(size, order=2, positions=None):
    """``order``-th difference operator; shape ``(size - order, size)``.

    With ``positions`` the rows are divided differences over those points,
    rescaled by the mean spacing so that equal spacing gives plain differences.
    """
    if order >= size:
        return np.zeros((0, size))
    if positions is None:
        return np.diff(np.eye(size), n=order, axis=0)
    g = np.asarray(positions, dtype=float)
    h = (g[-1] - g[0]) / (size - 1)
    D = np.eye(size)
    for k in range(1, order + 1):
        D = (k * h / (g[k:] - g[:-k]))[:, None] * np.diff(D, axis=0)
    return D
