"""Finite metric measure spaces, their products, and radial maximal functions.

A :class:`MarginalSpace` is a point cloud with strictly positive quadrature
weights summing to one and a metric.  Its support is the whole point set.
The radial maximal function

    f(r) = min over centres x of  mu({y : d(x, y) < r})

uses OPEN balls, so on a grid it is a left-continuous step function: it is
constant on each interval ``(d_a, d_{a+1}]`` between consecutive distinct
pairwise distances, and vanishes on ``[0, d_0]`` with ``d_0 = 0``.
"""

from __future__ import annotations

import json
from itertools import product as _iproduct

import numpy as np

from .errors import SuproundError, ValidationError

METRICS = ("absolute-difference", "euclidean", "explicit")
WEIGHT_TOL = 1e-12
_TRIANGLE_FULL_LIMIT = 160
_TRIANGLE_SAMPLES = 200_000


class StepRadial:
    """Radial maximal function of a finite space, tabulated exactly.

    ``radii`` are the sorted distinct pairwise distances (starting at 0) and
    ``values[a]`` is the function value on ``(radii[a], radii[a + 1]]``.
    """

    def __init__(self, distances, weights):
        distances = np.asarray(distances, dtype=float)
        weights = np.asarray(weights, dtype=float)
        radii = np.unique(distances)
        values = np.ones_like(radii)
        for row in distances:
            order = np.argsort(row, kind="stable")
            cum_w = np.cumsum(weights[order])
            # closed-ball measure of this centre at every tabulated radius
            count = np.searchsorted(row[order], radii, side="right")
            np.minimum(values, cum_w[count - 1], out=values)
        self.radii = radii
        self.values = np.minimum(values, 1.0)
        self.breakpoints = radii

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        pos = np.searchsorted(self.radii, r, side="left")
        out = np.where(pos > 0, self.values[np.maximum(pos - 1, 0)], 0.0)
        return out if out.ndim else float(out)


class IntervalRadial:
    """Radial maximal function of normalised Lebesgue measure on an interval.

    The worst centre is an endpoint, giving ``min(r / length, 1)``.
    """

    breakpoints = None

    def __init__(self, length=1.0):
        if not length > 0:
            raise ValidationError(f"interval length must be positive, got {length}")
        self.length = float(length)

    def __call__(self, r):
        out = np.clip(np.asarray(r, dtype=float) / self.length, 0.0, 1.0)
        return out if out.ndim else float(out)


class MarginalSpace:
    """A finite metric measure space ``(X_j, d_j, mu_j)``.

    Parameters
    ----------
    points : array_like, shape (n,) or (n, dim)
        Coordinates; 1-d input is promoted to column vectors.
    weights : array_like, shape (n,)
        Strictly positive quadrature masses summing to one.
    metric : {"absolute-difference", "euclidean", "explicit"}
    distances : array_like, shape (n, n), optional
        Required for (and only used by) the explicit metric.
    """

    def __init__(self, points, weights, metric="absolute-difference", distances=None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValidationError("points must be a non-empty list of coordinate vectors")
        w = np.asarray(weights, dtype=float)
        n = pts.shape[0]
        if w.shape != (n,):
            raise ValidationError(f"weights has length {w.size}, expected {n}")
        _check_weights(w)
        if metric not in METRICS:
            raise ValidationError(f"metric must be one of {METRICS}, got {metric!r}")
        if metric == "absolute-difference":
            if pts.shape[1] != 1:
                raise ValidationError("absolute-difference metric needs 1-d points")
            dist = np.abs(pts[:, 0][:, None] - pts[:, 0][None, :])
        elif metric == "euclidean":
            dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1))
        else:
            if distances is None:
                raise ValidationError("explicit metric requires a distance matrix")
            dist = np.asarray(distances, dtype=float)
            if dist.size == n * n:
                dist = dist.reshape(n, n)
            if dist.shape != (n, n):
                raise ValidationError(f"distances must be {n}x{n}, got shape {dist.shape}")
            _check_metric(dist)
        for arr in (pts, w, dist):
            arr.setflags(write=False)
        self.points = pts
        self.weights = w
        self.metric = metric
        self.distances = dist
        self._radial = None

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def diameter(self):
        return float(self.distances.max())

    @property
    def radial(self):
        """Cached :class:`StepRadial` for this space."""
        if self._radial is None:
            self._radial = StepRadial(self.distances, self.weights)
        return self._radial

    def to_dict(self):
        out = {
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
            "metric": self.metric,
        }
        if self.metric == "explicit":
            out["distances"] = self.distances.ravel().tolist()
        return out

    def __repr__(self):
        return f"MarginalSpace(n={self.size}, metric={self.metric!r})"


class ProductSpace:
    """Ordered product of ``N >= 2`` factors with the l1 product distance."""

    def __init__(self, factors):
        factors = tuple(factors)
        if len(factors) < 2:
            raise ValidationError(f"a product needs at least 2 factors, got {len(factors)}")
        self.factors = factors

    @property
    def n_factors(self):
        return len(self.factors)

    @property
    def shape(self):
        return tuple(f.size for f in self.factors)

    @property
    def diameter(self):
        return sum(f.diameter for f in self.factors)

    def weight_tensor(self):
        """Cell weights ``prod_j w_j(i_j)`` as a dense array."""
        out = np.ones(self.shape)
        for j, f in enumerate(self.factors):
            out = out * _along(f.weights, j, self.n_factors)
        return out

    def __repr__(self):
        return f"ProductSpace(shape={self.shape})"


def radial_maximal(space, r):
    """Smallest open-ball mass of radius ``r`` over all centres of ``space``."""
    if np.any(np.asarray(r) < 0):
        raise ValidationError("radius must be non-negative")
    return space.radial(r)


def product_distance(X, a, b):
    """l1 combination of factor distances between multi-indices ``a`` and ``b``."""
    if len(a) != X.n_factors or len(b) != X.n_factors:
        raise IndexError(f"multi-indices must have {X.n_factors} entries")
    total = 0.0
    for f, i, k in zip(X.factors, a, b):
        if not (0 <= i < f.size and 0 <= k < f.size):
            raise IndexError(f"index ({i}, {k}) out of range for factor of size {f.size}")
        total += f.distances[i, k]
    return float(total)


def interval_grid(n, a=0.0, b=1.0, rule="trapezoid"):
    """Uniform grid on ``[a, b]`` with weights for normalised Lebesgue measure.

    ``rule="trapezoid"`` integrates piecewise-linear functions with nodes on
    the grid exactly; ``rule="uniform"`` uses equal weights ``1/n``.
    """
    if n < 2:
        raise ValidationError("an interval grid needs at least 2 points")
    pts = np.linspace(a, b, n)
    if rule == "trapezoid":
        w = np.full(n, 1.0 / (n - 1))
        w[[0, -1]] *= 0.5
    elif rule == "uniform":
        w = np.full(n, 1.0 / n)
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    return MarginalSpace(pts, w / w.sum())


def _along(vec, axis, ndim):
    shape = [1] * ndim
    shape[axis] = -1
    return np.asarray(vec).reshape(shape)


def _check_weights(w):
    bad = np.flatnonzero(~(w > 0))
    if bad.size:
        i = int(bad[0])
        raise ValidationError(f"weights[{i}] = {w[i]!r} is not strictly positive")
    total = float(np.sum(w))
    if abs(total - 1.0) > WEIGHT_TOL:
        raise ValidationError(f"weights sum to {total!r}, expected 1 within {WEIGHT_TOL}")


def _check_metric(d, rng=None):
    n = d.shape[0]
    tol = 1e-12 * max(1.0, float(np.abs(d).max()))
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        i, k = np.argwhere(~np.isfinite(d) | (d < 0))[0]
        raise ValidationError(f"distances[{i}][{k}] = {d[i, k]!r} is not a finite non-negative value")
    diag = np.flatnonzero(np.abs(np.diag(d)) > tol)
    if diag.size:
        i = int(diag[0])
        raise ValidationError(f"distances[{i}][{i}] = {d[i, i]!r} must be zero")
    asym = np.argwhere(np.abs(d - d.T) > tol)
    if asym.size:
        i, k = asym[0]
        raise ValidationError(f"distances[{i}][{k}] != distances[{k}][{i}]")
    if n <= _TRIANGLE_FULL_LIMIT:
        for i in range(n):
            # d[i, k] <= d[i, j] + d[j, k] for all j, k
            viol = d[i][None, :] > d[i][:, None] + d + tol
            if viol.any():
                j, k = np.argwhere(viol)[0]
                raise ValidationError(f"triangle inequality fails for points ({i}, {j}, {k})")
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        i, j, k = rng.integers(0, n, size=(3, _TRIANGLE_SAMPLES))
        viol = np.flatnonzero(d[i, k] > d[i, j] + d[j, k] + tol)
        if viol.size:
            t = viol[0]
            raise ValidationError(
                f"triangle inequality fails for points ({i[t]}, {j[t]}, {k[t]})"
            )


def space_from_dict(data):
    """Build and validate a :class:`MarginalSpace` from the file schema."""
    for key in ("points", "weights", "metric"):
        if key not in data:
            raise ValidationError(f"space file is missing field {key!r}")
    return MarginalSpace(
        data["points"], data["weights"], data["metric"], data.get("distances")
    )


def load_space(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SuproundError(f"{path}: {exc}") from exc
    try:
        return space_from_dict(data)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def save_space(space, path):
    with open(path, "w") as fh:
        json.dump(space.to_dict(), fh)


def iter_indices(shape):
    """Row-major iteration over multi-indices (used by brute-force oracles)."""
    return _iproduct(*(range(s) for s in shape))
