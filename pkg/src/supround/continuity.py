"""Moduli of continuity, threshold functions sigma_j and their constants.

For coordinate ``j`` of an ``N``-factor coupling with modulus ``omega`` the
threshold is

    sigma_j(eps) = eps * sup_{0 < theta < 1} (1 - theta) * F(theta * eps),
    F(t) = prod_{k != j} f_k(omega^{-1}(t) / (N - 1)),

where ``f_k`` are the radial maximal functions of the other factors.  A
marginal value ``pi_j P(x_j) <= sigma_j(eps)`` forces every entry of the
slice through ``x_j`` to be at most ``eps``.

Two evaluation paths exist.  When ``F`` is a step function (a tabulated
modulus, or grid radial functions under an analytic modulus) it is constant
on pieces starting at ``a_p`` with value ``F_p`` and the supremum is exactly
``max_p (eps - a_p)^+ F_p``; its inverse is then closed-form.  Otherwise the
supremum is found by a dense theta scan refined with golden-section search,
and inverses by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .coupling import Coupling, all_marginals
from .errors import DegenerateProfileError, SigmaRangeError, ValidationError
from .spaces import IntervalRadial

MAX_PAIRS = 10**7
_BUCKET_RESOLUTION = 4096
_MAX_QUANTUM_BUCKETS = 1 << 16
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# -- moduli ----------------------------------------------------------------

@dataclass(frozen=True)
class LipschitzModulus:
    L: float
    kind = "lipschitz"

    def __post_init__(self):
        if not self.L > 0:
            raise ValidationError(f"Lipschitz constant must be positive, got {self.L}")

    def __call__(self, r):
        return _scalar(self.L * np.asarray(r, dtype=float))

    def inverse(self, t):
        return _scalar(np.asarray(t, dtype=float) / self.L)

    def to_dict(self):
        return {"kind": self.kind, "L": self.L}


@dataclass(frozen=True)
class HoelderModulus:
    C: float
    alpha: float
    kind = "hoelder"

    def __post_init__(self):
        if not self.C > 0:
            raise ValidationError(f"Hoelder constant must be positive, got {self.C}")
        if not 0 < self.alpha <= 1:
            raise ValidationError(f"Hoelder exponent must lie in (0, 1], got {self.alpha}")

    def __call__(self, r):
        return _scalar(self.C * np.asarray(r, dtype=float) ** self.alpha)

    def inverse(self, t):
        return _scalar((np.asarray(t, dtype=float) / self.C) ** (1.0 / self.alpha))

    def to_dict(self):
        return {"kind": self.kind, "C": self.C, "alpha": self.alpha}


class EmpiricalModulus:
    """Tabulated modulus ``(radii[i], values[i])`` with ``radii[0] = 0``.

    Evaluation is the conservative step envelope: ``omega(r)`` is the value
    at the smallest tabulated radius ``>= r`` (the last value beyond the
    table).  The inverse returns the largest tabulated radius whose value is
    ``<= t``, capped at ``diameter`` when one is given.
    """

    kind = "empirical"

    def __init__(self, radii, values, diameter=None, method="table"):
        radii = np.asarray(radii, dtype=float)
        values = np.asarray(values, dtype=float)
        if radii.ndim != 1 or radii.shape != values.shape or radii.size == 0:
            raise ValidationError("modulus table needs matching non-empty radius/value lists")
        if radii[0] != 0 or values[0] != 0:
            raise ValidationError("modulus table must start at (0, 0)")
        if np.any(np.diff(radii) <= 0):
            i = int(np.argmax(np.diff(radii) <= 0)) + 1
            raise ValidationError(f"modulus radii not strictly increasing at entry {i}")
        if np.any(np.diff(values) < 0):
            i = int(np.argmax(np.diff(values) < 0)) + 1
            raise ValidationError(f"modulus values decrease at entry {i}")
        self.radii = radii
        self.values = values
        self.diameter = diameter
        self.method = method

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        pos = np.minimum(np.searchsorted(self.radii, r, side="left"), self.radii.size - 1)
        return _scalar(self.values[pos])

    def inverse(self, t):
        t = np.asarray(t, dtype=float)
        pos = np.searchsorted(self.values, t, side="right") - 1
        out = self.radii[np.maximum(pos, 0)]
        if self.diameter is not None:
            out = np.minimum(out, self.diameter)
        return _scalar(out)

    def to_dict(self):
        return {"kind": self.kind, "radii": self.radii.tolist(), "values": self.values.tolist()}

    def __repr__(self):
        return f"EmpiricalModulus(entries={self.radii.size}, method={self.method!r})"


def modulus_eval(omega, r):
    if np.any(np.asarray(r) < 0):
        raise ValidationError("modulus argument must be non-negative")
    return omega(r)


def modulus_inverse(omega, t):
    """Generalised inverse ``sup{r >= 0 : omega(r) <= t}``."""
    if np.any(np.asarray(t) < 0):
        raise ValidationError("modulus inverse argument must be non-negative")
    return omega.inverse(t)


def modulus_from_config(config, P: Coupling | None = None, max_pairs=MAX_PAIRS):
    """Build a modulus from ``{"kind": ...}``; ``empirical`` needs ``P``."""
    kind = config.get("kind")
    if kind == "lipschitz":
        return LipschitzModulus(float(config["L"]))
    if kind == "hoelder":
        return HoelderModulus(float(config["C"]), float(config["alpha"]))
    if kind == "empirical":
        if P is None:
            raise ValidationError("an empirical modulus needs a coupling")
        return empirical_modulus(P, max_pairs=max_pairs)
    raise ValidationError(f"unknown modulus kind {kind!r}")


def _quantize(space):
    """Per-factor integer distance tables and the bucket width they use.

    Distances are mapped to buckets no larger than their true value (up to a
    1e-9 relative slack when an exact common quantum exists), which keeps the
    tabulated modulus an over-estimate.
    """
    dists = [f.distances for f in space.factors]
    positive = np.concatenate([d[d > 0] for d in dists])
    if positive.size == 0:
        return 1.0, [np.zeros(d.shape, dtype=np.int64) for d in dists]
    quantum = float(positive.min())
    ratios = [d / quantum for d in dists]
    exact = all(np.all(np.abs(r - np.rint(r)) <= 1e-9 * np.maximum(1.0, r)) for r in ratios)
    if exact and sum(float(r.max()) for r in ratios) < _MAX_QUANTUM_BUCKETS:
        return quantum, [np.rint(r).astype(np.int64) for r in ratios]
    quantum = space.diameter / _BUCKET_RESOLUTION
    return quantum, [np.floor(d / quantum).astype(np.int64) for d in dists]


def empirical_modulus(P: Coupling, max_pairs=MAX_PAIRS) -> EmpiricalModulus:
    """Modulus of continuity of ``P`` over its grid, tabulated by distance.

    Up to ``max_pairs`` cell pairs, every pair is scanned.  Beyond that the
    modulus is bounded through axis-aligned paths: moving one coordinate at
    a time, ``|P(x) - P(y)| <= sum_k omega_k(d_k(x_k, y_k))`` where
    ``omega_k`` only compares cells differing in coordinate ``k``.  Both
    routes over-estimate the grid modulus, never under-estimate it.
    """
    space = P.space
    quantum, tables = _quantize(space)
    values = P.values
    cells = values.size
    if cells * (cells - 1) // 2 <= max_pairs:
        index = np.ascontiguousarray(np.indices(space.shape).reshape(P.ndim, -1).T, dtype=np.int64)
        sizes = np.asarray(space.shape, dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(sizes * sizes)[:-1]]).astype(np.int64)
        qtab = np.ascontiguousarray(np.concatenate([t.ravel() for t in tables]), dtype=np.int64)
        nbuckets = int(sum(int(t.max()) for t in tables)) + 1
        bucket_max = _kernels.pair_bucket_max(
            np.ascontiguousarray(values.ravel()), index, qtab, offsets, sizes, nbuckets
        )
        method = "all-pairs"
    else:
        bucket_max = None
        for k, table in enumerate(tables):
            slab = np.ascontiguousarray(np.moveaxis(values, k, 0).reshape(values.shape[k], -1))
            axis = _kernels.axis_bucket_max(
                slab, np.ascontiguousarray(table), int(table.max()) + 1
            )
            bucket_max = axis if bucket_max is None else _maxplus(bucket_max, axis)
        method = "axis-paths"
    filled = np.flatnonzero(bucket_max >= 0)
    return EmpiricalModulus(
        filled * quantum,
        np.maximum.accumulate(bucket_max[filled]),
        diameter=space.diameter,
        method=method,
    )


def _maxplus(a, b):
    """Max-plus convolution of bucket tables (-1 marks an empty bucket)."""
    out = np.full(a.size + b.size - 1, -1.0)
    ok = a >= 0
    for q in np.flatnonzero(b >= 0):
        seg = out[q:q + a.size]
        np.maximum(seg, np.where(ok, a + b[q], -1.0), out=seg)
    return out


# -- threshold profiles ----------------------------------------------------

class Constants(NamedTuple):
    c: float
    kappa: float
    K: float


class SigmaProfile:
    """Threshold function ``sigma_j`` for one coordinate.

    Parameters
    ----------
    modulus : LipschitzModulus, HoelderModulus or EmpiricalModulus
    radials : sequence of callables
        Radial maximal functions ``f_k`` of the ``N - 1`` other factors.
    n_factors : int
        ``N``; the radius passed to each ``f_k`` is ``omega^{-1}(t)/(N-1)``.
    coordinate : int, optional
        Zero-based ``j``, carried for reporting.
    """

    def __init__(self, modulus, radials, n_factors, coordinate=None, n_scan=512, rtol=1e-8):
        if n_factors < 2:
            raise ValidationError("a threshold profile needs N >= 2")
        if len(radials) != n_factors - 1:
            raise ValidationError(f"expected {n_factors - 1} radial functions, got {len(radials)}")
        self.modulus = modulus
        self.radials = list(radials)
        self.n_factors = int(n_factors)
        self.coordinate = coordinate
        self.n_scan = max(int(n_scan), 512)
        self.rtol = rtol
        self._pieces = self._step_pieces()

    @classmethod
    def for_coupling(cls, P: Coupling, j: int, modulus=None, radial="grid", max_pairs=MAX_PAIRS):
        """Profile for coordinate ``j`` of ``P``.

        ``radial="grid"`` uses each factor's exact step radial function;
        ``radial="interval"`` treats each factor as Lebesgue measure on the
        interval spanned by its points.
        """
        if modulus is None:
            modulus = empirical_modulus(P, max_pairs=max_pairs)
        others = [f for k, f in enumerate(P.space.factors) if k != j]
        if radial == "grid":
            radials = [f.radial for f in others]
        elif radial == "interval":
            radials = [IntervalRadial(f.diameter) for f in others]
        else:
            raise ValueError(f"unknown radial mode {radial!r}")
        return cls(modulus, radials, P.ndim, coordinate=j)

    @property
    def exact(self):
        """Whether evaluation uses the closed-form step decomposition."""
        return self._pieces is not None

    @property
    def degenerate(self):
        if self._pieces is not None:
            return not np.any(self._pieces[1] > 0)
        return False

    def product(self, t):
        """``F(t)``, the product of radial functions at ``omega^{-1}(t)/(N-1)``."""
        radius = np.asarray(self.modulus.inverse(t), dtype=float) / (self.n_factors - 1)
        out = np.ones_like(radius)
        for f in self.radials:
            out = out * f(radius)
        return out

    def _step_pieces(self):
        if isinstance(self.modulus, EmpiricalModulus):
            starts = np.unique(self.modulus.values)
            heights = self.product(starts)
        elif all(getattr(f, "breakpoints", None) is not None for f in self.radials):
            bps = np.concatenate([[0.0]] + [f.breakpoints for f in self.radials])
            starts = np.unique(np.asarray(self.modulus(bps * (self.n_factors - 1)), dtype=float))
            right = np.append(starts[1:], 2.0 * starts[-1] + 1.0)
            heights = self.product(0.5 * (starts + right))
        else:
            return None
        # keep the upper staircase: a piece matters only if it beats all earlier ones
        best = np.maximum.accumulate(heights)
        keep = np.ones(heights.size, dtype=bool)
        keep[1:] = heights[1:] > best[:-1]
        keep &= heights > 0
        return starts[keep], heights[keep]

    def __call__(self, eps):
        eps = np.asarray(eps, dtype=float)
        if self._pieces is not None:
            starts, heights = self._pieces
            if starts.size == 0:
                return _scalar(np.zeros_like(eps))
            gain = np.clip(eps[..., None] - starts, 0.0, None) * heights
            return _scalar(gain.max(axis=-1))
        flat = np.array([self._scan(e)[0] for e in eps.ravel()])
        return _scalar(flat.reshape(eps.shape))

    def theta_star(self, eps):
        """Maximising ``theta`` (the limiting one when the sup is not attained)."""
        eps = float(eps)
        if self._pieces is not None:
            starts, heights = self._pieces
            if starts.size == 0:
                return float("nan")
            gain = np.clip(eps - starts, 0.0, None) * heights
            return float(starts[int(np.argmax(gain))] / eps)
        return self._scan(eps)[1]

    def _objective(self, theta, eps):
        return (1.0 - theta) * self.product(theta * eps)

    def _scan(self, eps):
        if not eps > 0:
            return 0.0, float("nan")
        lin = np.linspace(0.0, 1.0, self.n_scan + 2)[1:-1]
        grid = np.unique(np.concatenate([np.logspace(-12, np.log10(lin[0]), 32), lin]))
        vals = self._objective(grid, eps)
        i = int(np.argmax(vals))
        best, arg = float(vals[i]), float(grid[i])
        if best <= 0:
            return 0.0, float("nan")
        lo = grid[i - 1] if i > 0 else 0.0
        hi = grid[i + 1] if i + 1 < grid.size else 1.0
        g_arg, g_val = _golden_max(lambda th: float(self._objective(th, eps)), lo, hi, self.rtol)
        if g_val > best:
            best, arg = g_val, g_arg
        return eps * best, arg

    def inverse(self, s):
        """Smallest ``eps`` with ``sigma(eps) >= s`` (``0`` for ``s = 0``)."""
        s = float(s)
        if s < 0:
            raise ValidationError("sigma inverse needs a non-negative argument")
        if s == 0:
            return 0.0
        if self._pieces is not None:
            starts, heights = self._pieces
            if starts.size == 0:
                raise DegenerateProfileError(
                    "threshold profile vanishes identically", coordinate=self.coordinate
                )
            return float(np.min(starts + s / heights))
        return self._bisect(s)

    def _bisect(self, s, tol=1e-10):
        lo, hi = 0.0, 1.0
        for _ in range(200):
            if float(self(hi)) >= s:
                break
            lo, hi = hi, 2.0 * hi
        else:
            raise SigmaRangeError(
                f"sigma stays below {s!r} on the bracket [0, {hi!r}]",
                coordinate=self.coordinate, bracket=(0.0, hi),
            )
        for _ in range(200):
            if hi - lo <= tol:
                break
            mid = 0.5 * (lo + hi)
            if float(self(mid)) >= s:
                hi = mid
            else:
                lo = mid
        return hi

    def table(self, eps_values):
        """Rows ``(eps, sigma(eps))`` for reporting."""
        eps_values = np.asarray(eps_values, dtype=float)
        return np.column_stack([eps_values, np.atleast_1d(self(eps_values))])


def _golden_max(fn, lo, hi, rtol):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > rtol * max(abs(c), 1e-12):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)


def sigma_eval(profile: SigmaProfile, eps: float) -> float:
    """``sigma_j(eps)``; raises when the threshold vanishes at ``eps``."""
    if not eps > 0:
        raise ValidationError(f"sigma is defined for eps > 0, got {eps!r}")
    value = float(profile(eps))
    if value <= 0:
        raise DegenerateProfileError(
            f"sigma vanishes at eps={eps!r}: the modulus leaves no ball of positive mass",
            coordinate=profile.coordinate, eps=eps,
        )
    return value


def sigma_inverse(profile: SigmaProfile, s: float) -> float:
    return profile.inverse(s)


def constants(P: Coupling, j: int, profile: SigmaProfile, marginal=None) -> Constants:
    """``(c_j, kappa_j, K_j)`` for coordinate ``j``.

    ``c_j`` is half the mass of ``{pi_j P > 0}``; ``kappa_j`` is the
    supremum of ``eps`` with ``mu_j({pi_j P > sigma_j(eps)}) >= c_j``;
    ``K_j = 1 + 2 / c_j``.
    """
    pi = all_marginals(P)[j] if marginal is None else np.asarray(marginal, dtype=float)
    return marginal_constants(pi, P.space.factors[j].weights, profile)


def marginal_constants(pi, weights, profile: SigmaProfile) -> Constants:
    pi = np.asarray(pi, dtype=float)
    support = math.fsum(weights[pi > 0])
    if support <= 0:
        raise ValidationError(
            f"marginal {profile.coordinate} vanishes identically; a coupling of mass 1 cannot"
        )
    c = 0.5 * support
    order = np.argsort(-pi, kind="stable")
    cum = np.cumsum(weights[order])
    k = min(int(np.searchsorted(cum, c, side="left")), pi.size - 1)
    # the level set {pi > tau} keeps mass >= c exactly when tau < threshold
    threshold = float(pi[order][k])
    kappa = profile.inverse(threshold)
    return Constants(c, kappa, 1.0 + 2.0 / c)


def _scalar(arr):
    arr = np.asarray(arr)
    return float(arr) if arr.ndim == 0 else arr
