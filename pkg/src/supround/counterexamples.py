"""Tent-function counterexamples: necessity of compact support and of
continuity, and sharpness of the threshold for Lipschitz couplings.

Every generator returns an :class:`ExampleResult` holding the coupling, an
adversarial first marginal, and a certificate.  Lower bounds are support
arguments: any admissible ``P'`` with ``pi_1 P' = rho`` vanishes on every
slice where ``rho`` is zero (all weights are positive), so
``||P - P'|| >= max of P over those slices`` for all such ``P'`` at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .continuity import LipschitzModulus, SigmaProfile
from .coupling import Coupling, MarginalDensity, all_marginals, tensor_mass
from .errors import InfeasibleExampleError, ValidationError
from .spaces import IntervalRadial, MarginalSpace, ProductSpace, interval_grid


@dataclass(frozen=True)
class TentParams:
    b: float
    h: float
    center: float = 0.0

    def __post_init__(self):
        if not (self.b > 0 and self.h > 0):
            raise ValidationError(f"tent needs b > 0 and h > 0, got b={self.b}, h={self.h}")


def tent_values(b, h, t):
    """Hat of half-base ``b`` and height ``h`` centred at 0."""
    t = np.asarray(t, dtype=float)
    out = h * np.clip(1.0 - np.abs(t) / b, 0.0, None)
    return float(out) if out.ndim == 0 else out


def tent(p: TentParams, t):
    return tent_values(p.b, p.h, np.asarray(t, dtype=float) - p.center)


@dataclass
class ExampleResult:
    coupling: Coupling
    marginal: MarginalDensity
    certificate: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(self.certificate.get("pass", False))


def forced_deviation(P: Coupling, rho, j=0):
    """``max P`` over the slices ``{x_j : rho(x_j) = 0}`` and its location.

    This lower-bounds ``||P - P'||`` for every non-negative ``P'`` whose
    ``j``-th marginal is ``rho``.
    """
    r = rho.values if isinstance(rho, MarginalDensity) else np.asarray(rho, dtype=float)
    zero = r == 0
    if not zero.any():
        return 0.0, None
    block = np.compress(zero, P.values, axis=j)
    flat = int(np.argmax(block))
    local = list(np.unravel_index(flat, block.shape))
    local[j] = int(np.flatnonzero(zero)[local[j]])
    return float(block.ravel()[flat]), tuple(int(i) for i in local)


def _grid(a, b, per_unit):
    n = int(round((b - a) * per_unit)) + 1
    return interval_grid(n, a, b)


def _coord(space: MarginalSpace):
    return space.points[:, 0]


def _reinsert(space, mass, center, half_base):
    """Tent with the given weighted mass, the re-normalisation bump."""
    shape = tent_values(half_base, 1.0, _coord(space) - center)
    return shape * (mass / math.fsum(shape * space.weights))


def _is_multiple(x, unit, tol=1e-9):
    q = x / unit
    return abs(q - round(q)) <= tol * max(1.0, abs(q))


def example_A(n: int, resolution: int | None = None) -> ExampleResult:
    """Truncated tent series ``c sum_k tent(x_1 - k) tent(x_2)``, ``k = 2..n``.

    ``x_1`` ranges over ``[0, n + 1]`` (normalised Lebesgue), ``x_2`` over
    ``[-1/2, 1/2]``; tent ``k`` has half-base ``1/k``.  ``resolution`` is the
    number of grid cells per unit length and must be a multiple of
    ``lcm(2, ..., n)`` so that every tent foot and peak is a grid point.
    """
    if n < 2:
        raise ValidationError(f"example A needs n >= 2, got {n}")
    minimal = math.lcm(*range(2, n + 1))
    resolution = minimal if resolution is None else int(resolution)
    if resolution < minimal or resolution % minimal:
        raise InfeasibleExampleError(
            f"resolution {resolution} cannot resolve the 1/{n} tents; "
            f"use a multiple of the minimal resolution {minimal}"
        )
    X1 = _grid(0.0, n + 1.0, resolution)
    X2 = _grid(-0.5, 0.5, resolution)
    space = ProductSpace([X1, X2])
    x1, x2 = _coord(X1), _coord(X2)
    terms = [np.outer(tent_values(1.0 / k, 1.0, x1 - k), tent_values(1.0 / k, 1.0, x2))
             for k in range(2, n + 1)]
    raw = sum(terms)
    c = 1.0 / tensor_mass(space, raw)
    P = Coupling(space, c * raw)
    pi1 = all_marginals(P)[0]
    strip = (x1 >= n - 1.0 / n - 1e-12) & (x1 <= n + 1.0 / n + 1e-12)
    removed = math.fsum(pi1[strip] * X1.weights[strip])
    # [0, 1] carries no tent for any n, so the bump never touches the strip
    rho = np.where(strip, 0.0, pi1) + _reinsert(X1, removed, 0.5, 0.5)
    rho = MarginalDensity(X1, rho)
    gap = float(np.max(np.abs(rho.values - pi1)))
    forced, where = forced_deviation(P, rho)
    ok_forced = abs(forced - c) <= 1e-12 * c
    ok_gap = gap <= (c / n) * (1 + 1e-12)
    cert = {
        "example": "A",
        "n": n,
        "resolution": resolution,
        "c": c,
        "strip": [n - 1.0 / n, n + 1.0 / n],
        "claimed_forced_deviation": c,
        "forced_deviation": forced,
        "forced_at": where,
        "marginal_gap": gap,
        "claimed_gap_bound": c / n,
        "pass": bool(ok_forced and ok_gap),
    }
    return ExampleResult(P, rho, cert)


def example_B(n: int, resolution: int | None = None) -> ExampleResult:
    """Truncated dyadic tent series on ``[0, 1]^2``.

    Terms ``k = 2..n+1`` of ``sum_k tent(x_1 - 3/2^k) tent(x_2 - 3/2^k)``
    with half-base ``1/2^k`` and height 1, so that the strip
    ``[1/2^n, 1/2^(n-1)]`` carries term ``n + 1``.  The coupling is left
    unnormalised (its mass is ``sum_k 4^-k``): rescaling would change the
    peak height that the certificate is about.  ``resolution`` (cells per
    unit) must be a power of two of at least ``2^(n+1)``.
    """
    if n < 2:
        raise ValidationError(f"example B needs n >= 2, got {n}")
    minimal = 2 ** (n + 1)
    resolution = minimal if resolution is None else int(resolution)
    if resolution < minimal or resolution & (resolution - 1):
        raise InfeasibleExampleError(
            f"resolution {resolution} is not a dyadic grid fine enough for term {n + 1}; "
            f"use a power of two >= {minimal}"
        )
    X = _grid(0.0, 1.0, resolution)
    space = ProductSpace([X, X])
    x = _coord(X)
    raw = sum(
        np.outer(tent_values(2.0**-k, 1.0, x - 3 * 2.0**-k), tent_values(2.0**-k, 1.0, x - 3 * 2.0**-k))
        for k in range(2, n + 2)
    )
    P = Coupling(space, raw, normalized=False)
    pi1 = all_marginals(P)[0]
    lo, hi = 2.0**-n, 2.0 ** -(n - 1)
    strip = (x >= lo - 1e-15) & (x <= hi + 1e-15)
    removed = math.fsum(pi1[strip] * X.weights[strip])
    rho = MarginalDensity(X, np.where(strip, 0.0, pi1) + _reinsert(X, removed, 0.75, 0.25),
                          normalized=False)
    gap = float(np.max(np.abs(rho.values - pi1)))
    forced, where = forced_deviation(P, rho)
    peaks = {}
    for k in range(2, n + 2):
        i = int(np.argmin(np.abs(x - 3 * 2.0**-k)))
        peaks[k] = float(pi1[i])
    ok_peaks = all(abs(v - 2.0**-k) <= 1e-12 for k, v in peaks.items())
    cert = {
        "example": "B",
        "n": n,
        "resolution": resolution,
        "strip": [lo, hi],
        "claimed_forced_deviation": 1.0,
        "forced_deviation": forced,
        "forced_at": where,
        "marginal_gap": gap,
        "claimed_gap_bound": 2.0**-n,
        "marginal_peaks": {str(k): v for k, v in peaks.items()},
        "pass": bool(forced == 1.0 and gap <= 2.0**-n and ok_peaks),
    }
    return ExampleResult(P, rho, cert)


def _lipschitz_l1(space: ProductSpace, values):
    """Lipschitz constant for the l1 product metric on a product of sorted 1-d grids.

    Along a monotone lattice path distances add up, so adjacent differences
    along each axis determine the constant over all pairs.
    """
    best = 0.0
    for j, f in enumerate(space.factors):
        step = np.diff(_coord(f))
        shape = [1] * space.n_factors
        shape[j] = -1
        ratio = np.abs(np.diff(values, axis=j)) / step.reshape(shape)
        if ratio.size:
            best = max(best, float(ratio.max()))
    return best


def filler_capacity(L_Q, N):
    """Largest integral of an ``L_Q``-Lipschitz (l1) function supported in ``[1/2, 1]^N``.

    The extremal function is ``L_Q * min_k (x_k - 1/2)``.
    """
    return L_Q * 0.5 ** (N + 1) / (N + 1)


def _c_resolution(b):
    for m in range(4, 4097, 4):
        if _is_multiple(b * m, 1.0) and m >= 40:
            return m
    raise InfeasibleExampleError(f"no grid up to 4096 cells per unit aligns with b={b!r}")


def example_C(eps: float, L: float, N: int = 2, filler_lipschitz: float | None = None,
              resolution: int | None = None) -> ExampleResult:
    """Tent product plus filler showing the threshold is sharp up to ``N^N``.

    ``P = prod_j tent(b, h; x_j - 1/4) + Q`` on ``[0, 1]^N`` with
    ``b = eps / L`` and ``h = eps^(1/N)``; ``Q`` is a scaled product of tents
    centred at ``3/4`` with half-base ``1/4``.  ``filler_lipschitz`` is the
    Lipschitz budget for ``Q`` (unbounded when ``None``).
    """
    if N < 2:
        raise ValidationError(f"example C needs N >= 2, got {N}")
    if not (L > 0 and 0 < eps < L / 4):
        raise ValidationError(f"example C needs 0 < eps < L/4, got eps={eps}, L={L}")
    b = eps / L
    h = eps ** (1.0 / N)
    m = _c_resolution(b) if resolution is None else int(resolution)
    if m % 4 or not _is_multiple(b * m, 1.0):
        raise InfeasibleExampleError(
            f"resolution {m} does not put 1/4 and 1/4 +- b on the grid (b={b!r})"
        )
    X = _grid(0.0, 1.0, m)
    space = ProductSpace([X] * N)
    x = _coord(X)
    bump = tent_values(b, h, x - 0.25)
    fill = tent_values(0.25, 1.0, x - 0.75)
    spike = np.ones(space.shape)
    filler = np.ones(space.shape)
    for j in range(N):
        shape = [1] * N
        shape[j] = -1
        spike = spike * bump.reshape(shape)
        filler = filler * fill.reshape(shape)
    spike_mass = tensor_mass(space, spike)
    scale = (1.0 - spike_mass) / tensor_mass(space, filler)
    Q = scale * filler
    lip_q = _lipschitz_l1(space, Q)
    needed = 1.0 - spike_mass
    if filler_lipschitz is not None:
        cap = filler_capacity(filler_lipschitz, N)
        if cap < needed:
            raise InfeasibleExampleError(
                f"no {filler_lipschitz}-Lipschitz filler on [1/2,1]^{N} reaches integral "
                f"{needed!r}; the maximal achievable integral is {cap!r}"
            )
        if lip_q > filler_lipschitz * (1 + 1e-9):
            raise InfeasibleExampleError(
                f"the tent filler needs Lipschitz constant {lip_q!r} > budget {filler_lipschitz}"
            )
    P = Coupling(space, spike + Q)
    pis = all_marginals(P)
    piQ = all_marginals(Coupling(space, Q, normalized=False))[0]
    rho = MarginalDensity(X, piQ + _reinsert(X, spike_mass, 0.75, 0.25))
    gap = float(np.max(np.abs(rho.values - pis[0])))
    sigma_closed = eps**N / (N**N * L ** (N - 1))
    sigma_numeric = float(SigmaProfile(LipschitzModulus(L), [IntervalRadial(1.0)] * (N - 1), N)(eps))
    ratio = gap / sigma_closed
    forced, where = forced_deviation(P, rho)
    lip_spike = _lipschitz_l1(space, spike)
    ok = (lip_spike <= L * (1 + 1e-9)
          and abs(ratio - N**N) <= 1e-9
          and abs(forced - eps) <= 1e-12)
    cert = {
        "example": "C",
        "eps": eps,
        "L": L,
        "N": N,
        "resolution": m,
        "b": b,
        "h": h,
        "tent_lipschitz": lip_spike,
        "filler_lipschitz": lip_q,
        "filler_budget": filler_lipschitz,
        "marginal_gap": gap,
        "claimed_gap": b ** (N - 1) * h**N,
        "sigma": sigma_closed,
        "sigma_numeric": sigma_numeric,
        "gap_over_sigma": ratio,
        "claimed_ratio": N**N,
        "claimed_forced_deviation": eps,
        "forced_deviation": forced,
        "forced_at": where,
        "pass": bool(ok),
    }
    return ExampleResult(P, rho, cert)
