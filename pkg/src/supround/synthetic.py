"""Seeded random couplings and marginal perturbations for tests and demos."""

from __future__ import annotations

import math

import numpy as np

from .coupling import Coupling, MarginalDensity, all_marginals, tensor_mass
from .spaces import ProductSpace, interval_grid


def unit_cube(n_points, n_factors, rule="trapezoid"):
    """Product of identical uniform grids on ``[0, 1]``."""
    return ProductSpace([interval_grid(n_points, rule=rule) for _ in range(n_factors)])


def random_smooth_coupling(space: ProductSpace, rng, modes=3, amplitude=0.6, floor=0.1):
    """Strictly positive low-frequency coupling of mass 1.

    A sum of ``modes`` random products of cosines (frequencies 1..3) on the
    factor coordinates, shifted so that its minimum is ``floor``.
    """
    rng = np.random.default_rng(rng)
    field = np.zeros(space.shape)
    for _ in range(modes):
        term = rng.normal()
        for j, f in enumerate(space.factors):
            x = f.points[:, 0]
            span = max(float(x.max() - x.min()), 1e-300)
            freq = rng.integers(1, 4)
            phase = rng.uniform(0, 2 * np.pi)
            shape = [1] * space.n_factors
            shape[j] = -1
            term = term * np.cos(np.pi * freq * (x - x.min()) / span + phase).reshape(shape)
        field = field + term
    field = field / max(float(np.abs(field).max()), 1e-300)
    values = 1.0 + amplitude * field
    values = values - values.min() + floor
    values = values / tensor_mass(space, values)
    return Coupling(space, values)


def perturb_marginal(marginal, space_factor, amplitude, rng, smooth=True):
    """Mass-preserving perturbation of uniform size at most ``amplitude``.

    The size is exactly ``amplitude`` wherever ``marginal >= amplitude`` holds
    at the peak; elsewhere it is damped so the result stays non-negative.
    """
    rng = np.random.default_rng(rng)
    pi = np.asarray(marginal, dtype=float)
    w = space_factor.weights
    if amplitude == 0:
        return MarginalDensity(space_factor, pi, normalized=False)
    damp = np.minimum(1.0, pi / amplitude)
    if smooth:
        x = space_factor.points[:, 0]
        span = max(float(x.max() - x.min()), 1e-300)
        u = (x - x.min()) / span
        raw = sum(rng.normal() * np.cos(np.pi * k * u + rng.uniform(0, 2 * np.pi)) for k in (1, 2, 3))
    else:
        raw = rng.uniform(-1, 1, size=pi.size)
    centred = raw - math.fsum(damp * raw * w) / math.fsum(damp * w)
    peak = float(np.abs(centred).max())
    if peak == 0:
        return MarginalDensity(space_factor, pi, normalized=False)
    # |change| <= amplitude * damp <= pi, so no clipping is needed
    rho = pi + amplitude * damp * centred / peak
    return MarginalDensity(space_factor, rho, normalized=False)


def perturbed_targets(P: Coupling, amplitudes, rng, smooth=True):
    """Targets with ``||rho_j - pi_j P|| <= amplitudes[j]`` and the mass of ``P``."""
    rng = np.random.default_rng(rng)
    out = []
    for j, (pi, f) in enumerate(zip(all_marginals(P), P.space.factors)):
        rho = perturb_marginal(pi, f, amplitudes[j], rng, smooth=smooth)
        out.append(MarginalDensity(f, rho.values, normalized=P.normalized))
    return out
