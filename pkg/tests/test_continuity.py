import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from supround.continuity import (
    Constants,
    EmpiricalModulus,
    HoelderModulus,
    LipschitzModulus,
    SigmaProfile,
    constants,
    empirical_modulus,
    marginal_constants,
    modulus_eval,
    modulus_from_config,
    modulus_inverse,
    sigma_eval,
    sigma_inverse,
)
from supround.counterexamples import example_C
from supround.coupling import Coupling
from supround.errors import DegenerateProfileError, ValidationError
from supround.spaces import IntervalRadial, ProductSpace, iter_indices, product_distance
from supround.synthetic import random_smooth_coupling, unit_cube


def interval_profile(L, N):
    return SigmaProfile(LipschitzModulus(L), [IntervalRadial(1.0)] * (N - 1), N)


def true_modulus(P):
    """Pairs (distance, |P(x) - P(y)|) by enumeration."""
    cells = list(iter_indices(P.shape))
    out = []
    for a in range(len(cells)):
        for b in range(a + 1, len(cells)):
            d = product_distance(P.space, cells[a], cells[b])
            out.append((d, abs(P.values[cells[a]] - P.values[cells[b]])))
    return np.array(out)


class _NoBreaks:
    """Hide the breakpoints of a step radial to force the numeric path."""

    breakpoints = None

    def __init__(self, f):
        self.f = f

    def __call__(self, r):
        return self.f(r)


# -- moduli ----------------------------------------------------------------

def test_analytic_moduli():
    assert modulus_eval(LipschitzModulus(2.0), 0.5) == 1.0
    assert modulus_inverse(LipschitzModulus(2.0), 1.0) == 0.5
    for w in (LipschitzModulus(3.0), HoelderModulus(2.0, 0.5)):
        assert modulus_eval(w, 0.0) == 0.0
        assert modulus_inverse(w, 0.0) == 0.0
    h = HoelderModulus(2.0, 0.5)
    assert h(0.25) == pytest.approx(1.0)
    assert h.inverse(1.0) == pytest.approx(0.25)


def test_modulus_validation():
    with pytest.raises(ValidationError):
        LipschitzModulus(-1.0)
    with pytest.raises(ValidationError):
        HoelderModulus(1.0, 1.5)
    with pytest.raises(ValidationError):
        modulus_eval(LipschitzModulus(1.0), -0.1)
    with pytest.raises(ValidationError, match="start"):
        EmpiricalModulus([0.1, 0.2], [0.0, 0.1])
    with pytest.raises(ValidationError, match="decrease"):
        EmpiricalModulus([0, 0.1, 0.2], [0, 0.3, 0.2])
    with pytest.raises(ValidationError, match="kind"):
        modulus_from_config({"kind": "nope"})


def test_empirical_table_inverse():
    w = EmpiricalModulus([0.0, 0.1, 0.2], [0.0, 0.3, 0.7])
    assert modulus_inverse(w, 0.5) == 0.1
    assert w(0.05) == 0.3  # conservative step envelope
    assert w(0.0) == 0.0


def test_config_roundtrip():
    assert modulus_from_config({"kind": "lipschitz", "L": 2}) == LipschitzModulus(2.0)
    assert modulus_from_config({"kind": "hoelder", "C": 1, "alpha": 0.5}) == HoelderModulus(1.0, 0.5)
    P = random_smooth_coupling(unit_cube(4, 2), 0)
    assert modulus_from_config({"kind": "empirical"}, P).kind == "empirical"


@given(st.integers(2, 5), st.integers(0, 9999))
def test_empirical_modulus_equals_enumeration(n, seed):
    P = random_smooth_coupling(unit_cube(n, 2), seed)
    w = empirical_modulus(P)
    assert w.method == "all-pairs"
    pairs = true_modulus(P)
    for r in w.radii:
        want = pairs[pairs[:, 0] <= r + 1e-12, 1].max(initial=0.0)
        assert w(r) == pytest.approx(want, abs=1e-15)


@given(st.integers(2, 5), st.integers(2, 5), st.integers(0, 9999))
def test_empirical_modulus_brackets_enumeration(n, m, seed):
    # unequal spacings have no common quantum: distances are floored to buckets
    rng = np.random.default_rng(seed)
    X = ProductSpace([unit_cube(n, 2).factors[0], unit_cube(m, 2).factors[0]])
    P = Coupling(X, rng.exponential(size=X.shape), normalized=False)
    w = empirical_modulus(P)
    pairs = true_modulus(P)
    for d, diff in pairs:
        assert diff <= w(d) + 1e-15
    q = X.diameter / 4096
    for r in w.radii:
        assert w(r) <= pairs[pairs[:, 0] <= r + q + 1e-12, 1].max(initial=0.0) + 1e-15


@given(st.integers(2, 4), st.integers(0, 9999))
def test_axis_path_modulus_dominates_pairs(n, seed):
    rng = np.random.default_rng(seed)
    X = unit_cube(n, 3)
    P = Coupling(X, rng.exponential(size=X.shape), normalized=False)
    w = empirical_modulus(P, max_pairs=0)
    assert w.method == "axis-paths"
    for d, diff in true_modulus(P):
        assert diff <= w(d) + 1e-15


def test_empirical_modulus_of_tent_product_is_lipschitz():
    P = example_C(0.1, 1.0, 2, resolution=80).coupling
    x = P.space.factors[0].points[:, 0]
    mask = (x <= 0.5)[:, None] & (x <= 0.5)[None, :]
    spike = np.where(mask, P.values, 0.0)
    w = empirical_modulus(Coupling(P.space, spike, normalized=False))
    assert np.all(w.values <= 1.0 * w.radii * (1 + 1e-9) + 1e-15)


def test_constant_coupling_modulus_vanishes():
    P = Coupling(unit_cube(6, 2), np.ones((6, 6)))
    w = empirical_modulus(P)
    assert np.all(w.values == 0)
    assert w.inverse(0.0) == pytest.approx(P.space.diameter)


# -- sigma -------------------------------------------------------------------

@pytest.mark.parametrize("N", [2, 3])
@pytest.mark.parametrize("L", [0.5, 1.0, 4.0])
def test_sigma_closed_form(N, L):
    prof = interval_profile(L, N)
    for eps in np.geomspace(1e-3, L, 7):
        want = eps**N / (N**N * L ** (N - 1))
        assert sigma_eval(prof, eps) == pytest.approx(want, rel=1e-6)


def test_sigma_optimal_theta_is_half_for_two_factors():
    assert interval_profile(1.0, 2).theta_star(0.3) == pytest.approx(0.5, abs=1e-5)


def test_sigma_over_eps_vanishes_at_zero():
    prof = interval_profile(1.0, 2)
    ratios = [sigma_eval(prof, e) / e for e in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(a > b for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] < 1e-4


@pytest.mark.parametrize("eps", [0.01, 0.1, 0.5])
def test_sigma_inverse_roundtrip(eps):
    prof = interval_profile(1.0, 2)
    assert sigma_inverse(prof, sigma_eval(prof, eps)) == pytest.approx(eps, abs=1e-8)


def test_sigma_inverse_examples():
    prof = interval_profile(1.0, 2)
    assert sigma_inverse(prof, 0.0025) == pytest.approx(0.1, abs=1e-9)
    assert sigma_inverse(prof, 0.0) == 0.0


def test_sigma_rejects_nonpositive_eps():
    with pytest.raises(ValidationError):
        sigma_eval(interval_profile(1.0, 2), 0.0)


def test_degenerate_profile_raises():
    P = random_smooth_coupling(unit_cube(8, 2), 0)
    prof = SigmaProfile.for_coupling(P, 0)
    tiny = float(prof._pieces[0][0]) * 0.5  # below the first jump of the modulus
    with pytest.raises(DegenerateProfileError):
        sigma_eval(prof, tiny)
    assert prof(tiny) == 0.0


@given(st.integers(0, 500), st.floats(0.01, 3.0), st.floats(0.01, 3.0))
def test_sigma_monotone_and_star_shaped(seed, e1, e2):
    assume(abs(e1 - e2) > 1e-9)
    lo, hi = sorted((e1, e2))
    P = random_smooth_coupling(unit_cube(6, 2), seed)
    prof = SigmaProfile.for_coupling(P, seed % 2)
    s_lo, s_hi = prof(lo), prof(hi)
    assert s_lo <= s_hi
    # sigma(eps)/eps is non-decreasing
    assert s_lo / lo <= s_hi / hi + 1e-15


@given(st.integers(0, 500), st.floats(1e-3, 2.0))
def test_numeric_path_matches_step_path(seed, eps):
    P = random_smooth_coupling(unit_cube(7, 3), seed)
    exact = SigmaProfile.for_coupling(P, 0, LipschitzModulus(5.0))
    assert exact.exact
    numeric = SigmaProfile(LipschitzModulus(5.0), [_NoBreaks(f) for f in exact.radials], 3)
    assert not numeric.exact
    a, b = float(exact(eps)), float(numeric(eps))
    assert b <= a * (1 + 1e-12)
    assert b == pytest.approx(a, rel=1e-6)


def test_step_inverse_is_exact(rng):
    P = random_smooth_coupling(unit_cube(9, 2), 4)
    prof = SigmaProfile.for_coupling(P, 1)
    for s in rng.uniform(1e-4, 0.2, 20):
        e = prof.inverse(s)
        assert prof(e) >= s * (1 - 1e-12)
        assert prof(e * (1 - 1e-9)) < s


# -- constants -------------------------------------------------------------

def test_constants_full_support():
    P = random_smooth_coupling(unit_cube(8, 2), 2)
    c = constants(P, 0, SigmaProfile.for_coupling(P, 0))
    assert (c.c, c.K) == (0.5, 5.0)


def test_constants_half_support():
    X = unit_cube(9, 2)
    w = X.factors[0].weights
    pi = np.where(np.arange(9) < 4, 1.0, 0.0)
    pi[4] = 0.0
    mass = float(np.sum(w[pi > 0]))
    prof = interval_profile(1.0, 2)
    c = marginal_constants(pi, w, prof)
    assert c.c == pytest.approx(mass / 2)
    pi2 = np.r_[np.ones(5), np.zeros(4)]
    w2 = np.r_[np.full(5, 0.1), np.full(4, 0.125)]
    c2 = marginal_constants(pi2, w2, prof)
    assert (c2.c, c2.K) == (0.25, 9.0)


def test_constant_coupling_kappa_is_one():
    X = unit_cube(64, 2)
    P = Coupling(X, np.ones(X.shape))
    prof = SigmaProfile.for_coupling(P, 0)
    assert float(prof(0.3)) == pytest.approx(0.3, rel=1e-12)
    c = constants(P, 0, prof)
    assert isinstance(c, Constants)
    assert c.kappa == pytest.approx(1.0, rel=1e-12)
    assert c.K == 5.0


def test_kappa_is_the_gate_threshold():
    P = random_smooth_coupling(unit_cube(10, 2), 7)
    prof = SigmaProfile.for_coupling(P, 0)
    c = constants(P, 0, prof)
    pi = np.sum(P.values * P.space.factors[1].weights[None, :], axis=1)
    w = P.space.factors[0].weights

    def level_mass(eps):
        return float(np.sum(w[pi > prof(eps)]))

    assert level_mass(c.kappa * (1 - 1e-9)) >= c.c
    assert level_mass(c.kappa * (1 + 1e-6)) < c.c or math.isclose(c.kappa, 0)
