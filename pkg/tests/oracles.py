"""Independent checks shared by the unit and acceptance tests."""

import numpy as np

from conftest import brute_marginals


def lemma_slices(P, j, profile, eps):
    """Check every slice forced by the threshold.

    Returns ``(checked, violations)``: slices with ``pi_j P <= sigma_j(eps)``
    and those among them holding an entry above ``eps``.
    """
    weights = [f.weights for f in P.space.factors]
    pi = brute_marginals(P.values, weights)[j]
    s = float(profile(eps))
    checked = violations = 0
    for i in range(P.shape[j]):
        if pi[i] <= s:
            checked += 1
            if np.take(P.values, i, axis=j).max() > eps:
                violations += 1
    return checked, violations


def rough_coupling(space, rng):
    """Positive coupling with sharp dips, so some slices carry little mass."""
    vals = rng.uniform(size=space.shape) ** 4
    for j in range(len(space.shape)):
        shape = [1] * len(space.shape)
        shape[j] = -1
        vals = vals * rng.uniform(0.01, 1.0, space.shape[j]).reshape(shape) ** 3
    vals = vals + 1e-3
    return vals / np.sum(vals * space.weight_tensor())


def lemma_eps_values(P, profile, j, pi, k=5):
    """``k`` epsilons spread so that sigma crosses the smaller marginal values."""
    levels = np.quantile(pi, np.linspace(0.05, 0.6, k))
    return [profile.inverse(float(v)) * 1.0000001 for v in levels]
