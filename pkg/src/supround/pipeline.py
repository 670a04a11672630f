"""Entropic multi-marginal solver followed by exact-marginal rounding.

The solver works with log-densities ``log P = -C / h + sum_j g_j(x_j)``
relative to the product weights and updates one potential ``g_j`` at a time
so that coordinate ``j`` matches its target.  Its iterates are strictly
positive but only approximately feasible; :func:`solve_and_round` closes the
gap with the exact-marginal corrector.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .continuity import SigmaProfile, empirical_modulus, marginal_constants
from .correction import ZERO_RESIDUAL, CorrectionReport, multi_marginal_correct, naive_correction
from .coupling import Coupling, MarginalDensity, all_marginals, sup_distance, tensor_marginals
from .errors import BoundViolation, GateError, SolverError, ValidationError
from .spaces import ProductSpace

log = logging.getLogger(__name__)

_LOG_TINY = math.log(np.finfo(float).tiny)


class ResidualHistory(list):
    """Per-sweep uniform residuals ``max_j ||pi_j P - rho_j||``.

    ``converged`` tells whether the tolerance was met; ``best`` is the sweep
    whose iterate was returned.
    """

    converged = False
    best = -1


def _log_weights(space, skip):
    n = space.n_factors
    total = 0.0
    for k, f in enumerate(space.factors):
        if k == skip:
            continue
        shape = [1] * n
        shape[k] = -1
        total = total + np.log(f.weights).reshape(shape)
    return total


def _targets(space, targets):
    if len(targets) != space.n_factors:
        raise ValidationError(f"expected {space.n_factors} target marginals, got {len(targets)}")
    out = []
    for j, (t, f) in enumerate(zip(targets, space.factors)):
        vals = t.values if isinstance(t, MarginalDensity) else np.asarray(t, dtype=float)
        if vals.shape != (f.size,):
            raise ValidationError(f"target {j} has {vals.size} values, factor has {f.size}")
        out.append(vals)
    return out


def entropic_mmot(cost, targets, h, max_iter=1000, tol=1e-9, space: ProductSpace | None = None):
    """Cyclic log-domain Sinkhorn for the entropic multi-marginal problem.

    Parameters
    ----------
    cost : Coupling or ndarray
        Cost tensor; a ``Coupling`` supplies its space.
    targets : list of MarginalDensity
    h : float
        Entropic regularisation, ``> 0``.
    max_iter : int
        Number of full sweeps allowed.
    tol : float
        Stop once the uniform marginal residual is ``<= tol``.

    Returns
    -------
    (Coupling, ResidualHistory)
        The best iterate seen (the last one when converged).
    """
    if isinstance(cost, Coupling):
        space = cost.space
        C = cost.values
    else:
        if space is None:
            space = ProductSpace([t.space for t in targets])
        C = np.asarray(cost, dtype=float)
    if C.shape != space.shape:
        raise ValidationError(f"cost tensor has shape {C.shape}, spaces give {space.shape}")
    if not np.all(np.isfinite(C)):
        idx = tuple(int(i) for i in np.argwhere(~np.isfinite(C))[0])
        raise ValidationError(f"cost value at index {idx} is not finite")
    if not h > 0:
        raise ValidationError(f"h must be positive, got {h!r}")
    rhos = _targets(space, targets)
    n = space.n_factors
    with np.errstate(divide="ignore"):
        log_rho = [np.log(r) for r in rhos]
    base = -C / h
    lw = [_log_weights(space, j) for j in range(n)]
    g = [np.zeros(f.size) for f in space.factors]
    history = ResidualHistory()
    best_values, best_res = None, math.inf

    def assemble():
        out = base
        for k in range(n):
            shape = [1] * n
            shape[k] = -1
            out = out + g[k].reshape(shape)
        return out

    for sweep in range(int(max_iter)):
        for j in range(n):
            logp = assemble()
            axes = tuple(k for k in range(n) if k != j)
            log_pi = logsumexp(logp + lw[j], axis=axes)
            if not np.all(np.isfinite(log_pi)):
                raise SolverError(f"sweep {sweep}: marginal {j} left the finite range at h={h!r}")
            with np.errstate(invalid="ignore"):
                g[j] = g[j] + np.where(np.isneginf(log_rho[j]), -np.inf, log_rho[j] - log_pi)
        logp = assemble()
        support = np.isfinite(logp)
        if support.any() and float(logp[support].min()) < _LOG_TINY:
            # log P scales like 1/h as the potentials settle
            stable = h * float(logp[support].min()) / _LOG_TINY
            raise SolverError(
                f"sweep {sweep}: Gibbs density underflows at h={h!r}; "
                f"smallest stable h observed is about {stable:.3g}"
            )
        values = np.exp(logp)
        marg = tensor_marginals(space, values)
        res = max(float(np.max(np.abs(m - r))) for m, r in zip(marg, rhos))
        history.append(res)
        if res < best_res:
            best_values, best_res, history.best = values, res, sweep
        if res <= tol:
            history.converged = True
            break
    if not history.converged:
        log.warning("entropic solver stopped at the cap with residual %g", best_res)
    # the last update fixes one marginal, hence the mass
    mass = math.fsum(tensor_marginals(space, best_values)[0] * space.factors[0].weights)
    return Coupling(space, best_values, normalized=abs(mass - 1.0) <= 1e-10), history


@dataclass
class RoundingResult:
    """Output of :func:`solve_and_round`."""

    coupling: Coupling
    solver_coupling: Coupling
    report: CorrectionReport
    bound: float
    deviation: float
    history: ResidualHistory
    naive_min: float
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        out = self.report.to_dict()
        out.update(
            certified_bound=self.bound,
            solver_deviation=self.deviation,
            solver_sweeps=len(self.history),
            solver_residual=self.history[self.history.best] if self.history else None,
            naive_min=self.naive_min,
        )
        out.update(self.extra)
        return out


def solve_and_round(cost, targets, h, delta, max_iter=5000, modulus=None, space=None):
    """Run :func:`entropic_mmot` to residual ``delta`` and round to exact marginals.

    The rounding uses ``eps = max_j sigma_j^{-1}(delta)`` computed from the
    solver output, so the certified damage is ``K * eps``.

    Raises
    ------
    GateError
        ``delta`` is too coarse for the solver output; ``details["required_delta"]``
        gives the threshold below which the gate opens.
    """
    if delta < 0:
        raise ValidationError(f"delta must be non-negative, got {delta!r}")
    tol = max(float(delta), ZERO_RESIDUAL / 2)
    Ps, hist = entropic_mmot(cost, targets, h, max_iter=max_iter, tol=tol, space=space)
    if not hist.converged:
        raise SolverError(
            f"solver reached residual {hist[hist.best]!r} > delta={delta!r} in {len(hist)} sweeps"
        )
    Ps = Coupling(Ps.space, Ps.values, normalized=True)
    rhos = _targets(Ps.space, targets)
    naive_min = float(naive_correction(Ps, rhos).min())
    residuals = [float(np.max(np.abs(m - r))) for m, r in zip(all_marginals(Ps), rhos)]
    if max(residuals) < ZERO_RESIDUAL:
        P2, report = multi_marginal_correct(Ps, targets)
        return RoundingResult(P2, Ps, report, 0.0, 0.0, hist, naive_min)
    if modulus is None:
        modulus = empirical_modulus(Ps)
    profiles = [SigmaProfile.for_coupling(Ps, j, modulus) for j in range(Ps.ndim)]
    eps = max(p.inverse(delta) for p in profiles)
    if max(residuals) >= delta:
        eps *= 1.01
    try:
        P2, report = multi_marginal_correct(Ps, targets, modulus=modulus, eps=eps)
    except GateError as exc:
        pis = all_marginals(Ps)
        kappa = min(marginal_constants(pi, f.weights, p).kappa
                    for pi, f, p in zip(pis, Ps.space.factors, profiles))
        required = min(float(p(kappa)) for p in profiles)
        raise GateError(
            f"delta={delta!r} is outside the gate of the solver output: {exc}; "
            f"rerun with delta below {required!r}",
            coordinate=exc.coordinate, required_delta=required, **exc.details,
        ) from exc
    bound = report.K * eps
    deviation = sup_distance(Ps, P2)
    if deviation > bound + 1e-8:
        raise BoundViolation(f"rounding moved the coupling by {deviation!r} > bound {bound!r}")
    extra = {"delta": delta, "solver_residuals": residuals}
    return RoundingResult(P2, Ps, report, bound, deviation, hist, naive_min, extra)


def quadratic_cost(space: ProductSpace):
    """Sum of squared pairwise coordinate gaps over all factor pairs."""
    n = space.n_factors
    xs = []
    for j, f in enumerate(space.factors):
        shape = [1] * n
        shape[j] = -1
        xs.append(f.points[:, 0].reshape(shape))
    out = np.zeros(space.shape)
    for a in range(n):
        for b in range(a + 1, n):
            out = out + (xs[a] - xs[b]) ** 2
    return out
