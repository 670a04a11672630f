"""Exact-marginal correction of a coupling with a uniform-norm guarantee.

One stage fixes coordinate ``j``: every slice ``{x_j = const}`` is scaled by
``max(0, pi_j P - sigma) / pi_j P`` (the *shrink*), which removes the mass

    m = integral of min(pi_j P, sigma) d mu_j,

and the removed mass is put back as

    (rho_j(x_j) - pi_j P_eps(x_j)) / m  *  integral (P - P_eps) d mu_j,

a product of a non-negative function of ``x_j`` and a function of the other
coordinates.  The result has marginal ``rho_j`` in coordinate ``j``, keeps
all other marginals, and stays within ``(1 + 2/c_j) eps`` of ``P``.  The
multi-marginal sweep applies one stage per coordinate.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .continuity import (
    MAX_PAIRS,
    Constants,
    SigmaProfile,
    empirical_modulus,
    marginal_constants,
    sigma_eval,
)
from .coupling import (
    NEG_TOL,
    Coupling,
    MarginalDensity,
    all_marginals,
    outer_product,
    sup_distance,
    tensor_marginals,
)
from .errors import BoundViolation, GateError, SuproundError, ValidationError

log = logging.getLogger(__name__)

SCHEDULE_INFLATION = 1.01
ZERO_RESIDUAL = 1e-13
STAGE_MARGINAL_TOL = 1e-11
STAGE_BOUND_SLACK = 1e-9
TOTAL_BOUND_SLACK = 1e-8


@dataclass
class StageRecord:
    coordinate: int
    epsilon: float
    sigma: float
    residual_before: float
    mass_deficit: float = float("nan")
    c: float = float("nan")
    kappa: float = float("nan")
    K: float = float("nan")
    shrink_deviation: float = 0.0
    deviation: float = 0.0
    min_before_clamp: float = float("nan")
    target_residual: float = 0.0
    other_residual: float = 0.0
    original_gate_ok: bool | None = None
    skipped: bool = False


@dataclass
class CorrectionReport:
    stages: list = field(default_factory=list)
    epsilon: float = 0.0
    kappa: float = float("inf")
    K: float = 0.0
    deviation: float = 0.0
    bound: float = 0.0
    max_residual: float = 0.0
    mass: float = float("nan")
    order: list = field(default_factory=list)
    fast_path: bool = False
    reverse_deviation: float | None = None
    reverse_error: str | None = None

    def to_dict(self):
        out = asdict(self)
        out["stages"] = [asdict(s) for s in self.stages]
        return out

    def to_json(self, **kwargs):
        return json.dumps(_finite(self.to_dict()), **kwargs)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["stage", "coordinate", "epsilon", "sigma", "residual_before", "deviation"])
        for i, s in enumerate(self.stages):
            writer.writerow([i, s.coordinate, repr(s.epsilon), repr(s.sigma),
                             repr(s.residual_before), repr(s.deviation)])
        return buf.getvalue()


def _finite(obj):
    """JSON has no inf/nan; map them to strings."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _along(vec, axis, ndim):
    shape = [1] * ndim
    shape[axis] = -1
    return np.asarray(vec).reshape(shape)


def _shrink_factors(pi, sigma):
    """Per-slice kept fraction and removed fraction (0/0 = 0)."""
    safe = np.where(pi > 0, pi, 1.0)
    keep = np.where(pi > 0, np.maximum(0.0, pi - sigma) / safe, 0.0)
    removed = np.where(pi > 0, np.minimum(pi, sigma) / safe, 0.0)
    return keep, removed


def shrink(P: Coupling, j: int, eps: float, profile: SigmaProfile) -> Coupling:
    """Remove ``sigma_j(eps)`` of marginal mass from every slice along ``j``."""
    sigma = sigma_eval(profile, eps)
    pi = all_marginals(P)[j]
    keep, _ = _shrink_factors(pi, sigma)
    return Coupling(P.space, P.values * _along(keep, j, P.ndim), normalized=False)


def shrink_deviation_bound(P: Coupling, P_eps: Coupling, eps: float) -> float:
    """Measured ``||P - P_eps||``; raises if it exceeds ``eps``."""
    diff = np.abs(P.values - P_eps.values)
    dev = float(diff.max()) if diff.size else 0.0
    if dev > eps + STAGE_BOUND_SLACK:
        idx = tuple(int(i) for i in np.unravel_index(int(np.argmax(diff)), diff.shape))
        raise BoundViolation(
            f"shrink moved cell {idx} by {dev!r} > eps={eps!r}; the modulus under-estimates P",
            index=idx, deviation=dev, eps=eps,
        )
    return dev


def one_marginal_correct(P: Coupling, rho: MarginalDensity, j: int, eps: float,
                         profile: SigmaProfile, consts: Constants | None = None):
    """Correct coordinate ``j`` of ``P`` to the marginal ``rho``.

    Returns
    -------
    (Coupling, StageRecord)

    Raises
    ------
    GateError
        ``||rho - pi_j P|| >= sigma_j(eps)`` or ``eps >= kappa_j``.
    BoundViolation
        A postcondition failed (deviation, marginals, non-negativity).
    """
    if not 0 <= j < P.ndim:
        raise IndexError(f"coordinate {j} out of range for {P.ndim} factors")
    rho_v = rho.values if isinstance(rho, MarginalDensity) else np.asarray(rho, dtype=float)
    w = P.space.factors[j].weights
    before = all_marginals(P)
    pi = before[j]
    residual = float(np.max(np.abs(rho_v - pi)))
    sigma = sigma_eval(profile, eps)
    if consts is None:
        consts = marginal_constants(pi, w, profile)
    record = StageRecord(j, eps, sigma, residual, c=consts.c, kappa=consts.kappa, K=consts.K)
    if not residual < sigma:
        raise GateError(
            f"coordinate {j}: marginal gap {residual!r} is not below sigma(eps)={sigma!r}",
            coordinate=j, residual=residual, sigma=sigma,
        )
    if not eps < consts.kappa:
        raise GateError(
            f"coordinate {j}: eps={eps!r} is not below kappa={consts.kappa!r}",
            coordinate=j, eps=eps, kappa=consts.kappa,
        )

    keep, removed = _shrink_factors(pi, sigma)
    nd = P.ndim
    p_eps = P.values * _along(keep, j, nd)
    taken = P.values * _along(removed, j, nd)  # P - P_eps without cancellation
    shrink_dev = float(taken.max()) if taken.size else 0.0
    if shrink_dev > eps + STAGE_BOUND_SLACK:
        idx = tuple(int(i) for i in np.unravel_index(int(np.argmax(taken)), taken.shape))
        raise BoundViolation(
            f"coordinate {j}: shrink moved cell {idx} by {shrink_dev!r} > eps={eps!r}; "
            "the modulus under-estimates the coupling",
            index=idx, deviation=shrink_dev,
        )
    mass_deficit = math.fsum(w * np.minimum(pi, sigma))
    if mass_deficit <= 0:
        raise GateError(f"coordinate {j}: shrink removed no mass", coordinate=j)
    if mass_deficit < consts.c * sigma - 1e-12:
        raise BoundViolation(
            f"coordinate {j}: mass deficit {mass_deficit!r} < c*sigma={consts.c * sigma!r}",
            mass_deficit=mass_deficit,
        )
    # integral over X_j of (P - P_eps): a tensor over the other coordinates
    removed_slice = np.tensordot(w * removed, P.values, axes=([0], [j]))
    pi_eps = pi * keep
    coef = (rho_v - pi_eps) / mass_deficit
    raw = p_eps + _along(coef, j, nd) * np.expand_dims(removed_slice, j)
    raw_min = float(raw.min())
    if raw_min < -NEG_TOL:
        idx = tuple(int(i) for i in np.unravel_index(int(np.argmin(raw)), raw.shape))
        raise BoundViolation(
            f"coordinate {j}: corrected coupling is negative ({raw_min!r}) at cell {idx}",
            index=idx,
        )
    out = Coupling(P.space, raw, normalized=P.normalized)
    after = all_marginals(out)
    target_res = float(np.max(np.abs(after[j] - rho_v)))
    other_res = max(
        (float(np.max(np.abs(after[k] - before[k]))) for k in range(nd) if k != j),
        default=0.0,
    )
    deviation = sup_distance(P, out)
    record.mass_deficit = mass_deficit
    record.shrink_deviation = shrink_dev
    record.deviation = deviation
    record.min_before_clamp = raw_min
    record.target_residual = target_res
    record.other_residual = other_res
    scale = max(1.0, float(np.max(np.abs(rho_v))))
    if target_res > STAGE_MARGINAL_TOL * scale or other_res > STAGE_MARGINAL_TOL * scale:
        raise BoundViolation(
            f"coordinate {j}: marginal postcondition missed "
            f"(target {target_res!r}, others {other_res!r})",
        )
    if deviation > consts.K * eps + STAGE_BOUND_SLACK:
        raise BoundViolation(
            f"coordinate {j}: stage deviation {deviation!r} > K_j*eps={consts.K * eps!r}",
        )
    return out, record


def build_profiles(P: Coupling, modulus=None, radial="grid", max_pairs=MAX_PAIRS):
    """Threshold profiles for every coordinate of ``P`` from one modulus."""
    if modulus is None:
        modulus = empirical_modulus(P, max_pairs=max_pairs)
    return [SigmaProfile.for_coupling(P, j, modulus, radial=radial) for j in range(P.ndim)]


def schedule_epsilon(profiles, residuals, inflation=SCHEDULE_INFLATION):
    """``inflation * max_j sigma_j^{-1}(residual_j)``."""
    return inflation * max(p.inverse(r) for p, r in zip(profiles, residuals))


def multi_marginal_correct(P: Coupling, targets, *, modulus=None, eps=None, order=None,
                           stage_modulus="empirical", max_pairs=MAX_PAIRS,
                           compare_orders=False):
    """Correct all marginals of ``P`` to ``targets``, one coordinate per stage.

    Parameters
    ----------
    modulus : optional
        Modulus of ``P``.  Defaults to the empirical one; it also governs the
        first stage, which acts on ``P`` itself.
    eps : float, optional
        Override of the schedule ``1.01 * max_j sigma_j^{-1}(||rho_j - pi_j P||)``.
    order : sequence of int, optional
        Sweep order (default ascending).
    stage_modulus : {"empirical", "fixed"}
        Later stages rebuild thresholds from the empirical modulus of the
        current intermediate coupling (default) or reuse ``modulus``.
    compare_orders : bool
        Also run the reversed sweep and record its deviation.

    Returns
    -------
    (Coupling, CorrectionReport)
    """
    n = P.ndim
    if len(targets) != n:
        raise ValidationError(f"expected {n} target marginals, got {len(targets)}")
    order = list(range(n)) if order is None else [int(j) for j in order]
    if sorted(order) != list(range(n)):
        raise ValidationError(f"order {order} is not a permutation of 0..{n - 1}")
    rhos = [t.values if isinstance(t, MarginalDensity) else np.asarray(t, dtype=float)
            for t in targets]
    for j, (rho, f) in enumerate(zip(rhos, P.space.factors)):
        if rho.shape != (f.size,):
            raise ValidationError(f"target {j} has {rho.size} values, factor has {f.size}")
    original = all_marginals(P)
    residuals = [float(np.max(np.abs(r - m))) for r, m in zip(rhos, original)]
    report = CorrectionReport(order=order)

    if eps is None and max(residuals) < ZERO_RESIDUAL:
        report.fast_path = True
        report.max_residual = max(residuals)
        report.mass = _mass(P.space, P.values)
        log.info("targets match the marginals of P; returning it unchanged")
        return P, report

    if modulus is None:
        modulus = empirical_modulus(P, max_pairs=max_pairs)
    profiles = build_profiles(P, modulus)
    base = [marginal_constants(original[j], P.space.factors[j].weights, profiles[j])
            for j in range(n)]
    if eps is None:
        eps = schedule_epsilon(profiles, residuals)
    if not eps > 0:
        raise ValidationError(f"eps must be positive, got {eps!r}")
    kappa = min(c.kappa for c in base)
    report.epsilon = eps
    report.kappa = kappa
    if not eps < kappa:
        gating = int(np.argmin([c.kappa for c in base]))
        raise GateError(
            f"eps={eps!r} is not below kappa={kappa!r} (coordinate {gating}); "
            "the marginal perturbations are too large",
            coordinate=gating, eps=eps, kappa=kappa,
        )

    current = P
    stage_consts = list(base)
    for step, j in enumerate(order):
        pi_now = all_marginals(current)[j]
        res = float(np.max(np.abs(rhos[j] - pi_now)))
        base_ok = bool(res < float(profiles[j](eps)) and eps < base[j].kappa)
        if res < ZERO_RESIDUAL:
            report.stages.append(StageRecord(j, eps, float(profiles[j](eps)), res,
                                             c=base[j].c, kappa=base[j].kappa, K=base[j].K,
                                             original_gate_ok=base_ok, skipped=True))
            continue
        if step == 0 or stage_modulus == "fixed":
            profile = profiles[j]
        else:
            profile = SigmaProfile.for_coupling(
                current, j, empirical_modulus(current, max_pairs=max_pairs)
            )
        consts = marginal_constants(pi_now, P.space.factors[j].weights, profile)
        try:
            current, record = one_marginal_correct(current, rhos[j], j, eps, profile, consts)
        except GateError as exc:
            if base_ok:
                log.warning("stage %d: original-P gate passes but the intermediate gate fails", step)
            raise GateError(f"stage {step}: {exc}", coordinate=j, **exc.details) from exc
        except SuproundError as exc:
            exc.args = (f"stage {step}: {exc}",) + exc.args[1:]
            raise
        record.original_gate_ok = base_ok
        if not base_ok:
            log.warning("stage %d: the intermediate gate passes where the original-P gate fails", step)
        stage_consts[j] = consts
        report.stages.append(record)
        _verify_sweep(current, rhos, original, order[:step + 1], step)

    report.K = sum(c.K for c in stage_consts)
    report.deviation = sup_distance(P, current)
    report.bound = report.K * eps
    final = all_marginals(current)
    report.max_residual = max(float(np.max(np.abs(f - r))) for f, r in zip(final, rhos))
    report.mass = _mass(current.space, current.values)
    if report.deviation > report.bound + TOTAL_BOUND_SLACK:
        raise BoundViolation(
            f"total deviation {report.deviation!r} exceeds K*eps={report.bound!r}",
            deviation=report.deviation, bound=report.bound,
        )
    if compare_orders and n > 1:
        try:
            rev, _ = multi_marginal_correct(P, targets, modulus=modulus, eps=eps,
                                            order=order[::-1], stage_modulus=stage_modulus,
                                            max_pairs=max_pairs)
            report.reverse_deviation = sup_distance(P, rev)
        except SuproundError as exc:
            report.reverse_error = str(exc)
    return current, report


def _verify_sweep(current, rhos, original, done, step):
    marg = all_marginals(current)
    for k in range(current.ndim):
        ref = rhos[k] if k in done else original[k]
        gap = float(np.max(np.abs(marg[k] - ref)))
        if gap > STAGE_MARGINAL_TOL * max(1.0, float(np.max(np.abs(ref)))):
            state = "target" if k in done else "original"
            raise BoundViolation(
                f"stage {step}: coordinate {k} drifted {gap!r} from its {state} marginal"
            )


def _mass(space, values):
    first = tensor_marginals(space, values)[0]
    return math.fsum(first * space.factors[0].weights)


def naive_correction(P: Coupling, targets):
    """The signed tensor ``P + rho_1 x ... x rho_N - pi_1 P x ... x pi_N P``.

    Matches every marginal but may be negative, unlike the corrector above.
    """
    return P.values + outer_product(P.space, targets) - outer_product(P.space, all_marginals(P))
