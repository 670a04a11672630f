"""Command-line interface.

Exit codes: 0 success, 1 I/O or parse error, 2 validation error, 3 gate
failure (perturbation too large for the theorem), 4 bound or postcondition
violation.  Every run writes a report, to ``--report`` when given and to
stdout otherwise.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .continuity import SigmaProfile, constants, modulus_from_config
from .correction import _finite, multi_marginal_correct
from .counterexamples import example_A, example_B, example_C
from .coupling import (
    NEG_TOL,
    load_coupling,
    load_marginal,
    read_tensor,
    save_coupling,
    save_marginal,
    sup_distance,
    tensor_marginals,
    tensor_mass,
)
from .errors import BoundViolation, SuproundError, ValidationError
from .pipeline import entropic_mmot, solve_and_round
from .spaces import ProductSpace, load_space, save_space
from .synthetic import perturbed_targets

log = logging.getLogger("supround")


class _Report:
    def __init__(self, args):
        self.path = args.report
        self.fmt = args.format

    def emit(self, data, rows=None, header=None):
        """Write ``data`` (structured) or ``rows`` (csv) to the report sink."""
        if self.fmt == "csv" and rows is not None:
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
            text = buf.getvalue()
        else:
            text = json.dumps(_finite(data), indent=2, sort_keys=True) + "\n"
        if self.path:
            with open(self.path, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


def _modulus_config(text):
    if text is None:
        return {"kind": "empirical"}
    if os.path.exists(text):
        try:
            with open(text) as fh:
                return json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SuproundError(f"{text}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"--modulus is neither a file nor JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValidationError("--modulus must be a JSON object with a 'kind' field")
    return cfg


def _space(args):
    factors = [load_space(p) for p in args.space]
    if len(factors) == 1 and getattr(args, "factors", None):
        factors = factors * args.factors
    if len(factors) < 2:
        raise ValidationError("give one --space per factor (or --factors N with a single file)")
    return ProductSpace(factors)


def _targets(args, space):
    if len(args.target) != space.n_factors:
        raise ValidationError(f"expected {space.n_factors} --target files, got {len(args.target)}")
    return [load_marginal(p, f) for p, f in zip(args.target, space.factors)]


def _load(args):
    space = _space(args)
    P = load_coupling(args.coupling, space)
    modulus = modulus_from_config(_modulus_config(args.modulus), P)
    return space, P, modulus


# -- subcommands ------------------------------------------------------------

def cmd_correct(args, report):
    space = _space(args)
    P = load_coupling(args.coupling, space)
    if args.perturb is not None:
        targets = perturbed_targets(P, [args.perturb] * space.n_factors, args.seed)
    else:
        targets = _targets(args, space)
    cfg = _modulus_config(args.modulus)
    modulus = None if cfg.get("kind") == "empirical" else modulus_from_config(cfg)
    order = [int(j) for j in args.order.split(",")] if args.order else None
    out, rep = multi_marginal_correct(P, targets, modulus=modulus, eps=args.eps, order=order,
                                      compare_orders=args.compare_orders)
    if args.out:
        save_coupling(out, args.out)
    data = rep.to_dict()
    data["status"] = "ok"
    report.emit(data, *_stage_rows(rep))
    return 0


def _stage_rows(rep):
    header = ["stage", "coordinate", "epsilon", "sigma", "residual_before", "deviation"]
    rows = [[i, s.coordinate, s.epsilon, s.sigma, s.residual_before, s.deviation]
            for i, s in enumerate(rep.stages)]
    return rows, header


def cmd_sigma(args, report):
    eps_list = args.eps
    bad = [e for e in eps_list if not e > 0]
    if bad:
        raise ValidationError(f"--eps values must be positive, got {bad[0]!r}")
    space, P, modulus = _load(args)
    rows, out = [], []
    for j in range(space.n_factors):
        profile = SigmaProfile.for_coupling(P, j, modulus, radial=args.radial)
        try:
            c, kappa, K = constants(P, j, profile)
        except SuproundError as exc:
            c, kappa, K = float("nan"), float("nan"), float("nan")
            log.warning("coordinate %d: %s", j, exc)
        for e in eps_list:
            s = float(profile(e))
            theta = profile.theta_star(e) if s > 0 else float("nan")
            status = "ok" if s > 0 else "degenerate"
            if status != "ok":
                log.warning("coordinate %d: sigma vanishes at eps=%r", j, e)
            rows.append([j, e, s, theta, kappa, c, K])
            out.append({"j": j, "eps": e, "sigma": s, "theta_star": theta, "kappa": kappa,
                        "c": c, "K": K, "status": status})
    header = ["j", "eps", "sigma", "theta_star", "kappa", "c", "K"]
    report.emit({"status": "ok", "rows": out}, rows, header)
    return 0


def cmd_kappa(args, report):
    space, P, modulus = _load(args)
    rows = []
    for j in range(space.n_factors):
        profile = SigmaProfile.for_coupling(P, j, modulus, radial=args.radial)
        c, kappa, K = constants(P, j, profile)
        rows.append([j, c, kappa, K])
    header = ["j", "c", "kappa", "K"]
    report.emit({"status": "ok", "rows": [dict(zip(header, r)) for r in rows],
                 "kappa": min(r[2] for r in rows), "K": sum(r[3] for r in rows)}, rows, header)
    return 0


def cmd_verify(args, report):
    space = _space(args)
    A = load_coupling(args.a, space)
    B, normalized = read_tensor(args.b)
    if B.shape != A.shape:
        raise ValidationError(f"{args.b}: shape {B.shape} does not match {args.a}: {A.shape}")
    rhos = [t.values for t in _targets(args, space)]
    residuals = [float(np.max(np.abs(m - r))) for m, r in zip(tensor_marginals(space, B), rhos)]
    dist = sup_distance(A.values, B)
    low = float(B.min())
    mass = tensor_mass(space, B)
    failures = []
    if low < -NEG_TOL:
        idx = tuple(int(i) for i in np.unravel_index(int(np.argmin(B)), B.shape))
        failures.append(f"{args.b}: negative value {low!r} at index {list(idx)}")
    bad = [j for j, r in enumerate(residuals) if r > args.tol]
    if bad:
        failures.append(f"marginal {bad[0]} residual {residuals[bad[0]]!r} > {args.tol}")
    if normalized and abs(mass - 1.0) > 1e-10:
        failures.append(f"mass {mass!r} differs from 1")
    bound = None
    if args.eps is not None and args.K is not None:
        bound = args.K * args.eps
        if dist > bound + 1e-8:
            failures.append(f"sup distance {dist!r} > K*eps = {bound!r}")
    data = {"status": "fail" if failures else "pass", "residuals": residuals,
            "sup_distance": dist, "min": low, "mass": mass, "bound": bound,
            "failures": failures}
    rows = [[j, r] for j, r in enumerate(residuals)]
    report.emit(data, rows, ["j", "residual"])
    for msg in failures:
        print(f"supround: {msg}", file=sys.stderr)
    return BoundViolation.exit_code if failures else 0


def cmd_example(args, report):
    if args.which == "A":
        res = example_A(args.n, args.resolution)
    elif args.which == "B":
        res = example_B(args.n, args.resolution)
    else:
        res = example_C(args.eps, args.L, args.N, args.filler_lipschitz, args.resolution)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        save_coupling(res.coupling, os.path.join(args.out_dir, "coupling.json"))
        save_marginal(res.marginal, os.path.join(args.out_dir, "marginal.csv"))
        for j, f in enumerate(res.coupling.space.factors):
            save_space(f, os.path.join(args.out_dir, f"space_{j}.json"))
        with open(os.path.join(args.out_dir, "certificate.json"), "w") as fh:
            json.dump(_finite(res.certificate), fh, indent=2, sort_keys=True)
    cert = dict(res.certificate)
    cert["status"] = "pass" if res.passed else "fail"
    scalars = [[k, v] for k, v in sorted(cert.items()) if isinstance(v, (int, float, str))]
    report.emit(cert, scalars, ["field", "value"])
    return 0 if res.passed else BoundViolation.exit_code


def cmd_pipeline(args, report):
    space = _space(args)
    values, _ = read_tensor(args.cost)
    targets = _targets(args, space)
    if args.round == "off":
        P, hist = entropic_mmot(values, targets, args.h, args.max_iter, args.tol, space=space)
        data = {"status": "ok" if hist.converged else "not-converged",
                "residuals": list(hist), "converged": hist.converged}
        if args.out_dir:
            os.makedirs(args.out_dir, exist_ok=True)
            save_coupling(P, os.path.join(args.out_dir, "solver.json"))
        report.emit(data, [[i, r] for i, r in enumerate(hist)], ["sweep", "residual"])
        return 0
    res = solve_and_round(values, targets, args.h, args.tol, args.max_iter, space=space)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        save_coupling(res.solver_coupling, os.path.join(args.out_dir, "solver.json"))
        save_coupling(res.coupling, os.path.join(args.out_dir, "rounded.json"))
    data = res.to_dict()
    data["status"] = "ok"
    report.emit(data, *_stage_rows(res.report))
    return 0


# -- parser -----------------------------------------------------------------

def _add_space(p, coupling=True):
    p.add_argument("--space", action="append", required=True, metavar="FILE",
                   help="space file, one per factor in order")
    p.add_argument("--factors", type=int, help="repeat a single --space file N times")
    if coupling:
        p.add_argument("--coupling", required=True, metavar="FILE")


def build_parser():
    parser = argparse.ArgumentParser(prog="supround", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized fixtures")
    parser.add_argument("--report", metavar="PATH", help="write the report here instead of stdout")
    parser.add_argument("--format", choices=["structured", "csv"], default="structured")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("correct", help="round a coupling onto target marginals")
    _add_space(p)
    p.add_argument("--target", action="append", default=[], metavar="FILE")
    p.add_argument("--perturb", type=float, metavar="AMP",
                   help="instead of --target, use seeded perturbations of size AMP")
    p.add_argument("--modulus", metavar="JSON|FILE", help='e.g. \'{"kind": "lipschitz", "L": 2}\'')
    p.add_argument("--eps", type=float, help="override the epsilon schedule")
    p.add_argument("--order", help="comma-separated sweep order, e.g. 2,0,1")
    p.add_argument("--compare-orders", action="store_true")
    p.add_argument("--out", metavar="FILE", help="corrected coupling")
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("sigma", help="tabulate the threshold function")
    _add_space(p)
    p.add_argument("--modulus", metavar="JSON|FILE")
    p.add_argument("--eps", type=float, nargs="+", required=True)
    p.add_argument("--radial", choices=["grid", "interval"], default="grid")
    p.set_defaults(func=cmd_sigma)

    p = sub.add_parser("kappa", help="gate constants per coordinate")
    _add_space(p)
    p.add_argument("--modulus", metavar="JSON|FILE")
    p.add_argument("--radial", choices=["grid", "interval"], default="grid")
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("verify", help="check a corrected coupling against its inputs")
    _add_space(p, coupling=False)
    p.add_argument("--a", required=True, metavar="FILE", help="original coupling")
    p.add_argument("--b", required=True, metavar="FILE", help="candidate coupling")
    p.add_argument("--target", action="append", default=[], metavar="FILE")
    p.add_argument("--eps", type=float)
    p.add_argument("--K", type=float)
    p.add_argument("--tol", type=float, default=1e-10, help="marginal residual tolerance")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("example", help="generate a counterexample with its certificate")
    p.add_argument("which", choices=["A", "B", "C"])
    p.add_argument("--n", type=int, default=3, help="truncation index (A, B)")
    p.add_argument("--eps", type=float, default=0.1, help="(C)")
    p.add_argument("--L", type=float, default=1.0, help="(C)")
    p.add_argument("--N", type=int, default=2, help="number of factors (C)")
    p.add_argument("--filler-lipschitz", type=float, help="Lipschitz budget of the filler (C)")
    p.add_argument("--resolution", type=int, help="grid cells per unit length")
    p.add_argument("--out-dir", metavar="DIR")
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("pipeline", help="entropic solver followed by rounding")
    _add_space(p, coupling=False)
    p.add_argument("--cost", required=True, metavar="FILE", help="cost tensor (coupling format)")
    p.add_argument("--target", action="append", default=[], metavar="FILE")
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--tol", type=float, default=1e-4, help="solver stop residual")
    p.add_argument("--round", choices=["on", "off"], default="on")
    p.add_argument("--out-dir", metavar="DIR")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="supround: %(levelname)s: %(message)s")
    report = _Report(args)
    try:
        return args.func(args, report)
    except SuproundError as exc:
        data = {"status": "error", "exit_code": exc.exit_code, "error": str(exc),
                "kind": type(exc).__name__}
        coord = getattr(exc, "coordinate", None)
        if coord is not None:
            data["coordinate"] = coord
        data.update(getattr(exc, "details", {}) or {})
        print(f"supround: error: {exc}", file=sys.stderr)
        report.emit(data, [[k, v] for k, v in sorted(data.items())], ["field", "value"])
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
