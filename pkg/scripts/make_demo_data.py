"""Regenerate the bundled demo fixtures in src/supround/data/.

Writes a 16-point grid on [0, 1], a smooth 16x16 coupling, gated perturbed
targets, targets that break the gate, and a quadratic cost tensor.
"""

import argparse
import os

import numpy as np

from supround.continuity import marginal_constants
from supround.correction import build_profiles
from supround.coupling import Coupling, MarginalDensity, all_marginals, save_coupling, save_marginal
from supround.pipeline import quadratic_cost
from supround.spaces import save_space
from supround.synthetic import perturbed_targets, random_smooth_coupling, unit_cube

HERE = os.path.dirname(os.path.abspath(__file__))
DEFAULT_OUT = os.path.join(HERE, "..", "src", "supround", "data")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=DEFAULT_OUT)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    out = lambda name: os.path.join(args.out, name)  # noqa: E731

    space = unit_cube(16, 2)
    save_space(space.factors[0], out("demo_space.json"))
    P = random_smooth_coupling(space, args.seed)
    save_coupling(P, out("demo_coupling.json"))

    profiles = build_profiles(P)
    pis = all_marginals(P)
    kappa = min(marginal_constants(pi, f.weights, p).kappa
                for pi, f, p in zip(pis, space.factors, profiles))
    amp = 0.5 * min(float(p(0.5 * kappa)) for p in profiles)
    for j, rho in enumerate(perturbed_targets(P, [amp, amp], args.seed + 1)):
        save_marginal(rho, out(f"demo_target_{j}.csv"))
        save_marginal(pis[j], out(f"demo_exact_{j}.csv"))

    # all mass on two points: far outside the gate
    x = space.factors[0]
    spike = np.zeros(x.size)
    spike[[3, 4]] = 1.0
    spike = spike / float(np.sum(spike * x.weights))
    save_marginal(MarginalDensity(x, spike), out("demo_far_0.csv"))
    save_marginal(pis[1], out("demo_far_1.csv"))

    save_coupling(Coupling(space, quadratic_cost(space), normalized=False), out("demo_cost.json"))
    uniform = MarginalDensity(x, np.ones(x.size))
    save_marginal(uniform, out("demo_uniform.csv"))
    print(f"wrote fixtures to {os.path.normpath(args.out)} (perturbation {amp:.3g})")


if __name__ == "__main__":
    main()
