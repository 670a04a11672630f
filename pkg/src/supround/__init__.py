"""Uniform-norm rounding of discretized couplings onto exact marginals."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .continuity import (
    Constants,
    EmpiricalModulus,
    HoelderModulus,
    LipschitzModulus,
    SigmaProfile,
    constants,
    empirical_modulus,
    modulus_eval,
    modulus_from_config,
    modulus_inverse,
    sigma_eval,
    sigma_inverse,
)
from .correction import (
    CorrectionReport,
    StageRecord,
    multi_marginal_correct,
    naive_correction,
    one_marginal_correct,
    shrink,
    shrink_deviation_bound,
)
from .coupling import (
    Coupling,
    MarginalDensity,
    all_marginals,
    marginal_projection,
    sup_distance,
    total_mass,
)
from .errors import (
    BoundViolation,
    DegenerateProfileError,
    GateError,
    SuproundError,
    ValidationError,
)
from .counterexamples import example_A, example_B, example_C, forced_deviation, tent
from .pipeline import entropic_mmot, solve_and_round
from .spaces import MarginalSpace, ProductSpace, interval_grid, product_distance, radial_maximal

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "Constants",
    "EmpiricalModulus",
    "HoelderModulus",
    "LipschitzModulus",
    "SigmaProfile",
    "constants",
    "empirical_modulus",
    "modulus_eval",
    "modulus_from_config",
    "modulus_inverse",
    "sigma_eval",
    "sigma_inverse",
    "CorrectionReport",
    "StageRecord",
    "multi_marginal_correct",
    "naive_correction",
    "one_marginal_correct",
    "shrink",
    "shrink_deviation_bound",
    "Coupling",
    "MarginalDensity",
    "all_marginals",
    "marginal_projection",
    "sup_distance",
    "total_mass",
    "BoundViolation",
    "DegenerateProfileError",
    "GateError",
    "SuproundError",
    "ValidationError",
    "example_A",
    "example_B",
    "example_C",
    "forced_deviation",
    "tent",
    "entropic_mmot",
    "solve_and_round",
    "MarginalSpace",
    "ProductSpace",
    "interval_grid",
    "product_distance",
    "radial_maximal",
]
