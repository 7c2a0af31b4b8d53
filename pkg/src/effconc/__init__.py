"""Finite-sample valid, asymptotically efficient concentration bounds.

Tail and quantile bounds for the centered, root-n scaled sample mean of
bounded i.i.d. variables with known (or estimated) variance, together with
classical baselines and an adaptive fixed-accuracy stopping simulator.
"""

from effconc.model import DerivedParams, Problem, derived, rsig, rsig_at
from effconc.numerics import (
    NumericsError,
    Tolerance,
    binomial_pnorm,
    hermite_moment_bound,
    integrate,
    invert_monotone_tail,
    minimize_scalar,
    normal_pnorm,
    std_normal_cdf_c,
    std_normal_quantile,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "NumericsError",
    "Tolerance",
    "Problem",
    "DerivedParams",
    "derived",
    "rsig",
    "rsig_at",
    "std_normal_cdf_c",
    "std_normal_quantile",
    "normal_pnorm",
    "binomial_pnorm",
    "hermite_moment_bound",
    "integrate",
    "minimize_scalar",
    "invert_monotone_tail",
]
