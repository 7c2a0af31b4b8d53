"""Problem description shared by every bound: sample size, range, variance.

All bounds in this package concern the centered, root-n scaled sample mean
of n i.i.d. variables supported on an interval of length r with standard
deviation sigma.  This module validates those inputs once and derives the
handful of scale quantities every formula reuses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["Problem", "DerivedParams", "rsig", "rsig_at", "derived"]

# Validation slack: a discriminant this close to zero (relative to r**2) is
# treated as exactly zero so sigma = r/2 round-trips through floats.
_DISCRIMINANT_SLACK = 1e-15


def rsig(r: float, sigma: float) -> float:
    """Effective one-sided range r/2 + sqrt(r**2 - 4 sigma**2)/2.

    This is the largest possible distance from the mean to the far edge of
    the support once the variance is pinned at sigma**2: variance this large
    forces the mean away from the edges, shrinking the usable range from r
    down to this value.  Equals r when sigma is 0 and r/2 when sigma = r/2.

    Args:
        r: Support range, r > 0.
        sigma: Standard deviation with 0 <= sigma <= r/2.

    Returns:
        The effective range, in [r/2, r].
    """
    if r <= 0:
        raise ValueError(f"range must be positive, got {r!r}")
    if sigma < 0:
        raise ValueError(f"standard deviation must be nonnegative, got {sigma!r}")
    disc = r * r - 4.0 * sigma * sigma
    if disc < -_DISCRIMINANT_SLACK * r * r:
        raise ValueError(
            f"standard deviation {sigma!r} exceeds r/2 = {r / 2!r}, impossible on a range-{r!r} support"
        )
    return 0.5 * r + 0.5 * math.sqrt(max(disc, 0.0))


def rsig_at(r: float, sigma_prime: float) -> float:
    """Effective range evaluated at a substituted standard deviation.

    Identical to rsig; kept as a named entry point because several bounds
    re-evaluate the effective range at a deflated or inflated sigma (for
    example a lower confidence limit) rather than at the problem's own.

    Args:
        r: Support range, r > 0.
        sigma_prime: Substituted standard deviation in [0, r/2].

    Returns:
        rsig(r, sigma_prime).
    """
    return rsig(r, sigma_prime)


@dataclass(frozen=True)
class Problem:
    """Inputs for a mean-concentration bound.

    Attributes:
        n: Sample size, n >= 1.
        r: Length of the support interval, r > 0.
        sigma: Standard deviation of one observation, 0 < sigma <= r/2.
    """

    n: int
    r: float
    sigma: float

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"sample size must be a positive integer, got {self.n!r}")
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError(f"range must be positive and finite, got {self.r!r}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"standard deviation must be positive, got {self.sigma!r}")
        # Delegates the sigma <= r/2 check (with float slack) to rsig.
        rsig(self.r, self.sigma)

    @property
    def sqrt_n(self) -> float:
        return math.sqrt(float(self.n))


@dataclass(frozen=True)
class DerivedParams:
    """Scale quantities derived from a Problem, computed once and reused.

    Attributes:
        r_sigma: Effective one-sided range rsig(r, sigma), in [r/2, r].
        ratio: r / sigma, at least 2.
        ratio_sigma: r_sigma / sigma, at least 1.
        sqrt_n: sqrt(n).
    """

    r_sigma: float
    ratio: float
    ratio_sigma: float
    sqrt_n: float


def derived(problem: Problem) -> DerivedParams:
    """Compute the derived scale quantities for a problem.

    Args:
        problem: Validated problem inputs.

    Returns:
        DerivedParams with the effective range and the two range-to-sigma
        ratios used throughout the bounds.
    """
    r_sigma = rsig(problem.r, problem.sigma)
    return DerivedParams(
        r_sigma=r_sigma,
        ratio=problem.r / problem.sigma,
        ratio_sigma=r_sigma / problem.sigma,
        sqrt_n=problem.sqrt_n,
    )
