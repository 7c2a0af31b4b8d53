"""Baseline tail and quantile bounds and the default bound combinations.

Hoeffding, Bernstein, Berry-Esseen, and non-uniform Berry-Esseen bounds for
the centered, root-n scaled sample mean, plus the default one- and two-sided
minima over all baselines and the zero-bias bounds.  The Berry-Esseen style
bounds are clipped at the always-valid Hoeffding bound inside the operations,
so downstream minima inherit the clipping automatically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from effconc import zero_bias
from effconc.model import Problem, derived
from effconc.numerics import _phi_c

__all__ = [
    "BoundResult",
    "hoeffding_tail",
    "bernstein_tail",
    "bernstein_quantile",
    "berry_esseen_tail",
    "nonuniform_be_tail",
    "hoeffding_quantile",
    "default_onetail",
    "default_onetail_result",
    "default_twotail",
    "default_twotail_result",
]


@dataclass(frozen=True)
class BoundResult:
    """A bound value together with which sub-bound achieved it.

    Attributes:
        value: The bound: a probability for tails, a nonnegative real for
            quantiles.
        winner: Name of the sub-bound achieving the minimum.
        settings: Optimizer settings (entries among p, rho, kappa, lambda)
            when the winning bound has free parameters.
    """

    value: float
    winner: str
    settings: Mapping[str, float] | None = None


def hoeffding_tail(prob: Problem, u: float) -> float:
    """Sub-Gaussian tail exp(-2 u^2 sigma^2 / r^2) for P(S_n > sigma u).

    Args:
        prob: Problem parameters.
        u: Standardized threshold, u >= 0.

    Returns:
        min(1, exp(-2 u^2 sigma^2 / r^2)).
    """
    if u < 0:
        raise ValueError(f"threshold must be nonnegative, got {u!r}")
    return min(1.0, math.exp(-2.0 * u * u * prob.sigma ** 2 / prob.r ** 2))


def bernstein_tail(prob: Problem, u: float) -> float:
    """Variance-adaptive tail exp(-u^2 / (2 (1 + r u / (3 sigma sqrt(n))))).

    Args:
        prob: Problem parameters.
        u: Standardized threshold, u >= 0.

    Returns:
        min(1, the displayed exponential) as a bound on P(S_n > sigma u).
    """
    if u < 0:
        raise ValueError(f"threshold must be nonnegative, got {u!r}")
    denom = 2.0 * (1.0 + prob.r * u / (3.0 * prob.sigma * prob.sqrt_n))
    return min(1.0, math.exp(-u * u / denom))


def bernstein_quantile(prob: Problem, delta: float) -> float:
    """Two-sided quantile bound r_sigma log(2/d)/(3 sqrt(n)) + sigma sqrt(2 log(2/d)).

    A deterministic q with P(|S_n| > q) <= delta.

    Args:
        prob: Problem parameters.
        delta: Failure probability in (0, 1).

    Returns:
        The quantile bound (on the scale of S_n).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {delta!r}")
    d = derived(prob)
    log_term = math.log(2.0 / delta)
    return d.r_sigma * log_term / (3.0 * d.sqrt_n) + prob.sigma * math.sqrt(2.0 * log_term)


def _be_constant(ratio_sigma: float) -> float:
    """Uniform Gaussian-approximation constant min(.3328(x+.429), .33554(x+.415))."""
    return min(0.3328 * (ratio_sigma + 0.429), 0.33554 * (ratio_sigma + 0.415))


def _nube_constant(ratio_sigma: float) -> float:
    """Non-uniform Gaussian-approximation constant min(17.36 x, 15.70 x + 0.646)."""
    return min(17.36 * ratio_sigma, 15.70 * ratio_sigma + 0.646)


def berry_esseen_tail(prob: Problem, u: float) -> float:
    """Gaussian tail plus uniform correction, clipped at the Hoeffding bound.

    Args:
        prob: Problem parameters.
        u: Standardized threshold, u >= 0.

    Returns:
        min(1, Phi^c(u) + C/sqrt(n), hoeffding_tail(prob, u)) where C depends
        only on r_sigma/sigma.
    """
    if u < 0:
        raise ValueError(f"threshold must be nonnegative, got {u!r}")
    d = derived(prob)
    raw = float(_phi_c(u)) + _be_constant(d.ratio_sigma) / d.sqrt_n
    return min(1.0, raw, hoeffding_tail(prob, u))


def nonuniform_be_tail(prob: Problem, u: float) -> float:
    """Gaussian tail plus cubically decaying correction, clipped at Hoeffding.

    Args:
        prob: Problem parameters.
        u: Standardized threshold, u >= 0.

    Returns:
        min(1, Phi^c(u) + C~/(sqrt(n) (1+u)^3), hoeffding_tail(prob, u)).
    """
    if u < 0:
        raise ValueError(f"threshold must be nonnegative, got {u!r}")
    d = derived(prob)
    raw = float(_phi_c(u)) + _nube_constant(d.ratio_sigma) / (d.sqrt_n * (1.0 + u) ** 3)
    return min(1.0, raw, hoeffding_tail(prob, u))


def _hoeffding_quantile_from_r(r: float, delta: float, sided: str) -> float:
    """hoeffding_quantile body for callers holding only the range."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {delta!r}")
    if sided not in ("one", "two"):
        raise ValueError(f"sided must be 'one' or 'two', got {sided!r}")
    k = 1.0 if sided == "one" else 2.0
    return r * math.sqrt(math.log(k / delta) / 2.0)


def hoeffding_quantile(prob: Problem, delta: float, sided: str = "one") -> float:
    """Closed-form quantile bound r sqrt(log(k/delta)/2), k = 1 or 2 by side.

    Args:
        prob: Problem parameters (only r enters).
        delta: Failure probability in (0, 1).
        sided: "one" for P(S_n > q) <= delta, "two" for P(|S_n| > q) <= delta.

    Returns:
        The quantile bound; independent of sigma and n.
    """
    return _hoeffding_quantile_from_r(prob.r, delta, sided)


def default_onetail_result(prob: Problem, u: float) -> BoundResult:
    """Minimum of all one-sided baselines and zero-bias bounds at sigma*u.

    The zero-bias variants are re-expressed as bounds at the raw threshold
    sigma*u (each with its lambda grid-optimized) so all candidates bound
    the same event P(S_n > sigma u).

    Args:
        prob: Problem parameters.
        u: Standardized threshold, u >= 0.

    Returns:
        BoundResult with the minimum value and the winning bound's name.
    """
    if u < 0:
        raise ValueError(f"threshold must be nonnegative, got {u!r}")
    t = prob.sigma * u
    candidates: list[tuple[str, float, Mapping[str, float] | None]] = [
        ("hoeffding", hoeffding_tail(prob, u), None),
        ("bernstein", bernstein_tail(prob, u), None),
        ("berry_esseen", berry_esseen_tail(prob, u), None),
        ("nonuniform_berry_esseen", nonuniform_be_tail(prob, u), None),
    ]
    for alt, name in ((False, "zero_bias"), (True, "alt_zero_bias")):
        u_var = zero_bias._variant_u_for_threshold(prob, t, alt)
        if u_var is not None:
            val, lam = zero_bias._min_over_lambda(prob, u_var, alt=alt)
            candidates.append((name, val, {"lambda": lam}))
    winner, value, settings = min(candidates, key=lambda c: c[1])
    return BoundResult(value=min(1.0, value), winner=winner, settings=settings)


def default_onetail(prob: Problem, u: float) -> float:
    """Value of default_onetail_result; bound on P(S_n > sigma u)."""
    return default_onetail_result(prob, u).value


def default_twotail_result(prob: Problem, u: float) -> BoundResult:
    """Two-sided default bound min(1, 2 * default_onetail) with winner."""
    one = default_onetail_result(prob, u)
    return BoundResult(value=min(1.0, 2.0 * one.value), winner=one.winner, settings=one.settings)


def default_twotail(prob: Problem, u: float) -> float:
    """Value of default_twotail_result; bound on P(|S_n| > sigma u)."""
    return default_twotail_result(prob, u).value


# --------------------------------------------------------------------------
# Lane-vectorized kernel
# --------------------------------------------------------------------------
# Mirrors default_onetail across lanes of (sigma, u) sharing (n, r); the
# empirical pipeline evaluates the default bound at many substituted sigmas
# per call.  Arithmetic is kept term-for-term identical to the scalar path.

def _onetail_lanes(n: int, r: float, sigmas: np.ndarray, us: np.ndarray) -> np.ndarray:
    """default_onetail for per-lane (sigma, u); all thresholds must be >= 0."""
    sigmas = np.asarray(sigmas, dtype=float)
    us = np.asarray(us, dtype=float)
    sq_n = math.sqrt(n)
    r_sigma = 0.5 * r + 0.5 * np.sqrt(np.maximum(r * r - 4.0 * sigmas * sigmas, 0.0))
    ratio_sigma = r_sigma / sigmas

    hoeff = np.minimum(1.0, np.exp(-2.0 * us * us * sigmas ** 2 / r ** 2))
    bern = np.minimum(
        1.0, np.exp(-us * us / (2.0 * (1.0 + r * us / (3.0 * sigmas * sq_n))))
    )
    phic = _phi_c(us)
    c_be = np.minimum(0.3328 * (ratio_sigma + 0.429), 0.33554 * (ratio_sigma + 0.415))
    be = np.minimum(np.minimum(1.0, phic + c_be / sq_n), hoeff)
    c_nube = np.minimum(17.36 * ratio_sigma, 15.70 * ratio_sigma + 0.646)
    nube = np.minimum(np.minimum(1.0, phic + c_nube / (sq_n * (1.0 + us) ** 3)), hoeff)
    zb = zero_bias._tail_at_threshold_lanes(n, r, sigmas, sigmas * us)
    return np.minimum(
        np.minimum(np.minimum(hoeff, bern), np.minimum(be, nube)), zb
    )


def _twotail_lanes(n: int, r: float, sigmas: np.ndarray, us: np.ndarray) -> np.ndarray:
    """default_twotail for per-lane (sigma, u)."""
    return np.minimum(1.0, 2.0 * _onetail_lanes(n, r, sigmas, us))
