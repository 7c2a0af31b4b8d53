"""Empirical-variance quantile bounds: variance brackets and the sup conversion.

When the variance is unknown, any known-variance quantile bound q(r, delta,
sigma) converts into a valid empirical bound by (i) spending a slice a of the
miscoverage budget on a confidence bracket [sigma_lo, sigma_hi] for the true
standard deviation, built from the empirical variance and distribution-free
Kolmogorov-Smirnov (DKW) quantiles, and (ii) taking the supremum of
q(r, delta - a, sigma_tilde) over the bracket.  This module implements the
bracket, the generic sup conversion, the efficient empirical quantile bound
(the sup applied to the Wasserstein-based efficient quantile), and the
empirical Bernstein baseline.

The supremum is computed on a 65-point grid over the bracket plus both
endpoints and the empirical standard deviation itself, refined by a
golden-section local search around the grid maximum; all implemented base
bounds are continuous in sigma, and coverage is additionally verified by
simulation in the tests.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from effconc import wasserstein
from effconc.classical import BoundResult
from effconc.numerics import std_normal_quantile

__all__ = [
    "SampleSummary",
    "VarianceBracket",
    "KSQuantiles",
    "ks_quantile",
    "ks_quantiles",
    "sigma_lower",
    "sigma_upper",
    "variance_bracket",
    "default_a",
    "empirical_quantile",
    "efficient_ebe_quantile",
    "empirical_bernstein_quantile",
]

# Sup-over-bracket search profile: grid resolution, golden-section refinement
# steps around the grid maximum, and the largest number of bound evaluations
# bundled into one vectorized call.
_SUP_GRID_POINTS = 65
_SUP_REFINE_ITERS = 14
_EVAL_CHUNK = 4096
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

# Relative slack when validating emp_var <= r^2/4 (attainable only by a
# symmetric two-point distribution; float round-trips may overshoot).
_VAR_SLACK = 1e-12

# The sup grid's lower end is floored at this fraction of r: sigma = 0 is not
# an admissible problem (the base bounds divide by sigma), every implemented
# base bound is continuous from the right at 0, and no admissible true sigma
# lies below the floor.
_SIGMA_FLOOR_FRAC = 1e-12


@dataclass(frozen=True)
class SampleSummary:
    """Sufficient statistics of an observed sample.

    Attributes:
        n: Sample size, n >= 1.
        mean: Sample mean; must lie in [0, r] for the range r supplied to the
            operations consuming the summary.
        emp_var: Empirical variance (1/n) sum (W_i - mean)^2, at most r^2/4.
    """

    n: int
    mean: float
    emp_var: float

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"sample size must be a positive integer, got {self.n!r}")
        if not math.isfinite(self.mean):
            raise ValueError(f"sample mean must be finite, got {self.mean!r}")
        if not (self.emp_var >= 0.0 and math.isfinite(self.emp_var)):
            raise ValueError(f"empirical variance must be nonnegative, got {self.emp_var!r}")


@dataclass(frozen=True)
class VarianceBracket:
    """Confidence bracket for the standard deviation, valid at level a.

    Attributes:
        sigma_lo: Lower confidence limit, >= 0.
        sigma_hi: Upper confidence limit, in [sigma_lo, r/2].
        a: Miscoverage budget spent on the bracket.
    """

    sigma_lo: float
    sigma_hi: float
    a: float


@dataclass(frozen=True)
class KSQuantiles:
    """One- and two-sided Kolmogorov-Smirnov quantiles at a common level.

    Attributes:
        one_sided: Upper quantile for the one-sided statistic.
        two_sided: Upper quantile for the two-sided statistic; at least
            one_sided at the same level.
    """

    one_sided: float
    two_sided: float


def ks_quantile(n: int, alpha: float, sided: str = "two") -> float:
    """DKW upper quantile of the Kolmogorov-Smirnov statistic.

    The one-/two-sided supremum distance between the empirical and true
    distribution functions of n i.i.d. variables exceeds the returned value
    with probability at most alpha: sqrt(log(2/alpha)/(2n)) two-sided,
    sqrt(log(1/alpha)/(2n)) one-sided.

    Args:
        n: Sample size, n >= 1.
        alpha: Exceedance probability in (0, 1).
        sided: "one" or "two".

    Returns:
        The distribution-free quantile; conservative but exact-rate.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"sample size must be a positive integer, got {n!r}")
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"exceedance probability must lie in (0, 1), got {alpha!r}")
    if sided not in ("one", "two"):
        raise ValueError(f"sided must be 'one' or 'two', got {sided!r}")
    numerator = math.log(2.0 / alpha) if sided == "two" else math.log(1.0 / alpha)
    return math.sqrt(numerator / (2.0 * n))


def ks_quantiles(n: int, a: float) -> KSQuantiles:
    """Both KS quantiles at level a/2, as consumed by the variance bracket.

    Args:
        n: Sample size, n >= 1.
        a: Bracket miscoverage budget in (0, 1); each quantile is taken at
            exceedance level a/2.

    Returns:
        KSQuantiles evaluated at a/2.
    """
    return KSQuantiles(
        one_sided=ks_quantile(n, a / 2.0, "one"),
        two_sided=ks_quantile(n, a / 2.0, "two"),
    )


def _validate_summary_range(summary: SampleSummary, r: float) -> None:
    """Check the range-dependent summary invariants against r."""
    if not (r > 0.0 and math.isfinite(r)):
        raise ValueError(f"range must be positive and finite, got {r!r}")
    if not (0.0 <= summary.mean <= r):
        raise ValueError(f"sample mean {summary.mean!r} outside the support [0, {r!r}]")
    if summary.emp_var > 0.25 * r * r * (1.0 + _VAR_SLACK):
        raise ValueError(
            f"empirical variance {summary.emp_var!r} exceeds r^2/4 = {0.25 * r * r!r}"
        )


def sigma_lower(r: float, emp_var: float, ks_two: float) -> float:
    """Lower confidence limit for the standard deviation.

    Solves the worst case of the deviation emp_var >= sigma^2 - (range
    slack) * ks_two for sigma, giving sqrt of

        r^2/4 - ((r q + sqrt(r^2 - (1-q) 4 emp_var)) / (1-q))^2 / 4

    at q = ks_two, clamped at 0.  At q = 0 the expression cancels exactly to
    the empirical standard deviation, which is returned directly.

    Args:
        r: Support range, r > 0.
        emp_var: Empirical variance, 0 <= emp_var <= r^2/4.
        ks_two: Two-sided KS quantile at the bracket's level; >= 1 yields the
            vacuous limit 0.

    Returns:
        The lower limit, in [0, r/2].
    """
    if not (r > 0.0 and math.isfinite(r)):
        raise ValueError(f"range must be positive and finite, got {r!r}")
    if not (0.0 <= emp_var <= 0.25 * r * r * (1.0 + _VAR_SLACK)):
        raise ValueError(f"empirical variance must lie in [0, r^2/4], got {emp_var!r}")
    if ks_two < 0.0:
        raise ValueError(f"KS quantile must be nonnegative, got {ks_two!r}")
    if ks_two >= 1.0:
        return 0.0
    if ks_two == 0.0:
        return math.sqrt(emp_var)
    root = math.sqrt(max(r * r - (1.0 - ks_two) * 4.0 * emp_var, 0.0))
    inner = (r * ks_two + root) / (1.0 - ks_two)
    return math.sqrt(max(0.25 * r * r - 0.25 * inner * inner, 0.0))


def sigma_upper(
    r: float, summary: SampleSummary, ks: KSQuantiles, a: float, sided: str
) -> float:
    """Upper confidence limit for the standard deviation.

    The minimum of two estimates: a variance-concentration form

        sqrt(n/(n-1)) sig_hat + r sqrt(2 log(2/a) / (n-1))

    (the deviation term scaled by r so the unit-range display applies to a
    general support length) and a KS form

        sqrt(emp_var + rsig(r, sigma_lower)^2 ks_two + (r ks_one-or-two)^2),

    where the squared KS term uses the one-sided quantile for a one-sided
    target quantile bound and the two-sided quantile otherwise.  The result
    is clamped above at r/2, the largest admissible standard deviation.

    Args:
        r: Support range, r > 0.
        summary: Sample statistics with n >= 2.
        ks: KS quantiles at the bracket's level (a/2 each side).
        a: Bracket miscoverage budget in (0, 1).
        sided: "one" or "two", matching the downstream quantile bound.

    Returns:
        The upper limit, in (0, r/2].
    """
    _validate_summary_range(summary, r)
    if summary.n < 2:
        raise ValueError(f"upper variance estimate needs n >= 2, got n={summary.n!r}")
    if not (0.0 < a < 1.0):
        raise ValueError(f"bracket budget must lie in (0, 1), got {a!r}")
    if sided not in ("one", "two"):
        raise ValueError(f"sided must be 'one' or 'two', got {sided!r}")
    n = summary.n
    sig_hat = math.sqrt(summary.emp_var)
    cand1 = math.sqrt(n / (n - 1.0)) * sig_hat + r * math.sqrt(
        2.0 * math.log(2.0 / a) / (n - 1.0)
    )
    sig_lo = sigma_lower(r, summary.emp_var, ks.two_sided)
    r_sigma_lo = 0.5 * r + 0.5 * math.sqrt(max(r * r - 4.0 * sig_lo * sig_lo, 0.0))
    ks_term = ks.one_sided if sided == "one" else ks.two_sided
    cand2_sq = summary.emp_var + r_sigma_lo**2 * ks.two_sided + (r * ks_term) ** 2
    return min(cand1, math.sqrt(cand2_sq), 0.5 * r)


def variance_bracket(summary: SampleSummary, r: float, a: float, sided: str) -> VarianceBracket:
    """Standard-deviation bracket covering the truth except with probability a.

    Combines sigma_lower and sigma_upper at KS level a/2 each.  If the lower
    limit lands above the (r/2-clamped) upper limit, the bracket collapses to
    the point {sigma_hi}.

    Args:
        summary: Sample statistics with n >= 2.
        r: Support range, r > 0.
        a: Miscoverage budget in (0, 1).
        sided: "one" or "two", matching the downstream quantile bound.

    Returns:
        VarianceBracket with sigma_lo <= sigma_hi <= r/2.
    """
    ks = ks_quantiles(summary.n, a)
    hi = sigma_upper(r, summary, ks, a, sided)
    lo = min(sigma_lower(r, summary.emp_var, ks.two_sided), hi)
    return VarianceBracket(sigma_lo=lo, sigma_hi=hi, a=a)


def default_a(delta: float, n: int, sided: str) -> float:
    """Default bracket budget (delta/sqrt(n)) Phi^{-1}(1 - delta[/2]).

    Shrinks like 1/sqrt(n), slowly enough that log(a)/n -> 0, which is what
    the efficiency of the empirical bound requires.  If the displayed value
    falls outside (0, delta) -- possible only at very small n or delta >= 1/2
    -- it is clamped to delta/2 with a warning.

    Args:
        delta: Total miscoverage level in (0, 1).
        n: Sample size, n >= 1.
        sided: "one" or "two" (the two-sided form spends at Phi^{-1}(1 - delta/2)).

    Returns:
        A budget in (0, delta).
    """
    if not (0.0 < delta < 1.0):
        raise ValueError(f"miscoverage level must lie in (0, 1), got {delta!r}")
    if int(n) != n or n < 1:
        raise ValueError(f"sample size must be a positive integer, got {n!r}")
    if sided not in ("one", "two"):
        raise ValueError(f"sided must be 'one' or 'two', got {sided!r}")
    level = 1.0 - delta if sided == "one" else 1.0 - delta / 2.0
    a = delta / math.sqrt(n) * std_normal_quantile(level)
    if not (0.0 < a < delta):
        warnings.warn(
            f"default bracket budget {a!r} outside (0, {delta!r}); using delta/2",
            stacklevel=2,
        )
        return delta / 2.0
    return a


def _sup_on_brackets(
    f_batch: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    extra: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-lane maximum of f over [lo, hi], with extra as a free candidate.

    Evaluates f on a 65-point grid per lane (collapsing to the single point
    hi when the lane's bracket is degenerate) plus the extra candidate, then
    runs a fixed number of golden-section steps inside the grid interval
    around each lane's grid maximum.  f_batch maps a flat vector of sigmas to
    the same-shape vector of values; calls are chunked so no single call
    exceeds the vectorized kernels' comfortable size.

    Returns:
        (argmax sigma, max value) per lane, over every point evaluated.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    extra = np.asarray(extra, dtype=float)
    lanes = lo.shape[0]

    def evaluate(sigma_flat: np.ndarray) -> np.ndarray:
        out = np.empty_like(sigma_flat)
        for start in range(0, sigma_flat.shape[0], _EVAL_CHUNK):
            stop = start + _EVAL_CHUNK
            out[start:stop] = f_batch(sigma_flat[start:stop])
        return out

    frac = np.linspace(0.0, 1.0, _SUP_GRID_POINTS)
    grid = lo[None, :] + (hi - lo)[None, :] * frac[:, None]
    points = np.vstack([grid, extra[None, :]])
    values = evaluate(points.reshape(-1)).reshape(points.shape)

    best_idx = np.argmax(values, axis=0)
    best_sigma = np.take_along_axis(points, best_idx[None, :], axis=0)[0]
    best_value = np.take_along_axis(values, best_idx[None, :], axis=0)[0]

    # Refine inside the grid cells adjacent to the best grid point.
    grid_idx = np.argmax(values[:_SUP_GRID_POINTS], axis=0)
    left = grid[np.maximum(grid_idx - 1, 0), np.arange(lanes)]
    right = grid[np.minimum(grid_idx + 1, _SUP_GRID_POINTS - 1), np.arange(lanes)]
    span = right - left
    x1 = right - _GOLDEN * span
    x2 = left + _GOLDEN * span
    f1 = evaluate(x1)
    f2 = evaluate(x2)
    for _ in range(_SUP_REFINE_ITERS):
        keep_left = f1 >= f2
        right = np.where(keep_left, x2, right)
        left = np.where(keep_left, left, x1)
        span = right - left
        x1_new = right - _GOLDEN * span
        x2_new = left + _GOLDEN * span
        # The surviving interior point changes role; only one fresh value is
        # needed per lane per step.
        f2 = np.where(keep_left, f1, f2)
        x_fresh = np.where(keep_left, x1_new, x2_new)
        f_fresh = evaluate(x_fresh)
        f1 = np.where(keep_left, f_fresh, f2)
        f2 = np.where(keep_left, f2, f_fresh)
        x1 = x1_new
        x2 = x2_new
    for x_cand, f_cand in ((x1, f1), (x2, f2)):
        better = f_cand > best_value
        best_sigma = np.where(better, x_cand, best_sigma)
        best_value = np.where(better, f_cand, best_value)
    return best_sigma, best_value


def empirical_quantile(
    summary: SampleSummary,
    r: float,
    delta: float,
    a: float,
    base_q: Callable[[float, float, float], float],
    sided: str,
) -> float:
    """Convert a known-variance quantile bound into an empirical one.

    Spends a of the budget on a variance bracket, then returns

        sup over sigma_tilde in [sigma_lo, sigma_hi] of base_q(r, delta - a, sigma_tilde)

    computed by grid search with golden-section refinement (the bracket
    endpoints and the empirical standard deviation are always included as
    candidates).  Valid at level delta whenever base_q is valid at its level
    for every admissible sigma.

    Args:
        summary: Sample statistics with n >= 2.
        r: Support range, r > 0.
        delta: Total miscoverage level in (0, 1).
        a: Bracket budget in (0, delta).
        base_q: Known-variance quantile bound (r, level, sigma) -> value on
            the root-n deviation scale, with sidedness matching `sided`.
        sided: "one" or "two".

    Returns:
        The empirical quantile bound on the root-n deviation scale.
    """
    _validate_summary_range(summary, r)
    if not (0.0 < a < delta < 1.0):
        raise ValueError(f"need 0 < a < delta < 1, got a={a!r}, delta={delta!r}")
    bracket = variance_bracket(summary, r, a, sided)
    level = delta - a
    eval_lo = min(max(bracket.sigma_lo, _SIGMA_FLOOR_FRAC * r), bracket.sigma_hi)
    sig_hat = math.sqrt(summary.emp_var)
    extra = min(max(sig_hat, eval_lo), bracket.sigma_hi)

    def f_batch(sigmas: np.ndarray) -> np.ndarray:
        return np.array([base_q(r, level, float(s)) for s in sigmas])

    _, value = _sup_on_brackets(
        f_batch,
        np.array([eval_lo]),
        np.array([bracket.sigma_hi]),
        np.array([extra]),
    )
    return float(value[0])


def _bracket_lanes(
    n: int, r: float, emp_vars: np.ndarray, a: float, sided: str
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized variance bracket for per-lane empirical variances."""
    q2 = ks_quantile(n, a / 2.0, "two")
    q1 = ks_quantile(n, a / 2.0, "one")
    sig_hat = np.sqrt(emp_vars)
    if q2 >= 1.0:
        lo = np.zeros_like(emp_vars)
    else:
        root = np.sqrt(np.maximum(r * r - (1.0 - q2) * 4.0 * emp_vars, 0.0))
        inner = (r * q2 + root) / (1.0 - q2)
        lo = np.sqrt(np.maximum(0.25 * r * r - 0.25 * inner * inner, 0.0))
    cand1 = math.sqrt(n / (n - 1.0)) * sig_hat + r * math.sqrt(
        2.0 * math.log(2.0 / a) / (n - 1.0)
    )
    r_sigma_lo = 0.5 * r + 0.5 * np.sqrt(np.maximum(r * r - 4.0 * lo * lo, 0.0))
    ks_term = q1 if sided == "one" else q2
    cand2 = np.sqrt(emp_vars + r_sigma_lo**2 * q2 + (r * ks_term) ** 2)
    hi = np.minimum(np.minimum(cand1, cand2), 0.5 * r)
    lo = np.minimum(lo, hi)
    return lo, hi


def _ebe_quantile_lanes(
    n: int,
    r: float,
    emp_vars: np.ndarray,
    delta: float,
    sided: str,
    a: float | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, float]:
    """Efficient empirical quantiles for many samples sharing (n, r, delta).

    Lanes with equal empirical variance share a bracket and therefore a
    supremum; the search runs once per distinct variance.  The base bound is
    the Wasserstein-based efficient quantile with default auxiliaries,
    evaluated through its vectorized kernel.

    Returns:
        (values, sigma_star, sigma_lo, sigma_hi) per input lane, plus the
        bracket budget actually used.
    """
    emp_vars = np.asarray(emp_vars, dtype=float)
    if a is None:
        a = default_a(delta, n, sided)
    if not (0.0 < a < delta < 1.0):
        raise ValueError(f"need 0 < a < delta < 1, got a={a!r}, delta={delta!r}")
    level = delta - a
    distinct, inverse = np.unique(emp_vars, return_inverse=True)
    lo, hi = _bracket_lanes(n, r, distinct, a, sided)
    eval_lo = np.minimum(np.maximum(lo, _SIGMA_FLOOR_FRAC * r), hi)
    extra = np.clip(np.sqrt(distinct), eval_lo, hi)

    def f_batch(sigmas: np.ndarray) -> np.ndarray:
        return wasserstein._quantile_lanes(n, r, sigmas, level, sided)

    sigma_star, values = _sup_on_brackets(f_batch, eval_lo, hi, extra)
    return values[inverse], sigma_star[inverse], lo[inverse], hi[inverse], a


def efficient_ebe_quantile(
    summary: SampleSummary,
    r: float,
    delta: float,
    sided: str = "one",
    a: float | None = None,
) -> BoundResult:
    """Efficient empirical quantile bound for the root-n scaled deviation.

    The full empirical pipeline: default bracket budget, variance bracket,
    and the supremum of the efficient known-variance quantile (with default
    auxiliary bounds) over the bracket.  Valid at level delta for any i.i.d.
    sample on a range-r support; asymptotically matches the Gaussian
    quantile sigma Phi^{-1}(1 - delta[/2]).

    Args:
        summary: Sample statistics with n >= 2.
        r: Support range, r > 0.
        delta: Miscoverage level in (0, 1).
        sided: "one" (P(S_n > q) <= delta) or "two" (P(|S_n| > q) <= delta).
        a: Optional bracket budget override in (0, delta); defaults to
            default_a(delta, n, sided).

    Returns:
        BoundResult whose settings record the budget, the bracket, and the
        maximizing sigma; winner is the base bound's winner at that sigma.
    """
    _validate_summary_range(summary, r)
    if summary.n < 2:
        raise ValueError(f"empirical quantile needs n >= 2, got n={summary.n!r}")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"miscoverage level must lie in (0, 1), got {delta!r}")
    if sided not in ("one", "two"):
        raise ValueError(f"sided must be 'one' or 'two', got {sided!r}")
    values, sigma_star, lo, hi, a_used = _ebe_quantile_lanes(
        summary.n, r, np.array([summary.emp_var]), delta, sided, a
    )
    sig_star = float(sigma_star[0])
    settings: dict[str, float] = {
        "a": a_used,
        "sigma_lo": float(lo[0]),
        "sigma_hi": float(hi[0]),
        "sigma_star": sig_star,
    }
    if sig_star > 0.0:
        from effconc.model import Problem

        at_star = wasserstein.wass_quantile(
            Problem(n=summary.n, r=r, sigma=sig_star), delta - a_used, sided=sided
        )
        winner = at_star.winner
        if at_star.settings:
            settings.update(at_star.settings)
    else:
        winner = "degenerate_bracket"
    return BoundResult(value=float(values[0]), winner=winner, settings=settings)


def empirical_bernstein_quantile(summary: SampleSummary, r: float, delta: float) -> float:
    """Empirical Bernstein quantile bound on the root-n deviation scale.

    The closed form

        sig_hat sqrt(log(2/delta) n/(n-1)) + (7/3) r log(2/delta) sqrt(n)/(n-1),

    a one-sided bound: P(S_n > value) <= delta.  Its large-n limit is
    sig_hat sqrt(log(2/delta)), strictly above the efficient limit
    sig_hat Phi^{-1}(1 - delta) for small delta.

    Args:
        summary: Sample statistics with n >= 2.
        r: Support range, r > 0.
        delta: Miscoverage level in (0, 1).

    Returns:
        The quantile bound.
    """
    _validate_summary_range(summary, r)
    if summary.n < 2:
        raise ValueError(f"empirical Bernstein bound needs n >= 2, got n={summary.n!r}")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"miscoverage level must lie in (0, 1), got {delta!r}")
    n = summary.n
    log_term = math.log(2.0 / delta)
    sig_hat = math.sqrt(summary.emp_var)
    return sig_hat * math.sqrt(log_term * n / (n - 1.0)) + (
        7.0 / 3.0
    ) * r * log_term * math.sqrt(n) / (n - 1.0)
