"""Efficient Gaussian-plus-correction tail bounds from a zero-bias coupling.

The central object is a finite-sample bound on P(S_n > sigma*u + r/sqrt(n))
of the form Phi^c(u) + O(r/(sigma sqrt(n))), where S_n is the centered,
root-n scaled sample mean.  The correction term involves three ingredients
computed here: the function h_u, the margin delta_prime, and the shifted
tail majorant Q_n.  A free mixing parameter lambda in [0, 1] trades the two
correction pieces off against each other; every lambda yields a valid bound,
so the optimizers below only search a grid for tightness.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from effconc.model import Problem, derived, rsig_at
from effconc.numerics import _log_phi, _log_phi_c, _log_scaled_phi_c, _phi, _phi_c

__all__ = [
    "ZeroBiasTerms",
    "h_u",
    "b_growth",
    "delta_prime",
    "q_n",
    "zero_bias_tail",
    "alt_zero_bias_tail",
    "zero_bias_tail_at_threshold",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# lambda is optimized over this fixed grid; the bound is valid at every
# lambda, so grid coarseness affects tightness only, never validity.
LAMBDA_GRID = np.linspace(0.0, 1.0, 33)


@dataclass(frozen=True)
class ZeroBiasTerms:
    """Intermediate quantities of the zero-bias tail bound at one (u, lambda).

    Attributes:
        h_lambda_u: h_u evaluated at lambda*u.
        h_u_u: h_u evaluated at u itself.
        delta_prime: The margin delta'_u appearing in the denominator.
        q_n: The shifted tail majorant Q_n at lambda*sigma*u.
        delta_n: The shift r_sigma / (4 sqrt(n)).
        v_up_sq: Inflated variance proxy sigma^2 + (r_sigma^2 - 6 sigma^2)/(9n).
        v_low_sq: Deflated variance proxy sigma^2 (1 - 89/(144 n)).
        beta_n: The additive remainder entering Q_n's third branch.
    """

    h_lambda_u: float
    h_u_u: float
    delta_prime: float
    q_n: float
    delta_n: float
    v_up_sq: float
    v_low_sq: float
    beta_n: float


# --------------------------------------------------------------------------
# Scalar building blocks
# --------------------------------------------------------------------------

def _h_u_vec(w: np.ndarray, u: float) -> np.ndarray:
    """h_u(w) = (w + (1+w^2) sqrt(2 pi) e^{w^2/2} Phi(w)) Phi^c(u), vectorized.

    The product e^{w^2/2} Phi(w) Phi^c(u) is evaluated in log space: for w
    near u both large, the exponential overflows while the tail underflows,
    but their log-sum stays moderate.
    """
    w = np.asarray(w, dtype=float)
    log_phic_u = float(_log_phi_c(u))
    # w^2/2 + log Phi^c(u) is written as (w-u)(w+u)/2 + [u^2/2 + log Phi^c(u)]
    # with the bracket taken from the scaled tail: both pieces stay moderate
    # for every w <= u, where the direct sum would cancel catastrophically.
    log_prod = _log_phi(w) + 0.5 * (w - u) * (w + u) + float(_log_scaled_phi_c(u))
    return w * math.exp(log_phic_u) + (1.0 + w * w) * _SQRT_2PI * np.exp(log_prod)


def h_u(w: float, u: float) -> float:
    """Tilted Gaussian weight (w + (1+w^2) sqrt(2pi) e^{w^2/2} Phi(w)) Phi^c(u).

    Args:
        w: Evaluation point, w <= u.
        u: Tail threshold, u >= 0.

    Returns:
        The (nonnegative) weight; finite for all w <= u thanks to log-space
        evaluation of the exp-times-tail product.
    """
    if w > u:
        raise ValueError(f"h_u is only used for w <= u, got w={w!r} > u={u!r}")
    return float(_h_u_vec(np.asarray([w]), u)[0])


def b_growth(w: float) -> float:
    """Lower-bound slope 2/(w + s) - 8w/(pi (w + s)^2), s = sqrt(w^2 + 8/pi).

    Positive and decreasing on [0, inf); equals sqrt(pi/2) at 0 and decays
    to 0.  Used to anchor the margin delta_prime.

    Args:
        w: Nonnegative evaluation point.

    Returns:
        The slope value.
    """
    if w < 0:
        raise ValueError(f"b_growth needs w >= 0, got {w!r}")
    s = w + math.sqrt(w * w + 8.0 / math.pi)
    return 2.0 / s - 8.0 * w / (math.pi * s * s)


def delta_prime(u: float) -> float:
    """Margin delta'_u = h_u(u) - b_growth(u) * Phi(u).

    Args:
        u: Tail threshold, u >= 0.

    Returns:
        The margin; zero at u = 0 and observed positive on scanned grids.
    """
    if u < 0:
        raise ValueError(f"delta_prime needs u >= 0, got {u!r}")
    return h_u(u, u) - b_growth(u) * float(_phi(u))


# --------------------------------------------------------------------------
# Shifted tail majorant Q_n
# --------------------------------------------------------------------------

def _q_n_vec(n: int, r: float, sigma: float, u_args: np.ndarray) -> np.ndarray:
    """Q_n evaluated at an array of thresholds (same problem parameters)."""
    prob = Problem(n=n, r=r, sigma=sigma)
    d = derived(prob)
    u_args = np.asarray(u_args, dtype=float)

    delta_n = d.r_sigma / (4.0 * d.sqrt_n)
    v_up_sq = sigma * sigma + (d.r_sigma ** 2 - 6.0 * sigma * sigma) / (9.0 * n)
    v_low_sq = sigma * sigma * (1.0 - 89.0 / (144.0 * n))
    beta_n = _beta_n(prob, d.r_sigma)

    gap = np.maximum(u_args - delta_n, 0.0)
    branch_hoeff = np.exp(-2.0 * gap * gap / (r * r))
    branch_bern = np.exp(-gap * gap / (2.0 * (v_up_sq + d.r_sigma * gap / (3.0 * d.sqrt_n))))
    out = np.minimum(branch_hoeff, branch_bern)
    if v_low_sq > 0.0:
        v_low = math.sqrt(v_low_sq)
        branch_gauss = _phi_c((u_args - delta_n) / v_low) + 0.56 * (
            d.r_sigma * v_up_sq + beta_n
        ) / (d.sqrt_n * v_low ** 3)
        out = np.minimum(out, branch_gauss)
    return np.clip(out, 0.0, 1.0)


def _beta_n(prob: Problem, r_sigma: float) -> float:
    """Remainder beta_n = min(r_sigma/4, rsig_at(r, sqrt(55) sigma/12) - r_sigma)
    times (sigma^2/(3n) + r_sigma^2/(9n))."""
    deflated = rsig_at(prob.r, math.sqrt(55.0) * prob.sigma / 12.0)
    lead = min(0.25 * r_sigma, deflated - r_sigma)
    return lead * (prob.sigma ** 2 / (3.0 * prob.n) + r_sigma ** 2 / (9.0 * prob.n))


def q_n(prob: Problem, u_arg: float) -> float:
    """Shifted tail majorant: the minimum of three sub-Gaussian-to-Gaussian
    branches evaluated at threshold u_arg (any real; the shift clamps).

    Args:
        prob: Problem parameters.
        u_arg: Threshold on the scale of S_n (not standardized).

    Returns:
        A probability in [0, 1].
    """
    return float(_q_n_vec(prob.n, prob.r, prob.sigma, np.asarray([u_arg]))[0])


def zero_bias_terms(prob: Problem, u: float, lam: float) -> ZeroBiasTerms:
    """All intermediate quantities of the bound at one (u, lambda) pair."""
    d = derived(prob)
    return ZeroBiasTerms(
        h_lambda_u=h_u(lam * u, u),
        h_u_u=h_u(u, u),
        delta_prime=delta_prime(u),
        q_n=q_n(prob, lam * prob.sigma * u),
        delta_n=d.r_sigma / (4.0 * d.sqrt_n),
        v_up_sq=prob.sigma ** 2 + (d.r_sigma ** 2 - 6.0 * prob.sigma ** 2) / (9.0 * prob.n),
        v_low_sq=prob.sigma ** 2 * (1.0 - 89.0 / (144.0 * prob.n)),
        beta_n=_beta_n(prob, d.r_sigma),
    )


# --------------------------------------------------------------------------
# The two tail bounds
# --------------------------------------------------------------------------

def _correction_vec(
    prob: Problem,
    u: float,
    lams: np.ndarray,
    alt: bool,
) -> np.ndarray:
    """Bound values over a lambda grid for either variant.

    The main variant bounds P(S_n > sigma u + r/sqrt(n)); the alternative
    bounds P(S_n > sigma u sqrt(n+1)/sqrt(n) + r_sigma/sqrt(n)).  Both share
    the structure Phi^c(u) + prefactor * [h_u(lam u) - delta' Phi^c(u) +
    (h_u(u) - h_u(lam u)) Q(.)].
    """
    d = derived(prob)
    dp = delta_prime(u)
    if alt:
        denom = prob.sigma * math.sqrt(prob.n + 1.0) + prob.r * dp
        q_scale = prob.sigma * d.sqrt_n / math.sqrt(prob.n + 1.0)
        q_vals = _q_n_vec(prob.n + 1, prob.r, prob.sigma, lams * q_scale * u)
    else:
        denom = prob.sigma * d.sqrt_n + prob.r * dp
        q_vals = _q_n_vec(prob.n, prob.r, prob.sigma, lams * prob.sigma * u)
    if denom <= 0.0:
        warnings.warn(
            f"zero-bias denominator nonpositive at u={u} (delta_prime={dp}); returning 1",
            RuntimeWarning,
        )
        return np.ones_like(lams)
    phic_u = float(_phi_c(u))
    h_vals = _h_u_vec(lams * u, u)
    h_at_u = h_u(u, u)
    vals = phic_u + (prob.r / denom) * (h_vals - dp * phic_u + (h_at_u - h_vals) * q_vals)
    return np.clip(vals, 0.0, 1.0)


def zero_bias_tail(prob: Problem, u: float, lam: float) -> float:
    """Bound on P(S_n > sigma*u + r/sqrt(n)) at a fixed mixing parameter.

    Args:
        prob: Problem parameters.
        u: Standardized threshold, u >= 0.
        lam: Mixing parameter in [0, 1]; every value gives a valid bound.

    Returns:
        A probability in [0, 1].
    """
    if u < 0:
        raise ValueError(f"threshold must be nonnegative, got {u!r}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"mixing parameter must lie in [0, 1], got {lam!r}")
    return float(_correction_vec(prob, u, np.asarray([lam]), alt=False)[0])


def alt_zero_bias_tail(prob: Problem, u: float, lam: float) -> float:
    """Bound on P(S_n > sigma*u*sqrt(n+1)/sqrt(n) + r_sigma/sqrt(n)).

    Often tighter than zero_bias_tail thanks to the smaller additive shift
    r_sigma and the (n+1)-sample majorant; same structure otherwise.

    Args:
        prob: Problem parameters.
        u: Standardized threshold, u >= 0.
        lam: Mixing parameter in [0, 1].

    Returns:
        A probability in [0, 1].
    """
    if u < 0:
        raise ValueError(f"threshold must be nonnegative, got {u!r}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"mixing parameter must lie in [0, 1], got {lam!r}")
    return float(_correction_vec(prob, u, np.asarray([lam]), alt=True)[0])


def _min_over_lambda(prob: Problem, u: float, alt: bool) -> tuple[float, float]:
    """Grid-minimize either variant over lambda; returns (value, lambda*)."""
    vals = _correction_vec(prob, u, LAMBDA_GRID, alt=alt)
    i = int(np.argmin(vals))
    return float(vals[i]), float(LAMBDA_GRID[i])


def _variant_u_for_threshold(prob: Problem, t: float, alt: bool) -> float | None:
    """Solve the variant's threshold equation for u; None when u < 0."""
    d = derived(prob)
    if alt:
        u = (t - d.r_sigma / d.sqrt_n) * d.sqrt_n / (prob.sigma * math.sqrt(prob.n + 1.0))
    else:
        u = (t - prob.r / d.sqrt_n) / prob.sigma
    return u if u >= 0.0 else None


def zero_bias_tail_at_threshold(prob: Problem, t: float) -> float:
    """Bound on P(S_n > t) from the best applicable zero-bias variant.

    Re-expresses both variants as bounds at the raw threshold t by solving
    each variant's threshold equation for u, optimizes lambda over the grid,
    and takes the minimum.  Thresholds below both variants' minimal reach
    (u = 0) return the trivial bound 1.

    Args:
        prob: Problem parameters.
        t: Raw threshold for S_n; any real.

    Returns:
        A probability in [0, 1].
    """
    best = 1.0
    for alt in (False, True):
        u = _variant_u_for_threshold(prob, t, alt)
        if u is not None:
            val, _ = _min_over_lambda(prob, u, alt=alt)
            best = min(best, val)
    return best


# --------------------------------------------------------------------------
# Lane-vectorized kernel
# --------------------------------------------------------------------------
# The empirical pipeline evaluates the default tail bound at many
# (sigma, threshold) pairs per call, so the scalar path above is mirrored
# here with every quantity carried per lane.  The arithmetic is identical;
# only the array layout differs (lambda grid on axis 0, lanes on axis 1).

def _h_u_lanes(w: np.ndarray, u: np.ndarray) -> np.ndarray:
    """h_u(w) elementwise for per-lane thresholds; w broadcasts against u.

    Same cancellation-free split as the scalar form: see _h_u_vec.
    """
    log_phic_u = _log_phi_c(u)
    log_prod = _log_phi(w) + 0.5 * (w - u) * (w + u) + _log_scaled_phi_c(u)
    return w * np.exp(log_phic_u) + (1.0 + w * w) * _SQRT_2PI * np.exp(log_prod)


def _b_growth_lanes(w: np.ndarray) -> np.ndarray:
    s = w + np.sqrt(w * w + 8.0 / math.pi)
    return 2.0 / s - 8.0 * w / (math.pi * s * s)


def _delta_prime_lanes(u: np.ndarray) -> np.ndarray:
    return _h_u_lanes(u, u) - _b_growth_lanes(u) * _phi(u)


def _q_n_lanes(n: int, r: float, sigmas: np.ndarray, u_args: np.ndarray) -> np.ndarray:
    """Q_n with per-lane sigma; u_args broadcasts against sigmas' last axis."""
    sq_n = math.sqrt(n)
    r_sigma = 0.5 * r + 0.5 * np.sqrt(np.maximum(r * r - 4.0 * sigmas * sigmas, 0.0))
    var = sigmas * sigmas
    delta_n = r_sigma / (4.0 * sq_n)
    v_up_sq = var + (r_sigma ** 2 - 6.0 * var) / (9.0 * n)
    v_low_sq = var * (1.0 - 89.0 / (144.0 * n))
    deflated = 0.5 * r + 0.5 * np.sqrt(
        np.maximum(r * r - 4.0 * (55.0 / 144.0) * var, 0.0)
    )
    beta_n = np.minimum(0.25 * r_sigma, deflated - r_sigma) * (
        var / (3.0 * n) + r_sigma ** 2 / (9.0 * n)
    )

    gap = np.maximum(u_args - delta_n, 0.0)
    branch_hoeff = np.exp(-2.0 * gap * gap / (r * r))
    branch_bern = np.exp(-gap * gap / (2.0 * (v_up_sq + r_sigma * gap / (3.0 * sq_n))))
    v_low = np.sqrt(v_low_sq)
    branch_gauss = _phi_c((u_args - delta_n) / v_low) + 0.56 * (
        r_sigma * v_up_sq + beta_n
    ) / (sq_n * v_low ** 3)
    return np.clip(np.minimum(np.minimum(branch_hoeff, branch_bern), branch_gauss), 0.0, 1.0)


def _tail_at_threshold_lanes(
    n: int, r: float, sigmas: np.ndarray, thresholds: np.ndarray
) -> np.ndarray:
    """zero_bias_tail_at_threshold across lanes of (sigma, threshold).

    Args:
        n: Shared sample size.
        r: Shared range bound.
        sigmas: Per-lane standard deviations, each in (0, r/2].
        thresholds: Per-lane raw thresholds for S_n.

    Returns:
        Per-lane probabilities, the minimum over both variants and 1.
    """
    sigmas = np.asarray(sigmas, dtype=float)
    thresholds = np.asarray(thresholds, dtype=float)
    sq_n = math.sqrt(n)
    r_sigma = 0.5 * r + 0.5 * np.sqrt(np.maximum(r * r - 4.0 * sigmas * sigmas, 0.0))
    out = np.ones_like(sigmas)
    lam = LAMBDA_GRID[:, None]

    for alt in (False, True):
        if alt:
            u = (thresholds - r_sigma / sq_n) * sq_n / (sigmas * math.sqrt(n + 1.0))
        else:
            u = (thresholds - r / sq_n) / sigmas
        mask = u >= 0.0
        if not np.any(mask):
            continue
        u_m = u[mask]
        sig_m = sigmas[mask]
        dp = _delta_prime_lanes(u_m)
        if alt:
            denom = sig_m * math.sqrt(n + 1.0) + r * dp
            q_scale = sig_m * sq_n / math.sqrt(n + 1.0)
            q_vals = _q_n_lanes(n + 1, r, sig_m, lam * q_scale * u_m)
        else:
            denom = sig_m * sq_n + r * dp
            q_vals = _q_n_lanes(n, r, sig_m, lam * sig_m * u_m)
        phic_u = _phi_c(u_m)
        h_vals = _h_u_lanes(lam * u_m, u_m)
        h_at_u = _h_u_lanes(u_m, u_m)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = phic_u + (r / denom) * (
                h_vals - dp * phic_u + (h_at_u - h_vals) * q_vals
            )
        vals = np.where(np.isnan(vals) | (denom <= 0.0), 1.0, vals)
        variant = np.min(np.clip(vals, 0.0, 1.0), axis=0)
        out[mask] = np.minimum(out[mask], variant)
    return out
