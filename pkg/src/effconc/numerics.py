"""Special functions and scalar search primitives shared by every bound module.

The public functions follow scalar contracts; array-valued private helpers
(prefixed ``_``) back the hot paths so grid searches can run vectorized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate as _sp_integrate
from scipy import special as _sp

__all__ = [
    "NumericsError",
    "Tolerance",
    "std_normal_cdf_c",
    "std_normal_quantile",
    "normal_pnorm",
    "binomial_pnorm",
    "hermite_moment_bound",
    "integrate",
    "minimize_scalar",
    "invert_monotone_tail",
]

_SQRT2 = math.sqrt(2.0)
_GRID_POINTS = 65
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

# Exact-summation cutoff for binomial moments; beyond this a windowed sum with
# a conservative remainder term is used.
_BINOM_EXACT_MAX_N = 2_000
_BINOM_WINDOW_SIGMAS = 12.0
_BINOM_TAIL_MARGIN = 36.0
_BINOM_CHUNK_ELEMS = 4_194_304


class NumericsError(RuntimeError):
    """Raised when a numeric routine cannot meet its accuracy contract."""


@dataclass(frozen=True)
class Tolerance:
    """Accuracy targets for iterative routines.

    Attributes:
        abs_tol: Absolute error target.
        rel_tol: Relative error target.
        max_iter: Iteration cap before the routine reports failure.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_iter: int = 200

    def __post_init__(self) -> None:
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


DEFAULT_TOL = Tolerance()


# --------------------------------------------------------------------------
# Standard normal distribution
# --------------------------------------------------------------------------

def _phi(x):
    """Standard normal CDF, array-capable."""
    return _sp.ndtr(np.asarray(x, dtype=float))


def _phi_c(x):
    """Standard normal upper tail 1 - Phi(x), array-capable.

    Uses the complementary error function so the relative error stays at
    machine precision deep into the tail instead of cancelling against 1.
    """
    x = np.asarray(x, dtype=float)
    return 0.5 * _sp.erfc(x / _SQRT2)


def _log_phi(x):
    """log Phi(x), array-capable and overflow-safe for very negative x."""
    return _sp.log_ndtr(np.asarray(x, dtype=float))


def _log_phi_c(x):
    """log (1 - Phi(x)), array-capable and accurate for very large x."""
    return _sp.log_ndtr(-np.asarray(x, dtype=float))


def _log_scaled_phi_c(x):
    """log of e^{x^2/2} (1 - Phi(x)) for x >= 0, array-capable.

    Evaluated through the scaled complementary error function, so the
    x^2/2 growth and the tail decay cancel analytically instead of being
    subtracted as floats; adding x^2/2-sized terms to _log_phi_c would lose
    everything below one ulp of x^2/2 once x is large.
    """
    return np.log(0.5 * _sp.erfcx(np.asarray(x, dtype=float) / _SQRT2))


def _norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def std_normal_cdf_c(x: float) -> float:
    """Upper tail probability of the standard normal distribution.

    Args:
        x: Real threshold; any finite value is accepted.

    Returns:
        1 - Phi(x), computed through erfc so the result keeps close to full
        relative precision for moderate x and stays meaningful (underflowing
        only below ~1e-308) for x up to about 38.
    """
    return float(_phi_c(x))


def std_normal_quantile(p: float) -> float:
    """Inverse of the standard normal CDF.

    Args:
        p: Probability strictly inside (0, 1).

    Returns:
        The x with Phi(x) = p.

    Raises:
        ValueError: If p lies outside (0, 1).
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {p!r}")
    return float(_sp.ndtri(p))


# --------------------------------------------------------------------------
# Moment norms
# --------------------------------------------------------------------------

def normal_pnorm(p: float) -> float:
    """L_p norm of a standard normal variable.

    Evaluates sqrt(2) * (Gamma((p+1)/2) / sqrt(pi))**(1/p) in log space, so
    large p cannot overflow the Gamma factor.

    Args:
        p: Moment order, p >= 1.

    Returns:
        (E |Z|^p)^(1/p) for Z standard normal.
    """
    if p < 1:
        raise ValueError(f"moment order must be >= 1, got {p!r}")
    log_val = 0.5 * math.log(2.0) + (_sp.gammaln((p + 1.0) / 2.0) - 0.5 * math.log(math.pi)) / p
    return float(math.exp(log_val))


def _binom_logpmf(k: np.ndarray, n: int, q) -> np.ndarray:
    """Log of the Binomial(n, q) pmf at integer array k, via log-Gamma.

    Broadcasts over both k and q, so a (lanes, support) grid of terms can be
    built in one call while the k-only Gamma factors stay one-dimensional.
    """
    k = np.asarray(k, dtype=float)
    q = np.asarray(q, dtype=float)
    return (
        _sp.gammaln(n + 1.0)
        - _sp.gammaln(k + 1.0)
        - _sp.gammaln(n - k + 1.0)
        + k * np.log(q)
        + (n - k) * np.log1p(-q)
    )


def _binom_window(n: int, q: np.ndarray, p: float) -> tuple:
    """Summation window [lo, hi] and log remainder charge for large n.

    The half-width t solves t^2/(2(sd^2 + t/3)) = A with A = margin + log 2
    + p log(1/q), so the Bernstein bound on the mass outside the window,
    charged at the maximum value n^p, is at most exp(-margin) (nq)^p, and
    (nq)^p never exceeds the true moment by Jensen.  A floor of 12 standard
    deviations keeps the window generous at small p.
    """
    sd = np.sqrt(n * q * (1.0 - q))
    a = _BINOM_TAIL_MARGIN + math.log(2.0) - p * np.log(q)
    t = np.maximum(
        a / 3.0 + np.sqrt((a / 3.0) ** 2 + 2.0 * a * sd * sd),
        _BINOM_WINDOW_SIGMAS * sd,
    )
    lo = np.maximum(1, np.floor(n * q - t).astype(np.int64))
    hi = np.minimum(n, np.ceil(n * q + t).astype(np.int64))
    log_mass = math.log(2.0) - t * t / (2.0 * (sd * sd + t / 3.0))
    return lo, hi, log_mass


def _row_logsumexp(log_terms: np.ndarray) -> np.ndarray:
    """logsumexp along the last axis via the usual max shift.

    Every row must contain at least one finite entry; -inf padding entries
    contribute exp(-inf) = 0 as usual.
    """
    m = np.max(log_terms, axis=-1, keepdims=True)
    return np.log(np.sum(np.exp(log_terms - m), axis=-1)) + m[..., 0]


def _binomial_pnorm_lanes(n: int, qs: np.ndarray, p: float) -> np.ndarray:
    """binomial_pnorm vectorized over the success probability.

    Same summation branches as the scalar function; lanes are processed in
    chunks so the (lanes x support) term matrix stays inside a fixed memory
    budget.
    """
    qs = np.asarray(qs, dtype=float)
    if n < 1:
        raise ValueError(f"need at least one trial, got {n!r}")
    if not np.all((qs >= 0.0) & (qs <= 1.0)):
        raise ValueError("success probabilities must lie in [0, 1]")
    if p < 1:
        raise ValueError(f"moment order must be >= 1, got {p!r}")
    out = np.zeros(qs.shape, dtype=float)
    out[qs == 1.0] = float(n)
    mid = np.nonzero((qs > 0.0) & (qs < 1.0))[0]
    if mid.size == 0:
        return out
    qm = qs[mid]
    vals = np.empty(qm.shape, dtype=float)
    if n <= _BINOM_EXACT_MAX_N:
        k = np.arange(1, n + 1)
        log_k = np.log(k)
        chunk = max(1, _BINOM_CHUNK_ELEMS // n)
        for s in range(0, qm.size, chunk):
            qc = qm[s : s + chunk][:, None]
            log_terms = _binom_logpmf(k[None, :], n, qc) + p * log_k[None, :]
            vals[s : s + chunk] = np.exp(_row_logsumexp(log_terms) / p)
    else:
        lo, hi, log_mass = _binom_window(n, qm, p)
        width = int(np.max(hi - lo)) + 1
        offs = np.arange(width)
        chunk = max(1, _BINOM_CHUNK_ELEMS // width)
        log_n = math.log(n)
        for s in range(0, qm.size, chunk):
            sl = slice(s, s + chunk)
            ks = lo[sl][:, None] + offs[None, :]
            # Padded columns past each lane's hi are masked out below; clip
            # them to n first so the Gamma arguments stay in range.
            kc = np.minimum(ks, n)
            log_terms = _binom_logpmf(kc, n, qm[sl][:, None]) + p * np.log(kc)
            log_terms[ks > hi[sl][:, None]] = -np.inf
            log_main = _row_logsumexp(log_terms)
            vals[sl] = np.exp(np.logaddexp(log_main, log_mass[sl] + p * log_n) / p)
    out[mid] = vals
    return out


def binomial_pnorm(n: int, q: float, p: float) -> float:
    """L_p norm of a Binomial(n, q) variable.

    For n up to two thousand the moment sum runs over every support point
    in log space (exact up to rounding).  For larger n the sum runs over a
    window around the mean whose half-width grows with p and log(1/q), sized
    so that the Bernstein bound on the excluded tail mass, charged at the
    maximum value n, stays below exp(-36) times the Jensen floor (nq)^p of
    the true moment.  The charge is still added, which can only increase the
    result, so the returned value is a valid upper bound within a couple of
    ulps of the full sum.

    Args:
        n: Number of trials, n >= 1.
        q: Success probability in [0, 1].
        p: Moment order, p >= 1.

    Returns:
        (E V^p)^(1/p) for V ~ Binomial(n, q).
    """
    if n < 1:
        raise ValueError(f"need at least one trial, got {n!r}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"success probability must lie in [0, 1], got {q!r}")
    if p < 1:
        raise ValueError(f"moment order must be >= 1, got {p!r}")
    return float(_binomial_pnorm_lanes(n, np.array([q]), p)[0])


def hermite_moment_bound(k: int, p: float) -> float:
    """Moment majorant sqrt(k!) * (p-1)**(k/2) for the k-th Hermite polynomial.

    Upper-bounds the L_p norm of H_k(Z) for Z standard normal; evaluated in
    log space so intermediate factorials cannot overflow.  When the value
    itself exceeds float range the function saturates to +inf, which keeps
    every downstream minimum/termination test conservative.

    Args:
        k: Polynomial degree, k >= 0.
        p: Moment order, p >= 2.

    Returns:
        sqrt(k!) * sqrt(p - 1)**k, or +inf past float range.
    """
    if k < 0:
        raise ValueError(f"degree must be nonnegative, got {k!r}")
    if p < 2:
        raise ValueError(f"moment order must be >= 2, got {p!r}")
    log_val = 0.5 * _sp.gammaln(k + 1.0) + 0.5 * k * math.log(p - 1.0)
    if log_val > 709.0:
        return math.inf
    return float(math.exp(log_val))


# --------------------------------------------------------------------------
# Quadrature
# --------------------------------------------------------------------------

def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: Tolerance = DEFAULT_TOL,
    singular_end: str | None = None,
) -> float:
    """Adaptive quadrature of f over [a, b] with an enforced error budget.

    Args:
        f: Scalar integrand.
        a: Lower limit.
        b: Upper limit, b > a.
        tol: Error budget; the routine fails loudly rather than return a
            value whose error estimate exceeds it.
        singular_end: "left" or "right" applies the substitution
            y = a + t**2 (resp. y = b - t**2), which turns an integrable
            inverse-square-root endpoint singularity into a smooth integrand
            before the adaptive pass.

    Returns:
        The integral value.

    Raises:
        NumericsError: If the quadrature does not converge within tolerance.
    """
    if not b > a:
        raise ValueError("upper limit must exceed lower limit")
    if singular_end not in (None, "left", "right"):
        raise ValueError(f"unknown singular_end {singular_end!r}")

    if singular_end == "left":
        g = lambda t: f(a + t * t) * 2.0 * t
        lo, hi = 0.0, math.sqrt(b - a)
    elif singular_end == "right":
        g = lambda t: f(b - t * t) * 2.0 * t
        lo, hi = 0.0, math.sqrt(b - a)
    else:
        g, lo, hi = f, a, b

    with np.errstate(all="ignore"):
        out = _sp_integrate.quad(
            g, lo, hi, epsabs=tol.abs_tol, epsrel=tol.rel_tol, limit=tol.max_iter, full_output=1
        )
    value, err = out[0], out[1]
    converged = len(out) < 4  # a fourth element is QUADPACK's warning message
    if not converged or not math.isfinite(value):
        raise NumericsError(f"quadrature failed to converge on [{a}, {b}]")
    if err > tol.abs_tol + tol.rel_tol * abs(value):
        raise NumericsError(
            f"quadrature error estimate {err:.3e} exceeds tolerance on [{a}, {b}]"
        )
    return float(value)


# --------------------------------------------------------------------------
# Scalar searches
# --------------------------------------------------------------------------

def minimize_scalar(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: Tolerance = DEFAULT_TOL,
) -> tuple[float, float]:
    """Minimize a scalar function on [lo, hi].

    Evaluates a 65-point uniform grid, then golden-section refines the
    bracket around the best grid point.  The returned value can therefore
    never exceed the minimum over the grid or the interval endpoints,
    which is the guarantee the bound searches rely on (any candidate is
    valid; the search only tightens).

    Args:
        f: Objective.
        lo: Interval lower end.
        hi: Interval upper end, hi >= lo.
        tol: abs_tol controls the final bracket width.

    Returns:
        Tuple (argmin, minimum) over the evaluated points.
    """
    if hi < lo:
        raise ValueError("interval is empty")
    if hi == lo:
        return lo, f(lo)

    xs = np.linspace(lo, hi, _GRID_POINTS)
    vals = [f(float(x)) for x in xs]
    best = int(np.argmin(vals))
    best_x, best_v = float(xs[best]), float(vals[best])

    a = float(xs[max(best - 1, 0)])
    b = float(xs[min(best + 1, _GRID_POINTS - 1)])
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(tol.max_iter):
        if b - a <= tol.abs_tol * (1.0 + abs(best_x)):
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    for x, v in ((x1, f1), (x2, f2)):
        if v < best_v:
            best_x, best_v = float(x), float(v)
    return best_x, best_v


def _minimize_scalar_vec(
    f_vec: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    tol: Tolerance = DEFAULT_TOL,
) -> tuple[np.ndarray, np.ndarray]:
    """Vector form of minimize_scalar running all lanes in lockstep.

    Per lane this mirrors minimize_scalar exactly: a 65-point grid followed
    by golden-section refinement of the bracket, with converged lanes frozen
    while the rest keep iterating.  Lanes whose interval is a point return
    that point.

    Args:
        f_vec: Maps an array of per-lane abscissas to per-lane values.
        lo: Per-lane (or scalar) interval lower ends.
        hi: Per-lane (or scalar) interval upper ends, hi >= lo.
        tol: abs_tol controls the final bracket width per lane.

    Returns:
        Tuple (argmin, minimum) arrays over the evaluated points.
    """
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    lo, hi = lo.copy(), hi.copy()
    if np.any(hi < lo):
        raise ValueError("interval is empty in some lane")
    lanes = lo.shape[0]
    idx = np.arange(lanes)

    ts = np.linspace(0.0, 1.0, _GRID_POINTS)
    xs = lo[None, :] + (hi - lo)[None, :] * ts[:, None]
    vals = np.stack([f_vec(xs[g]) for g in range(_GRID_POINTS)])
    best = np.argmin(vals, axis=0)
    best_x = xs[best, idx]
    best_v = vals[best, idx]

    a = xs[np.maximum(best - 1, 0), idx]
    b = xs[np.minimum(best + 1, _GRID_POINTS - 1), idx]
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f_vec(x1), f_vec(x2)
    thresh = tol.abs_tol * (1.0 + np.abs(best_x))
    for _ in range(tol.max_iter):
        active = (b - a) > thresh
        if not np.any(active):
            break
        left = f1 <= f2
        upd_l = active & left
        upd_r = active & ~left
        b = np.where(upd_l, x2, b)
        x2 = np.where(upd_l, x1, x2)
        f2 = np.where(upd_l, f1, f2)
        a = np.where(upd_r, x1, a)
        x1 = np.where(upd_r, x2, x1)
        f1 = np.where(upd_r, f2, f1)
        x1 = np.where(upd_l, b - _GOLDEN * (b - a), x1)
        x2 = np.where(upd_r, a + _GOLDEN * (b - a), x2)
        x_new = np.where(left, x1, x2)
        f_new = f_vec(x_new)
        f1 = np.where(upd_l, f_new, f1)
        f2 = np.where(upd_r, f_new, f2)
    for x, v in ((x1, f1), (x2, f2)):
        better = v < best_v
        best_x = np.where(better, x, best_x)
        best_v = np.where(better, v, best_v)
    return best_x, best_v


def invert_monotone_tail(
    bound: Callable[[float], float],
    delta: float,
    u_max: float,
    tol: Tolerance = DEFAULT_TOL,
) -> float:
    """Smallest threshold u in [0, u_max] with bound(u) <= delta.

    Scans a 65-point grid for the first point at or below delta, then
    bisects inside the bracketing cell.  The returned point always satisfies
    bound(u) <= delta (checked), so quantile bounds built on it stay valid
    even if the tail function is only piecewise monotone.

    Args:
        bound: Nonincreasing-envelope tail bound of u.
        delta: Target level in (0, 1).
        u_max: Right end of the search interval; bound(u_max) must be <= delta.
        tol: abs_tol controls the bisection exit.

    Returns:
        A threshold u with bound(u) <= delta.

    Raises:
        NumericsError: If bound(u_max) > delta, so no valid threshold exists
            inside the interval.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {delta!r}")
    if u_max <= 0:
        raise ValueError("u_max must be positive")

    xs = np.linspace(0.0, u_max, _GRID_POINTS)
    first = None
    for i, x in enumerate(xs):
        if bound(float(x)) <= delta:
            first = i
            break
    if first is None:
        raise NumericsError(f"tail bound still exceeds delta={delta} at u_max={u_max}")
    if first == 0:
        return 0.0

    lo, hi = float(xs[first - 1]), float(xs[first])
    for _ in range(tol.max_iter):
        if hi - lo <= tol.abs_tol * (1.0 + hi):
            break
        mid = 0.5 * (lo + hi)
        if bound(mid) <= delta:
            hi = mid
        else:
            lo = mid
    return hi


def _invert_monotone_tail_vec(
    bound_vec: Callable[[np.ndarray], np.ndarray],
    delta: float,
    u_max: np.ndarray,
    steps: int = 46,
) -> np.ndarray:
    """Vector form of invert_monotone_tail running lockstep bisection.

    Args:
        bound_vec: Maps an array of thresholds (one per lane) to bound values.
        delta: Target level shared by all lanes.
        u_max: Per-lane right endpoint; bound(u_max) <= delta is required.
        steps: Bisection iterations (46 halvings reach ~1e-12 of the range).

    Returns:
        Per-lane thresholds u with bound(u) <= delta.
    """
    u_max = np.asarray(u_max, dtype=float)
    if np.any(bound_vec(u_max) > delta):
        raise NumericsError(f"tail bound exceeds delta={delta} at u_max in some lane")
    lo = np.zeros_like(u_max)
    hi = u_max.copy()
    at_zero = bound_vec(lo) <= delta
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        ok = bound_vec(mid) <= delta
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    out = np.where(at_zero, 0.0, hi)
    return out
