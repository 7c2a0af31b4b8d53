"""Adaptive (epsilon, delta)-stopping rules for streaming mean estimation.

Given an i.i.d. stream of [0, R]-valued observations, each rule halts once a
two-sided confidence half-width at the current sample size drops to epsilon,
keeping the total miscoverage probability at or below delta:

* ``hoeffding``: a deterministic, variance-free rule with a single check at
  the worst-case sample size ceil(R^2 log(2/delta) / (2 epsilon^2)).
* ``emp_bernstein``: a geometric schedule of checks, each applying the
  closed-form empirical Bernstein quantile with half of that check's
  probability budget per side.
* ``ebe``: the same schedule with the two-sided empirical-Berry-Esseen
  quantile bound at each check's budget; its half-widths approach the
  Gaussian envelope, so it stops earlier than the empirical Bernstein rule
  once the variance advantage outweighs the finite-sample slack.

The budget masses follow delta * 6 / (pi^2 (k+1)^2), which sums to exactly
delta over the unbounded schedule, so a union bound over checks preserves
validity no matter where a rule halts.  Each executed check spends its own
mass; skipped or never-reached checks spend nothing.

``simulate_uniform`` is the benchmark harness: each observation is the
average of ``ell`` independent Uniform([0, 1]) draws (range 1, true mean 1/2,
variance 1/(12 ell)), and replications advance in lockstep so the expensive
empirical-Berry-Esseen checks run as one batched call across all live
replications per check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from effconc.empirical import (
    SampleSummary,
    _ebe_quantile_lanes,
    efficient_ebe_quantile,
    empirical_bernstein_quantile,
)

__all__ = [
    "RULES",
    "TRACE_CSV_HEADER",
    "ArrayStream",
    "CheckRecord",
    "StoppingConfig",
    "StoppingTrace",
    "StreamExhausted",
    "hoeffding_stop_n",
    "run_stopping",
    "simulate_uniform",
    "trace_rows",
    "uniform_average_stream",
    "write_trace_csv",
]

RULES = ("hoeffding", "emp_bernstein", "ebe")

TRACE_CSV_HEADER = (
    "replication",
    "rule",
    "ell",
    "check_index",
    "n",
    "half_width",
    "stopped",
    "correct",
)


class StreamExhausted(RuntimeError):
    """Raised when a data source runs out before the rule stops."""


# --------------------------------------------------------------------------
# Configuration and trace types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StoppingConfig:
    """Parameters of an (epsilon, delta)-stopping run.

    Attributes:
        epsilon: Target half-width for the estimate of the mean, > 0.
        delta: Total miscoverage budget in (0, 1).
        schedule_base: First scheduled check size n_1 >= 1.
        schedule_ratio: Geometric growth factor of the schedule, > 1.

    The check sizes are ceil(schedule_base * schedule_ratio^k) and the
    per-check budget masses delta * 6 / (pi^2 (k+1)^2), k = 0, 1, ...; the
    masses sum to exactly delta over the unbounded schedule, so every
    executed prefix spends strictly less than delta.
    """

    epsilon: float
    delta: float
    schedule_base: int = 32
    schedule_ratio: float = 1.5

    def __post_init__(self) -> None:
        if not (self.epsilon > 0.0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon!r}")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta!r}")
        if int(self.schedule_base) != self.schedule_base or self.schedule_base < 1:
            raise ValueError(
                f"schedule_base must be a positive integer, got {self.schedule_base!r}"
            )
        if not (self.schedule_ratio > 1.0 and math.isfinite(self.schedule_ratio)):
            raise ValueError(
                f"schedule_ratio must exceed 1, got {self.schedule_ratio!r}"
            )

    def check_n(self, k: int) -> int:
        """Scheduled sample size of check k (k = 0, 1, ...)."""
        if k < 0:
            raise ValueError(f"check index must be nonnegative, got {k!r}")
        return int(math.ceil(self.schedule_base * self.schedule_ratio**k))

    def budget_weight(self, k: int) -> float:
        """Probability mass spent by check k."""
        if k < 0:
            raise ValueError(f"check index must be nonnegative, got {k!r}")
        return self.delta * 6.0 / (math.pi**2 * (k + 1) ** 2)

    def budget_weights(self, count: int) -> np.ndarray:
        """The first ``count`` budget masses; their total is < delta."""
        k = np.arange(count, dtype=float)
        return self.delta * 6.0 / (math.pi**2 * (k + 1.0) ** 2)


@dataclass(frozen=True)
class CheckRecord:
    """One executed check: sample size, half-width, and the stop decision."""

    n: int
    half_width: float
    stopped: bool


@dataclass(frozen=True)
class StoppingTrace:
    """Full record of one stopping run.

    Attributes:
        checks: Executed checks in order; ``stopped`` is true exactly once,
            at the last record.  Half-widths need not be monotone (they are
            data-dependent).
        final_n: Sample size at the stop, equal to the last check's n.
        final_mean: Sample mean at the stop.
        correct: Whether |final_mean - true mean| <= epsilon, or None when
            the true mean was not supplied.
    """

    checks: tuple[CheckRecord, ...]
    final_n: int
    final_mean: float
    correct: bool | None

    def __post_init__(self) -> None:
        if not self.checks:
            raise ValueError("a stopping trace needs at least one check")
        flags = [c.stopped for c in self.checks]
        if flags != [False] * (len(flags) - 1) + [True]:
            raise ValueError("stopped must be true exactly once, at the last check")
        if self.final_n != self.checks[-1].n:
            raise ValueError(
                f"final_n {self.final_n!r} disagrees with the last check "
                f"{self.checks[-1].n!r}"
            )


# --------------------------------------------------------------------------
# Data sources
# --------------------------------------------------------------------------

class ArrayStream:
    """Finite data source over a fixed array; raises StreamExhausted at the end."""

    def __init__(self, values: Sequence[float]) -> None:
        self._values = np.asarray(values, dtype=float)
        self._pos = 0

    def take(self, m: int) -> np.ndarray:
        """The next m values, consumed in order."""
        if m < 0:
            raise ValueError(f"cannot take a negative count, got {m!r}")
        end = self._pos + m
        if end > self._values.size:
            raise StreamExhausted(
                f"stream exhausted: requested {m} more values with only "
                f"{self._values.size - self._pos} remaining"
            )
        out = self._values[self._pos : end]
        self._pos = end
        return out


class UniformAverageStream:
    """I.i.d. draws, each the mean of ell independent Uniform([0, 1]) values.

    Range 1, true mean 1/2, variance 1/(12 ell).  Deterministic under the
    seed; an infinite source, so it never raises StreamExhausted.
    """

    true_mean = 0.5
    r = 1.0

    def __init__(self, ell: int, seed) -> None:
        if int(ell) != ell or ell < 1:
            raise ValueError(f"ell must be a positive integer, got {ell!r}")
        self._ell = int(ell)
        self._rng = np.random.default_rng(seed)

    def take(self, m: int) -> np.ndarray:
        """The next m averaged draws."""
        if m < 0:
            raise ValueError(f"cannot take a negative count, got {m!r}")
        return self._rng.random((m, self._ell)).mean(axis=1)


def uniform_average_stream(ell: int, seed) -> UniformAverageStream:
    """Data source of i.i.d. means of ell independent Uniform([0, 1]) draws."""
    return UniformAverageStream(ell, seed)


# --------------------------------------------------------------------------
# Rules
# --------------------------------------------------------------------------

def hoeffding_stop_n(r: float, epsilon: float, delta: float) -> int:
    """Deterministic sample size of the Hoeffding stopping rule.

    ceil(r^2 log(2/delta) / (2 epsilon^2)): the smallest n at which the
    two-sided Hoeffding half-width r sqrt(log(2/delta) / (2n)) is <= epsilon.

    Args:
        r: Support range, r > 0.
        epsilon: Target half-width, > 0.
        delta: Miscoverage level in (0, 1].

    Returns:
        The stop sample size, >= 1.
    """
    if not (r > 0.0 and math.isfinite(r)):
        raise ValueError(f"range must be positive and finite, got {r!r}")
    if not (epsilon > 0.0 and math.isfinite(epsilon)):
        raise ValueError(f"epsilon must be positive and finite, got {epsilon!r}")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta!r}")
    return max(1, int(math.ceil(r * r * math.log(2.0 / delta) / (2.0 * epsilon**2))))


def _correct_flag(mean: float, true_mean: float | None, epsilon: float) -> bool | None:
    if true_mean is None:
        return None
    return abs(mean - true_mean) <= epsilon


def _take_checked(stream, m: int, r: float) -> np.ndarray:
    """Draw m values and enforce the [0, r] support contract."""
    values = np.asarray(stream.take(m), dtype=float)
    if values.shape != (m,):
        raise ValueError(
            f"stream returned shape {values.shape!r} for a request of {m}"
        )
    if values.size and not ((values >= 0.0) & (values <= r)).all():
        bad = values[(values < 0.0) | (values > r)][0]
        raise ValueError(f"stream value {bad!r} outside the support [0, {r!r}]")
    return values


def _geometric_half_width(
    rule: str, n: int, mean: float, emp_var: float, weight: float, r: float
) -> float:
    """Half-width of one scheduled check under the given rule's budget."""
    summary = SampleSummary(n=n, mean=mean, emp_var=emp_var)
    if rule == "emp_bernstein":
        quantile = empirical_bernstein_quantile(summary, r, weight / 2.0)
    else:
        quantile = efficient_ebe_quantile(summary, r, weight, sided="two").value
    return quantile / math.sqrt(n)


def run_stopping(
    stream,
    rule: str,
    config: StoppingConfig,
    r: float,
    true_mean: float | None = None,
) -> StoppingTrace:
    """Run one stopping rule on one stream until it halts.

    The hoeffding rule performs a single check at hoeffding_stop_n and spends
    the whole budget there.  The geometric rules check at sample sizes
    config.check_n(k); at check k they compute the rule's two-sided quantile
    bound at level config.budget_weight(k), divide by sqrt(n_k), and stop at
    the first check whose half-width is <= epsilon.  Schedule entries that do
    not increase the sample size (possible for small bases), or that fall
    below the two observations a sample variance needs, are skipped with
    their budget unspent, so executed checks always have strictly increasing
    n >= 2 and total spent budget < delta.

    Args:
        stream: Data source with ``take(m) -> ndarray of m values in [0, r]``;
            must raise StreamExhausted when it cannot supply m more values.
        rule: One of "hoeffding", "emp_bernstein", "ebe".
        config: Stopping parameters.
        r: Support range of the stream's values.
        true_mean: Optional true mean; when given, the trace's ``correct``
            flag records whether the final estimate lies within epsilon.

    Returns:
        The trace of executed checks.

    Raises:
        ValueError: Unknown rule, invalid range, or out-of-support data.
        StreamExhausted: Propagated from the stream.
    """
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}; expected one of {RULES}")
    if not (r > 0.0 and math.isfinite(r)):
        raise ValueError(f"range must be positive and finite, got {r!r}")

    if rule == "hoeffding":
        n_stop = hoeffding_stop_n(r, config.epsilon, config.delta)
        values = _take_checked(stream, n_stop, r)
        mean = float(np.sum(values)) / n_stop
        half = r * math.sqrt(math.log(2.0 / config.delta) / (2.0 * n_stop))
        return StoppingTrace(
            checks=(CheckRecord(n=n_stop, half_width=half, stopped=True),),
            final_n=n_stop,
            final_mean=mean,
            correct=_correct_flag(mean, true_mean, config.epsilon),
        )

    checks: list[CheckRecord] = []
    total = 0.0
    total_sq = 0.0
    n_prev = 0
    k = 0
    while True:
        n_k = config.check_n(k)
        if n_k <= n_prev or n_k < 2:
            k += 1
            continue
        values = _take_checked(stream, n_k - n_prev, r)
        total += float(np.sum(values))
        total_sq += float(np.sum(np.square(values)))
        n_prev = n_k
        mean = total / n_k
        emp_var = max(total_sq / n_k - mean * mean, 0.0)
        half = _geometric_half_width(
            rule, n_k, mean, emp_var, config.budget_weight(k), r
        )
        stop = half <= config.epsilon
        checks.append(CheckRecord(n=n_k, half_width=half, stopped=stop))
        if stop:
            return StoppingTrace(
                checks=tuple(checks),
                final_n=n_k,
                final_mean=mean,
                correct=_correct_flag(mean, true_mean, config.epsilon),
            )
        k += 1


# --------------------------------------------------------------------------
# Lockstep replication harness
# --------------------------------------------------------------------------

def simulate_uniform(
    rule: str,
    ell: int,
    config: StoppingConfig,
    reps: int,
    seed,
) -> list[StoppingTrace]:
    """Run many replications of one rule on uniform-average streams.

    Replication i draws from uniform_average_stream(ell, (seed, i)), so a
    replication's data depends only on (seed, i), never on the batch size or
    on other replications; running replications one at a time through
    run_stopping with the same per-replication seeds produces the same
    traces.  All live replications advance in lockstep through the shared
    geometric schedule, so each empirical-Berry-Esseen check evaluates as a
    single batched call across live replications.

    Args:
        rule: One of "hoeffding", "emp_bernstein", "ebe".
        ell: Number of uniforms averaged per observation.
        config: Stopping parameters.
        reps: Number of replications, >= 1.
        seed: Base seed; replication i uses (seed, i).

    Returns:
        One StoppingTrace per replication, in replication order, each with
        the ``correct`` flag set against the true mean 1/2.
    """
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}; expected one of {RULES}")
    if int(reps) != reps or reps < 1:
        raise ValueError(f"reps must be a positive integer, got {reps!r}")
    streams = [uniform_average_stream(ell, (seed, i)) for i in range(reps)]
    true_mean = UniformAverageStream.true_mean
    r = UniformAverageStream.r

    if rule != "ebe":
        # The hoeffding and empirical Bernstein rules are closed-form per
        # replication; the sequential runner is already cheap.
        return [
            run_stopping(s, rule, config, r, true_mean=true_mean) for s in streams
        ]

    live = list(range(reps))
    totals = np.zeros(reps)
    totals_sq = np.zeros(reps)
    checks: list[list[CheckRecord]] = [[] for _ in range(reps)]
    traces: dict[int, StoppingTrace] = {}
    n_prev = 0
    k = 0
    while live:
        n_k = config.check_n(k)
        if n_k <= n_prev or n_k < 2:
            k += 1
            continue
        incr = n_k - n_prev
        for i in live:
            values = _take_checked(streams[i], incr, r)
            totals[i] += float(np.sum(values))
            totals_sq[i] += float(np.sum(np.square(values)))
        n_prev = n_k
        means = totals[live] / n_k
        emp_vars = np.maximum(totals_sq[live] / n_k - means * means, 0.0)
        weight = config.budget_weight(k)
        quantiles, _, _, _, _ = _ebe_quantile_lanes(
            n_k, r, emp_vars, weight, "two"
        )
        halves = quantiles / math.sqrt(n_k)
        still = []
        for pos, i in enumerate(live):
            half = float(halves[pos])
            stop = half <= config.epsilon
            checks[i].append(CheckRecord(n=n_k, half_width=half, stopped=stop))
            if stop:
                mean = float(means[pos])
                traces[i] = StoppingTrace(
                    checks=tuple(checks[i]),
                    final_n=n_k,
                    final_mean=mean,
                    correct=_correct_flag(mean, true_mean, config.epsilon),
                )
            else:
                still.append(i)
        live = still
        k += 1
    return [traces[i] for i in range(reps)]


# --------------------------------------------------------------------------
# Trace export
# --------------------------------------------------------------------------

def trace_rows(
    entries: Iterable[tuple[int, str, int, StoppingTrace]],
) -> list[list[str]]:
    """CSV field lists for tagged traces, one row per executed check.

    Fields follow TRACE_CSV_HEADER; floats use their shortest round-trip
    form, booleans are ``true``/``false``, and an unknown correct flag is an
    empty string, so equal inputs produce identical rows.
    """
    rows = []
    for replication, rule, ell, trace in entries:
        flag = "" if trace.correct is None else (
            "true" if trace.correct else "false"
        )
        for idx, check in enumerate(trace.checks):
            rows.append(
                [
                    str(replication),
                    rule,
                    str(ell),
                    str(idx),
                    str(check.n),
                    repr(check.half_width),
                    "true" if check.stopped else "false",
                    flag,
                ]
            )
    return rows


def write_trace_csv(path, entries: Iterable[tuple[int, str, int, StoppingTrace]]) -> None:
    """Write tagged traces as CSV rows, one row per executed check.

    Args:
        path: Output file path.
        entries: Iterable of (replication, rule, ell, trace).

    The header is ``replication,rule,ell,check_index,n,half_width,stopped,
    correct``; booleans are written as ``true``/``false`` and an unknown
    correct flag as an empty field.  Output is UTF-8 with LF line endings and
    '.' decimal points, so equal inputs produce byte-identical files.
    """
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TRACE_CSV_HEADER)
        writer.writerows(trace_rows(entries))
