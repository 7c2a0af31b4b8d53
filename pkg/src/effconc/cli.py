"""Command-line front end: point queries, sweeps, benchmarks, self-tests.

Subcommands
-----------
tail       Tail bounds P(S_n > sigma u) at one setting.
quantile   Known-variance quantile bounds, point query or n-sweep.
empirical  Unknown-variance quantile bounds from raw data or a summary.
stop       The adaptive stopping benchmark; emits the trace CSV.
sweep      Grid sweeps of quantile bounds (known variance, or the
           deterministic sigma-hat = sigma surrogate) as CSV.
selftest   Reduced-replication Monte Carlo validity and invariant checks.

Output is CSV by default (UTF-8, LF line endings, '.' decimals, fixed header
per subcommand, floats in shortest round-trip form) or JSON lines with
``--json``; identical flags and seed produce byte-identical output.  All
randomness flows from numpy's seed-sequence generators: a benchmark
replication i draws from ``default_rng((seed, i))``, so replications are
independent streams and any prefix of them is reproducible.

Exit codes: 0 success, 1 usage error, 2 numeric or data failure,
3 self-test failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time

import numpy as np

from effconc import wasserstein as _wasserstein_module
from effconc.classical import (
    BoundResult,
    _hoeffding_quantile_from_r,
    bernstein_quantile,
    bernstein_tail,
    berry_esseen_tail,
    default_onetail_result,
    default_twotail_result,
    hoeffding_quantile,
    hoeffding_tail,
    nonuniform_be_tail,
)
from effconc.empirical import (
    SampleSummary,
    _ebe_quantile_lanes,
    efficient_ebe_quantile,
    empirical_bernstein_quantile,
    ks_quantile,
    variance_bracket,
)
from effconc.model import Problem, rsig
from effconc.numerics import std_normal_cdf_c
from effconc.stopping import (
    RULES,
    TRACE_CSV_HEADER,
    ArrayStream,
    StoppingConfig,
    hoeffding_stop_n,
    run_stopping,
    simulate_uniform,
    trace_rows,
    write_trace_csv,
)
from effconc.wasserstein import k_rsig, omega, omega_kappa, wass_quantile, wass_tail
from effconc.zero_bias import delta_prime, zero_bias_tail_at_threshold

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_SELFTEST = 3

_TAIL_BOUNDS = (
    "hoeffding",
    "bernstein",
    "berry_esseen",
    "nonuniform_berry_esseen",
    "zero_bias",
    "wasserstein",
    "default_onetail",
    "default_twotail",
)
_QUANTILE_BOUNDS = ("efficient", "bernstein", "hoeffding")
_EMPIRICAL_BOUNDS = ("ebe", "emp_bernstein", "hoeffding")
_RULE_TOKENS = {"hoeffding": "hoeffding", "eb": "emp_bernstein",
                "emp_bernstein": "emp_bernstein", "ebe": "ebe"}
_SELFTEST_SUITES = ("classical", "zero_bias", "wasserstein", "empirical",
                    "stopping")

# Reference value the self-test recomputes to detect corrupted constants:
# omega for n=100, r=1, sigma=0.25 at moment order 2, frozen from a clean
# build.  It moves with the b21/b31 chain constants, so any corruption of
# those shifts it far beyond the comparison tolerance.
_OMEGA_REFERENCE_ARGS = (100, 1.0, 0.25, 2)
_OMEGA_REFERENCE = 0.5802223539419904


class _CliError(Exception):
    """Failure with a specific exit code and user-facing message."""

    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage problems as exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise _CliError(EXIT_USAGE, message)


# --------------------------------------------------------------------------
# Shared plumbing
# --------------------------------------------------------------------------

def _fmt(value) -> str:
    """Deterministic CSV field text: shortest round-trip floats."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def _write_rows(header, rows, json_mode: bool, output: str | None) -> None:
    """Emit dict rows as CSV (with header) or JSON lines."""
    handle = sys.stdout if output is None else open(
        output, "w", encoding="utf-8", newline=""
    )
    try:
        if json_mode:
            for row in rows:
                handle.write(json.dumps(row) + "\n")
        else:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(row[key]) for key in header])
    finally:
        if output is not None:
            handle.close()


def _comma_list(text: str) -> list[str]:
    items = [item.strip() for item in text.split(",") if item.strip()]
    if not items:
        raise _CliError(EXIT_USAGE, f"empty list argument {text!r}")
    return items


def _float_list(text: str) -> list[float]:
    try:
        return [float(item) for item in _comma_list(text)]
    except ValueError as exc:
        raise _CliError(EXIT_USAGE, f"bad number in list {text!r}: {exc}")


def _int_list(text: str) -> list[int]:
    values = []
    for item in _comma_list(text):
        value = float(item)
        if int(value) != value:
            raise _CliError(EXIT_USAGE, f"expected an integer, got {item!r}")
        values.append(int(value))
    return values


def _n_grid(text: str) -> list[int]:
    """Sample-size grid: 'A..B' for log-spaced decades, else a comma list."""
    if ".." in text:
        lo_text, hi_text = text.split("..", 1)
        try:
            lo, hi = float(lo_text), float(hi_text)
        except ValueError as exc:
            raise _CliError(EXIT_USAGE, f"bad sweep range {text!r}: {exc}")
        lo_exp, hi_exp = math.log10(lo), math.log10(hi)
        if not (
            lo_exp == int(lo_exp) and hi_exp == int(hi_exp) and lo_exp <= hi_exp
        ):
            raise _CliError(
                EXIT_USAGE,
                f"sweep range {text!r} must run between powers of ten",
            )
        return [10 ** k for k in range(int(lo_exp), int(hi_exp) + 1)]
    return _int_list(text)


def _problem(n: int, r: float, sigma: float) -> Problem:
    try:
        return Problem(n=n, r=r, sigma=sigma)
    except ValueError as exc:
        raise _CliError(EXIT_USAGE, str(exc))


def _resolve_bounds(requested: str, known: tuple[str, ...]) -> list[str]:
    names = _comma_list(requested)
    if names == ["all"]:
        return list(known)
    for name in names:
        if name not in known:
            raise _CliError(
                EXIT_USAGE,
                f"unknown bound {name!r}; choose from {', '.join(known)} or all",
            )
    return names


# --------------------------------------------------------------------------
# tail
# --------------------------------------------------------------------------

def _tail_result(prob: Problem, u: float, name: str) -> BoundResult:
    if name == "hoeffding":
        return BoundResult(hoeffding_tail(prob, u), "hoeffding")
    if name == "bernstein":
        return BoundResult(bernstein_tail(prob, u), "bernstein")
    if name == "berry_esseen":
        return BoundResult(berry_esseen_tail(prob, u), "berry_esseen")
    if name == "nonuniform_berry_esseen":
        return BoundResult(nonuniform_be_tail(prob, u), "nonuniform_berry_esseen")
    if name == "zero_bias":
        return BoundResult(
            zero_bias_tail_at_threshold(prob, u * prob.sigma), "zero_bias"
        )
    if name == "wasserstein":
        return wass_tail(prob, u)
    if name == "default_onetail":
        return default_onetail_result(prob, u)
    return default_twotail_result(prob, u)


def cmd_tail(args) -> int:
    prob = _problem(args.n, args.r, args.sigma)
    if not (args.u >= 0.0 and math.isfinite(args.u)):
        raise _CliError(EXIT_USAGE, f"u must be nonnegative, got {args.u!r}")
    names = _resolve_bounds(args.bounds, _TAIL_BOUNDS)
    rows = []
    for name in names:
        result = _tail_result(prob, args.u, name)
        if not math.isfinite(result.value):
            raise _CliError(
                EXIT_NUMERIC, f"bound {name} returned {result.value!r}"
            )
        rows.append(
            {
                "bound": name,
                "n": args.n,
                "r": args.r,
                "sigma": args.sigma,
                "u": args.u,
                "value": result.value,
                "winner": result.winner,
            }
        )
    smallest = min(row["value"] for row in rows)
    for row in rows:
        row["is_min"] = row["value"] == smallest
    header = ["bound", "n", "r", "sigma", "u", "value", "winner", "is_min"]
    _write_rows(header, rows, args.json, args.output)
    return EXIT_OK


# --------------------------------------------------------------------------
# quantile and sweep
# --------------------------------------------------------------------------

def _quantile_value(prob: Problem, delta: float, sided: str, name: str) -> tuple[float, str]:
    if name == "efficient":
        result = wass_quantile(prob, delta, sided=sided)
        return result.value, result.winner
    if name == "bernstein":
        # The closed form controls |S_n|; it covers a one-sided query too.
        return bernstein_quantile(prob, delta), "bernstein"
    return hoeffding_quantile(prob, delta, sided), "hoeffding"


def _surrogate_value(
    n: int, r: float, sigma: float, delta: float, sided: str, name: str
) -> tuple[float, str]:
    """Quantile bounds on the deterministic surrogate sigma-hat = sigma."""
    summary = SampleSummary(n=n, mean=0.5 * r, emp_var=sigma * sigma)
    if name == "ebe":
        result = efficient_ebe_quantile(summary, r, delta, sided=sided)
        return result.value, result.winner
    if name == "emp_bernstein":
        level = delta if sided == "one" else 0.5 * delta
        return empirical_bernstein_quantile(summary, r, level), "emp_bernstein"
    return _hoeffding_quantile_from_r(r, delta, sided), "hoeffding"


def _validate_level(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise _CliError(EXIT_USAGE, f"delta must lie in (0, 1), got {delta!r}")


def cmd_quantile(args) -> int:
    _validate_level(args.delta)
    if args.sweep:
        return _run_sweep(
            kind="quantile",
            bounds=_resolve_bounds(args.bounds, _QUANTILE_BOUNDS),
            n_grid=_n_grid(args.n_sweep),
            sigmas=[args.sigma],
            deltas=[args.delta],
            r=args.r,
            sided=args.sided,
            json_mode=args.json,
            output=args.output,
        )
    if args.n is None:
        raise _CliError(EXIT_USAGE, "--n is required without --sweep")
    prob = _problem(args.n, args.r, args.sigma)
    names = _resolve_bounds(args.bounds, _QUANTILE_BOUNDS)
    rows = []
    for name in names:
        value, winner = _quantile_value(prob, args.delta, args.sided, name)
        rows.append(
            {
                "bound": name,
                "n": args.n,
                "r": args.r,
                "sigma": args.sigma,
                "delta": args.delta,
                "sided": args.sided,
                "value": value,
                "winner": winner,
            }
        )
    header = ["bound", "n", "r", "sigma", "delta", "sided", "value", "winner"]
    _write_rows(header, rows, args.json, args.output)
    return EXIT_OK


def _run_sweep(
    kind: str,
    bounds: list[str],
    n_grid: list[int],
    sigmas: list[float],
    deltas: list[float],
    r: float,
    sided: str,
    json_mode: bool,
    output: str | None,
) -> int:
    for sigma in sigmas:
        try:
            rsig(r, sigma)
        except ValueError as exc:
            raise _CliError(EXIT_USAGE, str(exc))
        if sigma <= 0.0:
            raise _CliError(EXIT_USAGE, f"sigma must be positive, got {sigma!r}")
    for delta in deltas:
        _validate_level(delta)
    min_n = 2 if kind == "empirical" else 1
    for n in n_grid:
        if n < min_n:
            raise _CliError(
                EXIT_USAGE, f"sample size {n} below the minimum {min_n}"
            )
    rows = []
    for bound in bounds:
        for n in n_grid:
            for sigma in sigmas:
                for delta in deltas:
                    if kind == "quantile":
                        prob = Problem(n=n, r=r, sigma=sigma)
                        value, _ = _quantile_value(prob, delta, sided, bound)
                    else:
                        value, _ = _surrogate_value(
                            n, r, sigma, delta, sided, bound
                        )
                    rows.append(
                        {
                            "bound": bound,
                            "n": n,
                            "r": r,
                            "sigma": sigma,
                            "delta": delta,
                            "sided": sided,
                            "value": value,
                        }
                    )
    header = ["bound", "n", "r", "sigma", "delta", "sided", "value"]
    _write_rows(header, rows, json_mode, output)
    return EXIT_OK


def cmd_sweep(args) -> int:
    known = _QUANTILE_BOUNDS if args.kind == "quantile" else _EMPIRICAL_BOUNDS
    return _run_sweep(
        kind=args.kind,
        bounds=_resolve_bounds(args.bounds, known),
        n_grid=_n_grid(args.n),
        sigmas=_float_list(args.sigma),
        deltas=_float_list(args.delta),
        r=args.r,
        sided=args.sided,
        json_mode=args.json,
        output=args.output,
    )


# --------------------------------------------------------------------------
# empirical
# --------------------------------------------------------------------------

def _summary_from_file(path: str, r: float) -> SampleSummary:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise _CliError(EXIT_NUMERIC, f"cannot read {path}: {exc}")
    values = []
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        try:
            value = float(text)
        except ValueError:
            raise _CliError(
                EXIT_NUMERIC, f"{path}: line {lineno}: cannot parse {text!r}"
            )
        if not (0.0 <= value <= r) or not math.isfinite(value):
            raise _CliError(
                EXIT_NUMERIC,
                f"{path}: line {lineno}: value {value!r} outside [0, {r!r}]",
            )
        values.append(value)
    if len(values) < 2:
        raise _CliError(
            EXIT_NUMERIC,
            f"{path}: needs at least 2 data values, found {len(values)}",
        )
    data = np.asarray(values)
    mean = float(data.mean())
    emp_var = float(np.mean(np.square(data)) - mean * mean)
    return SampleSummary(n=data.size, mean=mean, emp_var=max(emp_var, 0.0))


def cmd_empirical(args) -> int:
    _validate_level(args.delta)
    if args.file is not None:
        if args.n is not None or args.mean is not None or args.empvar is not None:
            raise _CliError(
                EXIT_USAGE, "--file and --n/--mean/--empvar are exclusive"
            )
        summary = _summary_from_file(args.file, args.r)
    else:
        if args.n is None or args.mean is None or args.empvar is None:
            raise _CliError(
                EXIT_USAGE, "provide --file or all of --n, --mean, --empvar"
            )
        try:
            summary = SampleSummary(n=args.n, mean=args.mean, emp_var=args.empvar)
        except ValueError as exc:
            raise _CliError(EXIT_USAGE, str(exc))
    names = _resolve_bounds(args.bounds, _EMPIRICAL_BOUNDS)
    rows = []
    sqrt_n = math.sqrt(summary.n)
    for name in names:
        if name == "ebe":
            try:
                result = efficient_ebe_quantile(
                    summary, args.r, args.delta, sided=args.sided
                )
            except ValueError as exc:
                raise _CliError(EXIT_USAGE, str(exc))
            value, winner = result.value, result.winner
        elif name == "emp_bernstein":
            level = args.delta if args.sided == "one" else 0.5 * args.delta
            try:
                value = empirical_bernstein_quantile(summary, args.r, level)
            except ValueError as exc:
                raise _CliError(EXIT_USAGE, str(exc))
            winner = "emp_bernstein"
        else:
            value = _hoeffding_quantile_from_r(args.r, args.delta, args.sided)
            winner = "hoeffding"
        rows.append(
            {
                "bound": name,
                "n": summary.n,
                "mean": summary.mean,
                "emp_var": summary.emp_var,
                "r": args.r,
                "delta": args.delta,
                "sided": args.sided,
                "value": value,
                "half_width": value / sqrt_n,
                "winner": winner,
            }
        )
    header = [
        "bound", "n", "mean", "emp_var", "r", "delta", "sided", "value",
        "half_width", "winner",
    ]
    _write_rows(header, rows, args.json, args.output)
    return EXIT_OK


# --------------------------------------------------------------------------
# stop
# --------------------------------------------------------------------------

def cmd_stop(args) -> int:
    if args.reps < 1:
        raise _CliError(
            EXIT_USAGE, f"reps must be a positive integer, got {args.reps!r}"
        )
    rules = []
    for token in _comma_list(args.rules):
        if token not in _RULE_TOKENS:
            raise _CliError(
                EXIT_USAGE,
                f"unknown rule {token!r}; choose from hoeffding, eb, ebe",
            )
        rule = _RULE_TOKENS[token]
        if rule not in rules:
            rules.append(rule)
    ells = _int_list(args.ell)
    for ell in ells:
        if ell < 1:
            raise _CliError(EXIT_USAGE, f"ell must be >= 1, got {ell}")
    try:
        config = StoppingConfig(
            epsilon=args.epsilon,
            delta=args.delta,
            schedule_base=args.schedule_base,
            schedule_ratio=args.schedule_ratio,
        )
    except ValueError as exc:
        raise _CliError(EXIT_USAGE, str(exc))
    entries = []
    for rule in rules:
        for ell in ells:
            traces = simulate_uniform(rule, ell, config, args.reps, args.seed)
            entries.extend(
                (i, rule, ell, trace) for i, trace in enumerate(traces)
            )
    if args.json:
        rows = []
        for replication, rule, ell, trace in entries:
            for idx, check in enumerate(trace.checks):
                rows.append(
                    {
                        "replication": replication,
                        "rule": rule,
                        "ell": ell,
                        "check_index": idx,
                        "n": check.n,
                        "half_width": check.half_width,
                        "stopped": check.stopped,
                        "correct": trace.correct,
                    }
                )
        _write_rows(list(TRACE_CSV_HEADER), rows, True, args.output)
    elif args.output is not None:
        write_trace_csv(args.output, entries)
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(TRACE_CSV_HEADER)
        writer.writerows(trace_rows(entries))
    return EXIT_OK


# --------------------------------------------------------------------------
# selftest
# --------------------------------------------------------------------------

def _suite_rng(seed: int, suite: str):
    """Independent generator per suite: seeded by (seed, suite index)."""
    return np.random.default_rng((seed, _SELFTEST_SUITES.index(suite)))


def _bernoulli_draws(n: int, q: float, reps: int, rng) -> np.ndarray:
    """Monte Carlo draws of S_n for Bernoulli(q) summands on [0, 1]."""
    means = rng.binomial(n, q, size=reps) / n
    return math.sqrt(n) * (means - q)


def _exceed_ok(draws: np.ndarray, threshold: float, bound: float) -> tuple[bool, str]:
    frac = float(np.mean(draws > threshold))
    stderr = math.sqrt(max(frac * (1.0 - frac), 1e-12) / draws.size)
    ok = frac <= bound + 3.0 * stderr
    return ok, f"exceedance {frac:.5f} vs bound {bound:.5f} + 3se {3 * stderr:.5f}"


def _suite_classical(seed) -> list[tuple[str, bool, str]]:
    checks = []
    checks.append(
        (
            "phi_c_at_zero",
            abs(std_normal_cdf_c(0.0) - 0.5) <= 1e-12,
            f"got {std_normal_cdf_c(0.0)!r}",
        )
    )
    checks.append(
        (
            "rsig_spot",
            abs(rsig(1.0, 0.3) - 0.9) <= 1e-12,
            f"got {rsig(1.0, 0.3)!r}",
        )
    )
    rng = _suite_rng(seed, "classical")
    prob = Problem(n=200, r=1.0, sigma=0.25)
    q = 0.5 - math.sqrt(0.25 - prob.sigma**2)
    draws = _bernoulli_draws(200, q, 20_000, rng)
    for name, fn in (
        ("hoeffding", hoeffding_tail),
        ("bernstein", bernstein_tail),
        ("berry_esseen", berry_esseen_tail),
        ("nonuniform_berry_esseen", nonuniform_be_tail),
    ):
        for u in (0.5, 1.0, 2.0):
            ok, detail = _exceed_ok(draws, 0.25 * u, fn(prob, u))
            checks.append((f"{name}_tail_valid_u{u}", ok, detail))
    for name, value in (
        ("bernstein_quantile", bernstein_quantile(prob, 0.05)),
        ("hoeffding_quantile", hoeffding_quantile(prob, 0.05, "two")),
    ):
        ok, detail = _exceed_ok(np.abs(draws), value, 0.05)
        checks.append((f"{name}_coverage", ok, detail))
    return checks


def _suite_zero_bias(seed) -> list[tuple[str, bool, str]]:
    checks = []
    ratio = delta_prime(50.0) / 50.0
    checks.append(
        (
            "delta_prime_asymptote",
            abs(ratio - 1.0) < 0.05,
            f"delta_prime(50)/50 = {ratio!r}",
        )
    )
    rng = _suite_rng(seed, "zero_bias")
    prob = Problem(n=200, r=1.0, sigma=0.25)
    q = 0.5 - math.sqrt(0.25 - prob.sigma**2)
    draws = _bernoulli_draws(200, q, 20_000, rng)
    for u in (1.0, 2.0):
        bound = zero_bias_tail_at_threshold(prob, 0.25 * u)
        checks.append(
            (f"bounded_by_one_u{u}", bound <= 1.0, f"bound {bound!r}")
        )
        ok, detail = _exceed_ok(draws, 0.25 * u, bound)
        checks.append((f"tail_valid_u{u}", ok, detail))
    return checks


def _suite_wasserstein(seed) -> list[tuple[str, bool, str]]:
    checks = []
    n, r, sigma, p = _OMEGA_REFERENCE_ARGS
    value = omega(Problem(n=n, r=r, sigma=sigma), p)
    drift = abs(value - _OMEGA_REFERENCE) / _OMEGA_REFERENCE
    checks.append(
        (
            "omega_reference",
            drift <= 1e-9,
            f"omega{_OMEGA_REFERENCE_ARGS} = {value!r} vs reference "
            f"{_OMEGA_REFERENCE!r} (b21/b31 chain constants)",
        )
    )
    rng = _suite_rng(seed, "wasserstein")
    for trial in range(8):
        n_i = int(rng.integers(10, 2000))
        sigma_i = float(rng.uniform(0.05, 0.49))
        p_i = int(rng.choice([2, 3, 4, 8]))
        prob_i = Problem(n=n_i, r=1.0, sigma=sigma_i)
        floor = (prob_i.r / prob_i.sigma) ** 2 / prob_i.n
        kappa = float(floor * rng.uniform(1.1, 50.0))
        k_p = int(rng.integers(1, 12))
        tight = omega_kappa(prob_i, p_i, kappa, k_p)
        loose = omega_kappa(prob_i, p_i, kappa, k_p, loose=True)
        checks.append(
            (
                f"chain_tight_le_loose_{trial}",
                tight <= loose * (1.0 + 1e-9),
                f"tight {tight!r} loose {loose!r} at n {n_i} p {p_i}",
            )
        )
    for sigma_i in (0.1, 0.5):
        for p_i in (2, 8):
            prob_i = Problem(n=100, r=1.0, sigma=sigma_i)
            bound = k_rsig(prob_i, p_i) * p_i / math.sqrt(100)
            value_i = omega(prob_i, p_i)
            checks.append(
                (
                    f"growth_bound_sigma{sigma_i}_p{p_i}",
                    value_i <= bound * (1.0 + 1e-12),
                    f"omega {value_i!r} vs {bound!r}",
                )
            )
    prob = Problem(n=200, r=1.0, sigma=0.25)
    q = 0.5 - math.sqrt(0.25 - prob.sigma**2)
    draws = _bernoulli_draws(200, q, 20_000, rng)
    for u in (1.0, 2.0):
        ok, detail = _exceed_ok(draws, 0.25 * u, wass_tail(prob, u).value)
        checks.append((f"tail_valid_u{u}", ok, detail))
    return checks


def _suite_empirical(seed) -> list[tuple[str, bool, str]]:
    checks = []
    spot = ks_quantile(100, 0.05, "two")
    expected = math.sqrt(math.log(40.0) / 200.0)
    checks.append(
        ("ks_dkw_spot", abs(spot - expected) <= 1e-12, f"got {spot!r}")
    )
    rng = _suite_rng(seed, "empirical")
    n, q, a, datasets = 300, 0.3, 0.05, 2000
    counts = rng.binomial(n, q, size=datasets)
    sigma = math.sqrt(q * (1.0 - q))
    misses = 0
    for count in counts:
        mean = count / n
        summary = SampleSummary(n=n, mean=mean, emp_var=mean * (1.0 - mean))
        bracket = variance_bracket(summary, 1.0, a, "two")
        if not bracket.sigma_lo <= sigma <= bracket.sigma_hi:
            misses += 1
    frac = misses / datasets
    stderr = math.sqrt(max(frac * (1.0 - frac), 1e-12) / datasets)
    checks.append(
        (
            "bracket_validity",
            frac <= a + 3.0 * stderr,
            f"miss rate {frac:.4f} vs {a} + 3se {3 * stderr:.4f}",
        )
    )
    n, q, delta, reps = 100, 0.3, 0.1, 2000
    counts = rng.binomial(n, q, size=reps)
    means = counts / n
    emp_vars = means * (1.0 - means)
    unique_vars, inverse = np.unique(emp_vars, return_inverse=True)
    quantiles = _ebe_quantile_lanes(n, 1.0, unique_vars, delta, "one")[0]
    draws = math.sqrt(n) * (means - q)
    exceed = draws > quantiles[inverse]
    frac = float(np.mean(exceed))
    stderr = math.sqrt(max(frac * (1.0 - frac), 1e-12) / reps)
    checks.append(
        (
            "ebe_coverage",
            frac <= delta + 3.0 * stderr,
            f"exceedance {frac:.4f} vs {delta} + 3se {3 * stderr:.4f}",
        )
    )
    return checks


def _suite_stopping(seed) -> list[tuple[str, bool, str]]:
    checks = []
    stop_n = hoeffding_stop_n(1.0, 0.01, 0.1)
    checks.append(("hoeffding_stop_n", stop_n == 14979, f"got {stop_n}"))
    config = StoppingConfig(epsilon=0.05, delta=0.1)
    trace = run_stopping(
        ArrayStream(np.full(1000, 0.3)), "emp_bernstein", config, 1.0,
        true_mean=0.3,
    )
    checks.append(
        (
            "constant_stream_emp_bernstein",
            trace.final_n == 547 and trace.correct is True,
            f"final_n {trace.final_n} correct {trace.correct}",
        )
    )
    total = float(config.budget_weights(10_000).sum())
    checks.append(
        ("budget_partial_sum", 0.0 < total < config.delta, f"sum {total!r}")
    )
    schedule = [config.check_n(k) for k in range(8)]
    checks.append(
        (
            "schedule_prefix",
            schedule == [32, 48, 72, 108, 162, 243, 365, 547],
            f"got {schedule}",
        )
    )
    return checks


_SUITE_RUNNERS = {
    "classical": _suite_classical,
    "zero_bias": _suite_zero_bias,
    "wasserstein": _suite_wasserstein,
    "empirical": _suite_empirical,
    "stopping": _suite_stopping,
}


def cmd_selftest(args) -> int:
    if args.suite == "all":
        suites = list(_SELFTEST_SUITES)
    elif args.suite in _SELFTEST_SUITES:
        suites = [args.suite]
    else:
        raise _CliError(
            EXIT_USAGE,
            f"unknown suite {args.suite!r}; choose from "
            f"{', '.join(_SELFTEST_SUITES)} or all",
        )
    corrupt = args.corrupt
    saved_scale = _wasserstein_module._B21_SCALE
    if corrupt == "b21":
        _wasserstein_module._B21_SCALE = 0.5
        _wasserstein_module._OMEGA_MEMO.clear()
    failures = 0
    try:
        for suite in suites:
            start = time.perf_counter()
            checks = _SUITE_RUNNERS[suite](args.seed)
            elapsed = time.perf_counter() - start
            bad = [entry for entry in checks if not entry[1]]
            status = "PASS" if not bad else "FAIL"
            print(f"{suite}: {status} ({len(checks)} checks, {elapsed:.1f}s)")
            for name, _, detail in bad:
                print(f"  FAIL {name}: {detail}")
            failures += len(bad)
    finally:
        if corrupt == "b21":
            _wasserstein_module._B21_SCALE = saved_scale
            _wasserstein_module._OMEGA_MEMO.clear()
    return EXIT_OK if failures == 0 else EXIT_SELFTEST


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(
        prog="effconc",
        description="Concentration and quantile bounds for bounded means.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_output_flags(p) -> None:
        fmt = p.add_mutually_exclusive_group()
        fmt.add_argument("--json", action="store_true", help="emit JSON lines")
        fmt.add_argument(
            "--csv", action="store_true", help="emit CSV (the default)"
        )
        p.add_argument("--output", help="write to this file instead of stdout")

    tail = sub.add_parser("tail", help="tail bounds P(S_n > sigma u)")
    tail.add_argument("--n", type=int, required=True, help="sample size")
    tail.add_argument("--r", type=float, default=1.0, help="support range")
    tail.add_argument(
        "--sigma", type=float, required=True, help="standard deviation"
    )
    tail.add_argument(
        "--u", type=float, required=True, help="standardized threshold"
    )
    tail.add_argument(
        "--bounds", default="all",
        help=f"comma list from {', '.join(_TAIL_BOUNDS)}, or all",
    )
    add_output_flags(tail)
    tail.set_defaults(func=cmd_tail)

    quantile = sub.add_parser(
        "quantile", help="known-variance quantile bounds"
    )
    quantile.add_argument("--n", type=int, help="sample size (point query)")
    quantile.add_argument("--r", type=float, default=1.0, help="support range")
    quantile.add_argument(
        "--sigma", type=float, required=True, help="standard deviation"
    )
    quantile.add_argument(
        "--delta", type=float, required=True, help="failure probability"
    )
    quantile.add_argument(
        "--sided", choices=("one", "two"), default="two", help="tail sides"
    )
    quantile.add_argument(
        "--bounds", default="all",
        help=f"comma list from {', '.join(_QUANTILE_BOUNDS)}, or all",
    )
    quantile.add_argument(
        "--sweep", action="store_true", help="sweep over the --n-sweep grid"
    )
    quantile.add_argument(
        "--n-sweep", default="1e2..1e8",
        help="sweep grid: 'A..B' powers of ten, or a comma list",
    )
    add_output_flags(quantile)
    quantile.set_defaults(func=cmd_quantile)

    empirical = sub.add_parser(
        "empirical", help="unknown-variance quantile bounds from data"
    )
    empirical.add_argument(
        "--file", help="data file, one value per line, each in [0, r]"
    )
    empirical.add_argument("--n", type=int, help="summary: sample size")
    empirical.add_argument("--mean", type=float, help="summary: sample mean")
    empirical.add_argument(
        "--empvar", type=float, help="summary: empirical variance"
    )
    empirical.add_argument("--r", type=float, default=1.0, help="support range")
    empirical.add_argument(
        "--delta", type=float, required=True, help="failure probability"
    )
    empirical.add_argument(
        "--sided", choices=("one", "two"), default="two", help="tail sides"
    )
    empirical.add_argument(
        "--bounds", default="all",
        help=f"comma list from {', '.join(_EMPIRICAL_BOUNDS)}, or all",
    )
    add_output_flags(empirical)
    empirical.set_defaults(func=cmd_empirical)

    stop = sub.add_parser("stop", help="adaptive stopping benchmark")
    stop.add_argument(
        "--ell", default="1,10,100",
        help="comma list of uniform-average aggregation levels",
    )
    stop.add_argument(
        "--reps", type=int, default=10, help="replications per (rule, ell)"
    )
    stop.add_argument(
        "--rules", default="hoeffding,eb,ebe",
        help="comma list from hoeffding, eb, ebe",
    )
    stop.add_argument("--seed", type=int, default=0, help="base seed")
    stop.add_argument(
        "--epsilon", type=float, default=0.01, help="target half-width"
    )
    stop.add_argument(
        "--delta", type=float, default=0.1, help="miscoverage budget"
    )
    stop.add_argument(
        "--schedule-base", type=int, default=32, help="first check size"
    )
    stop.add_argument(
        "--schedule-ratio", type=float, default=1.5, help="schedule growth"
    )
    add_output_flags(stop)
    stop.set_defaults(func=cmd_stop)

    sweep = sub.add_parser("sweep", help="grid sweeps of quantile bounds")
    sweep.add_argument(
        "--kind", choices=("quantile", "empirical"), required=True,
        help="known-variance bounds, or the sigma-hat = sigma surrogate",
    )
    sweep.add_argument(
        "--bounds", default="all", help="comma list for the kind, or all"
    )
    sweep.add_argument(
        "--n", default="1e2..1e8",
        help="sample-size grid: 'A..B' powers of ten, or a comma list",
    )
    sweep.add_argument("--sigma", default="0.25", help="comma list of sigmas")
    sweep.add_argument("--delta", default="0.05", help="comma list of levels")
    sweep.add_argument("--r", type=float, default=1.0, help="support range")
    sweep.add_argument(
        "--sided", choices=("one", "two"), default="two", help="tail sides"
    )
    sweep.add_argument(
        "--seed", type=int, default=0,
        help="reserved for stochastic sweeps; current kinds are deterministic",
    )
    add_output_flags(sweep)
    sweep.set_defaults(func=cmd_sweep)

    selftest = sub.add_parser(
        "selftest", help="Monte Carlo validity and invariant checks"
    )
    selftest.add_argument(
        "--suite", default="all",
        help=f"one of {', '.join(_SELFTEST_SUITES)}, or all",
    )
    selftest.add_argument(
        "--seed", type=int, default=20260815, help="Monte Carlo seed"
    )
    selftest.add_argument(
        "--corrupt", choices=("b21",),
        help="test hook: corrupt the named constant and expect a failure",
    )
    selftest.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
