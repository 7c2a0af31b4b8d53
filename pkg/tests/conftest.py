"""Shared test helpers: Monte Carlo draws and the stopping-study fixture."""

import math

import numpy as np
import pytest

STUDY_ELLS = (1, 10, 100)
STUDY_REPS = 200
STUDY_SEED = 20260815


@pytest.fixture(scope="session")
def stopping_study():
    """200 replications of every stopping rule at each ell in {1, 10, 100}.

    Shared by the module-level stopping properties and the acceptance
    criteria; the empirical-Berry-Esseen batches dominate the cost (tens of
    minutes), so it is computed once per session.  Returns (config, traces)
    with traces keyed by (rule, ell).
    """
    from effconc.stopping import RULES, StoppingConfig, simulate_uniform

    config = StoppingConfig(epsilon=0.01, delta=0.1)
    traces = {}
    for ell in STUDY_ELLS:
        for rule in RULES:
            traces[rule, ell] = simulate_uniform(
                rule, ell, config, reps=STUDY_REPS, seed=STUDY_SEED
            )
    return config, traces


def bernoulli_sigma(q: float, r: float = 1.0) -> float:
    """Standard deviation of r * Bernoulli(q)."""
    return r * math.sqrt(q * (1.0 - q))


def scaled_mean_draws(n: int, q: float, reps: int, seed: int, r: float = 1.0) -> np.ndarray:
    """Draws of S_n = sqrt(n) (mean - expectation) for r*Bernoulli(q) data.

    Uses a single binomial draw per replication, which is exact and fast.
    """
    rng = np.random.default_rng(seed)
    means = rng.binomial(n, q, size=reps) * (r / n)
    return math.sqrt(n) * (means - r * q)


def exceedance_ok(draws: np.ndarray, threshold: float, bound: float) -> bool:
    """Empirical exceedance frequency at most bound + 3 binomial stderr."""
    frac = float(np.mean(draws > threshold))
    stderr = math.sqrt(max(frac * (1.0 - frac), 1e-12) / draws.size)
    return frac <= bound + 3.0 * stderr
