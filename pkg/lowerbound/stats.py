import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    trials: int


@dataclass(frozen=True)
class ProbabilityEstimate:
    """An empirical probability with its Wilson score interval."""
    probability: float
    low: float
    high: float
    successes: int
    trials: int

    @property
    def half_width(self):
        return (self.high - self.low) / 2.0


def mean_and_stderr(values):
    """Sample mean and standard error (sample standard deviation over sqrt(trials))."""
    values = np.asarray(values, dtype=float)
    trials = values.size
    if trials < 2:
        raise ValueError('at least two trials are needed for a standard error')
    return MonteCarloEstimate(
        mean=float(values.mean()),
        stderr=float(values.std(ddof=1) / math.sqrt(trials)),
        trials=trials,
    )


def wilson_interval(successes, trials, confidence=0.95):
    if trials <= 0:
        raise ValueError('wilson_interval: trials must be positive')
    if not 0.0 < confidence < 1.0:
        raise ValueError('wilson_interval: confidence must lie in (0, 1)')
    z = stats.norm.ppf(1.0 - (1.0 - confidence) / 2.0)
    p = successes / trials
    denominator = 1.0 + z * z / trials
    center = (p + z * z / (2.0 * trials)) / denominator
    margin = z * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials)) / denominator
    return max(0.0, center - margin), min(1.0, center + margin)


def proportion(events):
    """ProbabilityEstimate for a boolean array of per-trial events."""
    events = np.asarray(events, dtype=bool)
    successes = int(events.sum())
    low, high = wilson_interval(successes, events.size)
    probability = successes / events.size
    # rounding in the interval must not push the point estimate outside it
    return ProbabilityEstimate(probability, min(low, probability), max(high, probability), successes, events.size)
