"""
Samples, empirical means, the ERM procedure and Gaussian-multiplier
empirical processes on a finite probability space.

On a finite space every empirical mean depends on a sample only through its
atom counts c, and a sum of c_w independent standard normals has the law of
sqrt(c_w) * N(0, 1). Trial loops therefore draw multinomial counts and one
normal per atom, which simulates the multiplier process exactly.
"""
import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import ProblemInputError
from .measure import (
    expected_perturbed_excess, perturbed_excess_loss, perturbed_excess_losses, perturbed_target,
)
from .parallel import (
    STREAM_OSCILLATION, STREAM_SAMPLE, STREAM_SYMMETRIZATION, STREAM_TRIALS, map_blocks, substream,
)
from .stats import MonteCarloEstimate, ProbabilityEstimate, mean_and_stderr, proportion

logger = logging.getLogger(__name__)

TIE_RULES = ('favor_oracle', 'lowest_index')
TIE_TOLERANCE = 1e-12
BALL_TOLERANCE = 1e-12


def _check_trials(n, trials):
    if n < 1:
        raise ProblemInputError(f'sample size n must be positive, got {n}')
    if trials < 2:
        raise ProblemInputError(f'at least two trials are needed, got {trials}')


@dataclass(frozen=True, eq=False)
class Sample:
    """X_1, ..., X_n as atom indices, reproducible from (space, n, seed)."""
    atom_indices: np.ndarray
    n: int
    seed: int
    atom_count: int

    @cached_property
    def counts(self):
        return np.bincount(self.atom_indices, minlength=self.atom_count)


def draw_sample(space, n, seed):
    """
    n i.i.d. atoms by inverse CDF: uniforms from the PCG64 substream of
    ``seed`` are located in the cumulative weights.
    """
    if n < 1:
        raise ProblemInputError(f'sample size n must be positive, got {n}')
    uniforms = substream(seed, STREAM_SAMPLE).random(n)
    indices = np.searchsorted(space.cumulative, uniforms, side='right')
    indices.setflags(write=False)
    return Sample(atom_indices=indices, n=n, seed=seed, atom_count=space.atom_count)


def draw_counts(space, n, rng, size):
    """Atom counts of ``size`` independent samples of size n, one row per sample."""
    return rng.multinomial(n, space.weights, size=size)


def empirical_mean(g, sample):
    """P_n g = n^-1 sum_i g(X_i)."""
    if np.shape(g) != (sample.atom_count,):
        raise ProblemInputError(f'function has shape {np.shape(g)}, sample space has {sample.atom_count} atoms')
    return float(sample.counts @ np.asarray(g, dtype=float) / sample.n)


def empirical_excess_risk(problem, lam, f_index, sample):
    """P_n L_lambda(f)."""
    return empirical_mean(perturbed_excess_loss(f_index, problem, lam), sample)


@dataclass(frozen=True, eq=False)
class ErmResult:
    chosen_index: int
    empirical_risks: np.ndarray
    excess_risk: float


def choose(empirical_excess, oracle_index, tie_rule='favor_oracle'):
    """
    Row-wise ERM choice from a matrix of P_n L_lambda(f) values.

    Values within 1e-12 of the row minimum are tied. ``favor_oracle`` picks f*
    whenever it is tied for the minimum, ``lowest_index`` the first tied index.
    """
    if tie_rule not in TIE_RULES:
        raise ProblemInputError(f'unknown tie rule {tie_rule!r}')
    empirical_excess = np.atleast_2d(empirical_excess)
    best = empirical_excess.min(axis=1, keepdims=True)
    tied = empirical_excess <= best + TIE_TOLERANCE
    lowest = np.argmax(tied, axis=1)
    if tie_rule == 'favor_oracle':
        return np.where(tied[:, oracle_index], oracle_index, lowest)
    return lowest


def erm(problem, lam, sample, tie_rule='favor_oracle'):
    """
    Empirical risk minimization against T_lambda on ``sample``.

    The reported excess risk is the exact conditional expectation
    E[L_lambda(f_hat) | sample].
    """
    moved = perturbed_target(problem, lam)
    risks = sample.counts @ ((problem.class_functions - moved) ** 2).T / sample.n
    excess = sample.counts @ perturbed_excess_losses(problem, lam).T / sample.n
    chosen = int(choose(excess, problem.oracle_index, tie_rule)[0])
    risks.setflags(write=False)
    return ErmResult(
        chosen_index=chosen,
        empirical_risks=risks,
        excess_risk=float(expected_perturbed_excess(problem, lam)[chosen]),
    )


@dataclass(frozen=True, eq=False)
class TrialBatch:
    """Per-trial atom counts and the matrix of P_n L_lambda(f), trials x |F|."""
    n: int
    counts: np.ndarray
    empirical_excess: np.ndarray

    @property
    def trials(self):
        return self.counts.shape[0]


def simulate_trials(problem, lam, n, trials, seed, workers=None):
    """
    Independent samples of size n and P_n L_lambda over the whole class.

    Block b of the trials for sample size n draws from substream
    (seed, trials stream, n, b); experiments sharing (seed, n) see the same
    samples.
    """
    _check_trials(n, trials)
    losses = perturbed_excess_losses(problem, lam)

    def run(block, length):
        rng = substream(seed, STREAM_TRIALS, n, block)
        return draw_counts(problem.space, n, rng, length)

    counts = np.concatenate(map_blocks(run, trials, workers))
    return TrialBatch(n=n, counts=counts, empirical_excess=counts @ losses.T / n)


@dataclass(frozen=True)
class ErmFailureEstimate:
    failure: ProbabilityEstimate
    mean_excess: MonteCarloEstimate
    lam: float
    n: int

    @property
    def sqrtn_mean_excess(self):
        return math.sqrt(self.n) * self.mean_excess.mean


def erm_failure_rate(problem, lam, n, trials, seed, tie_rule='favor_oracle', threshold=0.0, workers=None):
    """
    Monte Carlo Pr[E(L_lambda(f_hat) | D) > threshold] and the mean exact
    excess risk of ERM on samples of size n.
    """
    batch = simulate_trials(problem, lam, n, trials, seed, workers)
    chosen = choose(batch.empirical_excess, problem.oracle_index, tie_rule)
    excess = expected_perturbed_excess(problem, lam)[chosen]
    return ErmFailureEstimate(
        failure=proportion(excess > threshold),
        mean_excess=mean_and_stderr(excess),
        lam=lam,
        n=n,
    )


def _multiplier_suprema(space, n, trials, seed, stream, workers, differences, scale):
    """
    Per trial, max over the rows d of ``differences`` of |sum_i g_i d(X_i)| * scale,
    with fresh X-samples and standard normal multipliers g_i.
    """

    def run(block, length):
        rng = substream(seed, stream, n, block)
        counts = draw_counts(space, n, rng, length)
        multipliers = np.sqrt(counts) * rng.standard_normal((length, space.atom_count))
        return np.abs(multipliers @ differences.T).max(axis=1) * scale

    return np.concatenate(map_blocks(run, trials, workers))


def _distances(problem, center):
    return np.sqrt(np.maximum(((problem.class_functions - center) ** 2) @ problem.space.weights, 0.0))


def _oscillation(problem, differences, n, trials, seed, workers):
    if not np.any(differences):
        return MonteCarloEstimate(0.0, 0.0, trials)
    suprema = _multiplier_suprema(
        problem.space, n, trials, seed, STREAM_OSCILLATION, workers, differences, 1.0 / math.sqrt(n),
    )
    return mean_and_stderr(suprema)


def estimate_osc(problem, center_index, delta, n, trials, seed, workers=None):
    """
    osc_n(F, f, delta) = n^-1/2 E sup_{h in F, ||f - h|| <= delta} |sum_i g_i (f - h)(X_i)|,
    with the supremum taken exactly over the finite ball.
    """
    if delta < 0:
        raise ProblemInputError(f'delta must be non-negative, got {delta}')
    _check_trials(n, trials)
    center = problem.function(center_index)
    ball = _distances(problem, center) <= delta + BALL_TOLERANCE
    return _oscillation(problem, center - problem.class_functions[ball], n, trials, seed, workers)


def estimate_osc_pairs(problem, delta, n, trials, seed, workers=None):
    """osc_n(F, delta): the oscillation over all pairs f, h in F with ||f - h|| <= delta."""
    if delta < 0:
        raise ProblemInputError(f'delta must be non-negative, got {delta}')
    _check_trials(n, trials)
    differences = [np.zeros(problem.space.atom_count)]
    for index in range(problem.size):
        f = problem.class_functions[index]
        close = _distances(problem, f) <= delta + BALL_TOLERANCE
        close[: index + 1] = False
        differences.extend(f - problem.class_functions[close])
    return _oscillation(problem, np.array(differences), n, trials, seed, workers)


@dataclass(frozen=True)
class SymmetrizationCheck:
    """
    lhs = E sup_f |(P - P_n) L_lambda(f)|, rhs = E sup_f |n^-1 sum_i g_i (f - f*)(X_i)|.
    """
    lhs: MonteCarloEstimate
    rhs: MonteCarloEstimate

    def combined_stderr(self, constant):
        return math.hypot(self.lhs.stderr, constant * self.rhs.stderr)

    def holds(self, constant=8.0, tolerance=3.0):
        return self.lhs.mean <= constant * self.rhs.mean + tolerance * self.combined_stderr(constant)


def symmetrization_ratio(problem, lam, n, trials, seed, workers=None):
    _check_trials(n, trials)
    losses = perturbed_excess_losses(problem, lam)
    means = losses @ problem.space.weights
    differences = problem.class_functions - problem.oracle

    def run(block, length):
        rng = substream(seed, STREAM_SYMMETRIZATION, n, block)
        counts = draw_counts(problem.space, n, rng, length)
        deviations = np.abs(means - counts @ losses.T / n).max(axis=1)
        multipliers = np.sqrt(counts) * rng.standard_normal((length, problem.space.atom_count))
        multiplier_sups = np.abs(multipliers @ differences.T).max(axis=1) / n
        return np.column_stack([deviations, multiplier_sups])

    both = np.concatenate(map_blocks(run, trials, workers))
    return SymmetrizationCheck(lhs=mean_and_stderr(both[:, 0]), rhs=mean_and_stderr(both[:, 1]))
