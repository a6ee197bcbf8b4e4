"""
The canonical Gaussian process indexed by a finite set of excess losses.

The process has covariance E G_s G_t = <s, t>, the Gram matrix of the set.
Draws go through a lower-triangular factor of the Gram matrix; Gram matrices
of excess losses are often rank deficient, so the factorization adds a jitter
eps * I, escalating from 1e-12 to 1e-6 until it succeeds.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .exceptions import NumericalError, ProblemInputError
from .measure import excess_loss_class
from .parallel import STREAM_GAUSSIAN, map_blocks, substream
from .stats import mean_and_stderr

logger = logging.getLogger(__name__)

JITTERS = tuple(10.0 ** -exponent for exponent in range(12, 5, -1))
PSD_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SupremumEstimate:
    """Monte Carlo estimate of H(Q') = E sup_q G_q."""
    mean: float
    stderr: float
    trials: int
    sigma_max: float


@dataclass(frozen=True)
class ConcentrationProbe:
    probability: float
    mean_sup: float
    sigma_ratio: float
    trials: int


@dataclass(frozen=True, eq=False)
class GramFactor:
    """
    Lower factor of the Gram block of the coordinates with positive variance.

    Coordinates with zero variance (identically zero excess losses) are left
    out and always draw exactly zero.
    """
    size: int
    active: np.ndarray
    lower: np.ndarray
    jitter: float


def build_excess_loss_set(problem, subset_indices=None):
    """Q' for ``problem``: all of the minimizer set by default, with 0 = L(f*) first."""
    return excess_loss_class(problem, subset_indices)


def factorize_gram(gram):
    gram = np.asarray(gram, dtype=float)
    eigenvalues = linalg.eigvalsh(gram)
    if eigenvalues[0] < -PSD_TOLERANCE:
        raise NumericalError(
            f'Gram matrix is not positive semidefinite: smallest eigenvalue {eigenvalues[0]!r}',
            eigenvalues=eigenvalues,
        )
    active = np.flatnonzero(np.diag(gram) > 0.0)
    if active.size == 0:
        return GramFactor(gram.shape[0], active, np.zeros((0, 0)), 0.0)
    block = gram[np.ix_(active, active)]
    identity = np.eye(active.size)
    for jitter in JITTERS:
        try:
            lower = linalg.cholesky(block + jitter * identity, lower=True, check_finite=False)
        except linalg.LinAlgError:
            logger.debug(f'Cholesky failed with jitter {jitter:g}, escalating')
            continue
        if jitter > JITTERS[0]:
            logger.warning(f'Gram factorization needed jitter {jitter:g}')
        return GramFactor(gram.shape[0], active, lower, jitter)
    raise NumericalError(
        f'Gram matrix could not be factorized with jitter up to {JITTERS[-1]:g}; '
        f'eigenvalues {eigenvalues.tolist()}',
        eigenvalues=eigenvalues,
    )


def _draw_block(factor, seed, block, length):
    rng = substream(seed, STREAM_GAUSSIAN, block)
    draws = np.zeros((length, factor.size))
    if factor.active.size:
        normals = rng.standard_normal((length, factor.active.size))
        draws[:, factor.active] = normals @ factor.lower.T
    return draws


def sample_gp(loss_set, count, seed, workers=None):
    """``count`` independent draws of (G_q1, ..., G_qM), one per row."""
    if count < 1:
        raise ProblemInputError(f'count must be positive, got {count}')
    factor = factorize_gram(loss_set.gram)
    return np.concatenate(
        map_blocks(lambda block, length: _draw_block(factor, seed, block, length), count, workers)
    )


def _suprema(loss_set, trials, seed, workers):
    if trials < 2:
        raise ProblemInputError(f'at least two trials are needed, got {trials}')
    factor = factorize_gram(loss_set.gram)

    def block_suprema(block, length):
        return _draw_block(factor, seed, block, length).max(axis=1)

    return np.concatenate(map_blocks(block_suprema, trials, workers))


def estimate_H(loss_set, trials, seed, workers=None):
    """Estimate H(Q') as the average of max_j G_qj over ``trials`` draws."""
    estimate = mean_and_stderr(_suprema(loss_set, trials, seed, workers))
    return SupremumEstimate(
        mean=estimate.mean,
        stderr=estimate.stderr,
        trials=trials,
        sigma_max=loss_set.sigma_max,
    )


def closed_form_H_pair(sigma):
    """E max(0, sigma * N(0, 1)) = sigma / sqrt(2 pi): H of {0, q} with ||q|| = sigma."""
    if sigma < 0:
        raise ProblemInputError(f'sigma must be non-negative, got {sigma}')
    return sigma / math.sqrt(2.0 * math.pi)


def concentration_probe(loss_set, trials, seed, workers=None):
    """
    Estimate Pr(Z >= E Z / 4) for Z = max_j G_qj, with E Z the plug-in mean of
    the same draws. When E Z = 0 the probability is exactly 1/2.
    """
    suprema = _suprema(loss_set, trials, seed, workers)
    mean_sup = float(suprema.mean())
    if mean_sup <= 0.0:
        return ConcentrationProbe(probability=0.5, mean_sup=0.0, sigma_ratio=math.nan, trials=trials)
    return ConcentrationProbe(
        probability=float(np.mean(suprema >= mean_sup / 4.0)),
        mean_sup=mean_sup,
        sigma_ratio=loss_set.sigma_max / mean_sup,
        trials=trials,
    )
