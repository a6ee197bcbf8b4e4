"""
Deterministic generators for learning problems with several risk minimizers.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ProblemInputError, RejectionBudgetExceeded
from .flatfile import format_number
from .measure import LearningProblem, ProbabilitySpace, load_problem, norm, sup_norm

logger = logging.getLogger(__name__)

FAMILIES = ('two_point', 'simplex', 'sphere', 'file')
REJECTION_BUDGET = 10_000
MAX_SEED = 2 ** 64 - 1


def gen_two_point(a, b):
    """
    Two atoms of weight 1/2, T = 0 and F = {(a, b), (b, a)}; both functions
    have risk (a^2 + b^2)/2, f* = (a, b).
    """
    if abs(a) > 1 or abs(b) > 1:
        raise ProblemInputError(f'two_point needs |a|, |b| <= 1, got a={a}, b={b}')
    if abs(a) == abs(b):
        raise ProblemInputError(f'two_point needs a != +-b, got a={a}, b={b}')
    return LearningProblem(
        space=ProbabilitySpace.uniform(2),
        class_functions=[[a, b], [b, a]],
        target=[0.0, 0.0],
        oracle_index=0,
    )


def gen_simplex(d, c):
    """d uniform atoms, T = 0, f_i = c * indicator of atom i; every f_i has risk c^2/d."""
    if int(d) != d or d < 2:
        raise ProblemInputError(f'simplex needs an integer d >= 2, got {d}')
    if not 0 < c <= 1:
        raise ProblemInputError(f'simplex needs 0 < c <= 1, got {c}')
    d = int(d)
    return LearningProblem(
        space=ProbabilitySpace.uniform(d),
        class_functions=c * np.eye(d),
        target=np.zeros(d),
        oracle_index=0,
    )


def gen_unique_minimizer(a, b):
    """
    Two atoms of weight 1/2, T = 0 and F = {(a, 0), (0, b)} with |a| < |b|:
    f* = (a, 0) is the only risk minimizer, with risk gap (b^2 - a^2)/2.
    """
    if not 0 < abs(a) < abs(b) <= 1:
        raise ProblemInputError(f'unique minimizer needs 0 < |a| < |b| <= 1, got a={a}, b={b}')
    return LearningProblem(
        space=ProbabilitySpace.uniform(2),
        class_functions=[[a, 0.0], [0.0, b]],
        target=[0.0, 0.0],
        oracle_index=0,
    )


def gen_sphere(atoms, m, rho, min_sep, seed):
    """
    m functions on ``atoms`` uniform atoms, each at L2 distance exactly rho from
    T = 0, pairwise at least ``min_sep`` apart.

    Candidates are uniform on [-1, 1] per atom, centered and rescaled to norm
    rho; a candidate leaving the unit sup-norm ball or falling closer than
    ``min_sep`` to an accepted function is redrawn.
    """
    parameters = {'atoms': atoms, 'm': m, 'rho': rho, 'min_sep': min_sep}
    if int(atoms) != atoms or atoms < 2:
        raise ProblemInputError(f'sphere needs an integer atoms >= 2, got {atoms}')
    if int(m) != m or m < 2:
        raise ProblemInputError(f'sphere needs an integer m >= 2, got {m}')
    if not 0 < rho <= 1:
        raise ProblemInputError(f'sphere needs 0 < rho <= 1, got {rho}')
    if not min_sep > 0:
        raise ProblemInputError(f'sphere needs min_sep > 0, got {min_sep}')
    if int(seed) != seed or not 0 <= seed <= MAX_SEED:
        raise ProblemInputError(f'seed must be an unsigned 64-bit integer, got {seed}')

    space = ProbabilitySpace.uniform(int(atoms))
    rng = np.random.default_rng(int(seed))
    accepted = []
    for index in range(int(m)):
        for attempt in range(REJECTION_BUDGET):
            candidate = rng.uniform(-1.0, 1.0, space.atom_count)
            candidate -= space.weights @ candidate
            length = norm(candidate, space)
            if length <= 1e-12:
                continue
            candidate *= rho / length
            if sup_norm(candidate) > 1.0:
                continue
            if all(norm(candidate - other, space) >= min_sep for other in accepted):
                break
        else:
            raise RejectionBudgetExceeded(
                f'sphere generation gave up on function {index} after {REJECTION_BUDGET} attempts '
                f'(seed={seed}, parameters={parameters})',
                seed=seed,
                parameters=parameters,
            )
        logger.debug(f'sphere function {index} accepted after {attempt + 1} attempts')
        accepted.append(candidate)
    return LearningProblem(
        space=space,
        class_functions=accepted,
        target=np.zeros(space.atom_count),
        oracle_index=0,
    )


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ProblemInputError(f'unknown problem family {self.family!r}')

    @property
    def label(self):
        if self.family == 'file':
            return f"file:{Path(self.parameters['path']).stem}"
        parts = [self.family]
        parts += [f'{key}={format_number(value)}' for key, value in self.parameters.items()]
        if self.family == 'sphere':
            parts.append(f'seed={self.seed}')
        return ':'.join(parts)

    def build(self):
        p = self.parameters
        if self.family == 'two_point':
            return gen_two_point(p['a'], p['b'])
        if self.family == 'simplex':
            return gen_simplex(p['d'], p['c'])
        if self.family == 'sphere':
            return gen_sphere(p['atoms'], p['m'], p['rho'], p['min_sep'], self.seed)
        try:
            text = Path(p['path']).read_text(encoding='utf-8')
        except OSError as exc:
            raise ProblemInputError(f"cannot read problem file {p['path']}: {exc}") from exc
        return load_problem(text)
