"""
Finite probability spaces, simple functions and the exact risk quantities of
the squared-loss learning problem.

Functions are value vectors on the atoms of the space and every expectation is
a weighted sum, so nothing in this module is sampled.
"""
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import ProblemInputError
from .flatfile import dump_flat_text, format_number, parse_flat_text, split_list

WEIGHT_TOLERANCE = 1e-12
MINIMIZER_TOLERANCE = 1e-10
MEAN_ZERO_TOLERANCE = 1e-10
SUP_NORM_TOLERANCE = 1e-12


def _frozen(values):
    try:
        array = np.array(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemInputError(f'not a numeric array: {exc}') from exc
    array.setflags(write=False)
    return array


def _check_lambda(lam):
    if not 0.0 <= lam <= 1.0:
        raise ProblemInputError(f'lambda must lie in [0, 1], got {lam}')


@dataclass(frozen=True, eq=False)
class ProbabilitySpace:
    """A finite atom set with strictly positive weights summing to one."""
    weights: np.ndarray

    def __post_init__(self):
        weights = _frozen(self.weights)
        if weights.ndim != 1 or weights.size == 0:
            raise ProblemInputError('weights must be a non-empty vector')
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise ProblemInputError('every atom weight must be finite and strictly positive')
        if abs(weights.sum() - 1.0) > WEIGHT_TOLERANCE:
            raise ProblemInputError(f'weights sum to {weights.sum()!r}, not 1')
        object.__setattr__(self, 'weights', weights)

    @classmethod
    def uniform(cls, atom_count):
        if atom_count < 1:
            raise ProblemInputError('a probability space needs at least one atom')
        return cls(np.full(atom_count, 1.0 / atom_count))

    @property
    def atom_count(self):
        return self.weights.size

    @cached_property
    def cumulative(self):
        cumulative = np.cumsum(self.weights)
        cumulative[-1] = 1.0
        cumulative.setflags(write=False)
        return cumulative


def as_function(values, space, unit_ball=False):
    """
    Validate ``values`` as a simple function on ``space``.

    Returns a read-only float vector. With ``unit_ball`` the sup-norm must not
    exceed one (class members and targets).
    """
    function = _frozen(values)
    if function.shape != (space.atom_count,):
        raise ProblemInputError(
            f'function has shape {function.shape}, space has {space.atom_count} atoms'
        )
    if not np.all(np.isfinite(function)):
        raise ProblemInputError('function values must be finite')
    if unit_ball and sup_norm(function) > 1.0 + SUP_NORM_TOLERANCE:
        raise ProblemInputError(f'sup-norm {sup_norm(function)!r} exceeds 1')
    return function


def _check_on_space(space, *functions):
    for function in functions:
        if np.shape(function) != (space.atom_count,):
            raise ProblemInputError(
                f'function has shape {np.shape(function)}, space has {space.atom_count} atoms'
            )


def inner_product(f, h, space):
    _check_on_space(space, f, h)
    return float(np.dot(space.weights, np.asarray(f) * np.asarray(h)))


def norm(f, space):
    return math.sqrt(max(inner_product(f, f, space), 0.0))


def sup_norm(f):
    return float(np.max(np.abs(f))) if np.size(f) else 0.0


def risk(f, target, space):
    """Squared-loss risk E(f - T)^2."""
    _check_on_space(space, f, target)
    difference = np.asarray(f) - np.asarray(target)
    return inner_product(difference, difference, space)


@dataclass(frozen=True, eq=False)
class LearningProblem:
    """A finite function class F, a target T and a designated risk minimizer f*."""
    space: ProbabilitySpace
    class_functions: np.ndarray
    target: np.ndarray
    oracle_index: int = 0

    def __post_init__(self):
        functions = _frozen(self.class_functions)
        if functions.ndim != 2 or functions.shape[0] == 0:
            raise ProblemInputError('the class must hold at least one function')
        if functions.shape[1] != self.space.atom_count:
            raise ProblemInputError(
                f'class functions have {functions.shape[1]} values, space has {self.space.atom_count} atoms'
            )
        if not np.all(np.isfinite(functions)):
            raise ProblemInputError('class function values must be finite')
        if np.max(np.abs(functions)) > 1.0 + SUP_NORM_TOLERANCE:
            raise ProblemInputError('every class function must lie in the unit sup-norm ball')
        object.__setattr__(self, 'class_functions', functions)
        object.__setattr__(self, 'target', as_function(self.target, self.space, unit_ball=True))
        if not 0 <= self.oracle_index < functions.shape[0]:
            raise ProblemInputError(f'oracle_index {self.oracle_index} is outside the class')
        object.__setattr__(self, 'oracle_index', int(self.oracle_index))
        if self.oracle_index not in minimizer_set(self):
            raise ProblemInputError('oracle_index does not minimize the risk over the class')

    @property
    def size(self):
        return self.class_functions.shape[0]

    @property
    def oracle(self):
        return self.class_functions[self.oracle_index]

    def function(self, index):
        if not 0 <= index < self.size:
            raise ProblemInputError(f'function index {index} is outside the class')
        return self.class_functions[index]

    @cached_property
    def risks(self):
        residuals = self.class_functions - self.target
        risks = (residuals ** 2) @ self.space.weights
        risks.setflags(write=False)
        return risks


def minimizer_set(problem):
    """Indices of the functions of F whose risk equals the minimum (within 1e-10)."""
    risks = problem.risks
    best = risks.min()
    return tuple(int(i) for i in np.flatnonzero(risks - best <= MINIMIZER_TOLERANCE))


def excess_loss(f_index, problem):
    """L(f) = (f - T)^2 - (f* - T)^2, pointwise."""
    f = problem.function(f_index)
    return _frozen((f - problem.target) ** 2 - (problem.oracle - problem.target) ** 2)


def perturbed_target(problem, lam):
    """T_lambda = (1 - lambda) T + lambda f*."""
    _check_lambda(lam)
    return _frozen((1.0 - lam) * problem.target + lam * problem.oracle)


def perturbed_excess_losses(problem, lam):
    """Matrix whose row f is L_lambda(f) = (f - T_lambda)^2 - (f* - T_lambda)^2."""
    moved = perturbed_target(problem, lam)
    losses = (problem.class_functions - moved) ** 2 - (problem.oracle - moved) ** 2
    losses.setflags(write=False)
    return losses


def perturbed_excess_loss(f_index, problem, lam):
    problem.function(f_index)
    return perturbed_excess_losses(problem, lam)[f_index]


def expected_perturbed_excess(problem, lam):
    """
    Exact E L_lambda(f) for every f in F.

    For the squared loss, E L_lambda(f) = (1 - lambda)(R(f) - R(f*)) + lambda ||f - f*||^2,
    which is lambda ||f - f*||^2 on the minimizer set.
    """
    _check_lambda(lam)
    gaps = problem.risks - problem.risks[problem.oracle_index]
    # members of the minimizer set have no risk gap, whatever the rounding
    gaps[list(minimizer_set(problem))] = 0.0
    distances = ((problem.class_functions - problem.oracle) ** 2) @ problem.space.weights
    expected = (1.0 - lam) * gaps + lam * distances
    expected[problem.oracle_index] = 0.0
    return expected


@dataclass(frozen=True, eq=False)
class ExcessLossSet:
    """
    A finite set Q' of zero-mean excess losses, element 0 being the zero
    function, together with its Gram matrix of L2(mu) inner products.
    """
    space: ProbabilitySpace
    elements: np.ndarray
    indices: tuple

    def __post_init__(self):
        elements = _frozen(self.elements)
        if elements.ndim != 2 or elements.shape[0] == 0 or elements.shape[1] != self.space.atom_count:
            raise ProblemInputError('excess losses must form a non-empty matrix on the space')
        if np.any(elements[0] != 0.0):
            raise ProblemInputError('element 0 of an excess loss set must be the zero function')
        means = elements @ self.space.weights
        if np.max(np.abs(means)) > MEAN_ZERO_TOLERANCE:
            raise ProblemInputError(f'excess losses must have mean zero, got {means.tolist()}')
        object.__setattr__(self, 'elements', elements)
        object.__setattr__(self, 'indices', tuple(int(i) for i in self.indices))

    @property
    def size(self):
        return self.elements.shape[0]

    @cached_property
    def gram(self):
        weighted = self.elements * self.space.weights
        gram = weighted @ self.elements.T
        gram = (gram + gram.T) / 2.0
        gram.setflags(write=False)
        return gram

    @property
    def sigma_max(self):
        return math.sqrt(max(float(np.max(np.diag(self.gram))), 0.0))

    def scaled(self, factor):
        return ExcessLossSet(self.space, self.elements * factor, self.indices)


def excess_loss_class(problem, subset_indices=None):
    """
    The excess losses {L(f): f in V}, listed from f* (the zero element) onward.

    ``subset_indices`` restricts to a subset of the minimizer set; f* is always
    prepended.
    """
    minimizers = minimizer_set(problem)
    if subset_indices is None:
        chosen = minimizers
    else:
        chosen = tuple(sorted({int(i) for i in subset_indices}))
        outside = [i for i in chosen if i not in minimizers]
        if outside:
            raise ProblemInputError(f'indices {outside} are not in the minimizer set {list(minimizers)}')
    ordered = (problem.oracle_index,) + tuple(i for i in chosen if i != problem.oracle_index)
    elements = np.array([excess_loss(i, problem) for i in ordered])
    return ExcessLossSet(problem.space, elements, ordered)


@dataclass(frozen=True)
class Geometry:
    big_d: float
    rho: float
    rho_inf: float

    @property
    def rho_over_d(self):
        # D = 0 only when every function equals T
        if self.big_d == 0.0:
            return 1.0
        return self.rho / self.big_d


def geometry(problem):
    """D = sup_f ||T - f||, rho = ||T - f*|| and rho_inf = ||T - f*||_inf."""
    distances = np.sqrt(np.maximum(problem.risks, 0.0))
    return Geometry(
        big_d=float(distances.max()),
        rho=float(distances[problem.oracle_index]),
        rho_inf=sup_norm(problem.target - problem.oracle),
    )


def _format_values(values):
    return ', '.join(format_number(v) for v in values)


def _parse_values(key, value):
    try:
        return [float(item) for item in split_list(value)]
    except ValueError as exc:
        raise ProblemInputError(f'{key}: {exc}') from exc


def dump_problem(problem):
    entries = {
        'atoms': str(problem.space.atom_count),
        'weights': _format_values(problem.space.weights),
        'target': _format_values(problem.target),
    }
    for index, function in enumerate(problem.class_functions):
        entries[f'f.{index}'] = _format_values(function)
    entries['oracle_index'] = str(problem.oracle_index)
    return dump_flat_text(entries)


def load_problem(text):
    """Parse the flat problem format back into a LearningProblem."""
    entries = parse_flat_text(text)
    missing = {'atoms', 'weights', 'target', 'oracle_index'} - entries.keys()
    if missing:
        raise ProblemInputError(f'problem file is missing {sorted(missing)}')
    function_keys = [key for key in entries if key.startswith('f.')]
    unknown = set(entries) - {'atoms', 'weights', 'target', 'oracle_index'} - set(function_keys)
    if unknown:
        raise ProblemInputError(f'unknown keys in problem file: {sorted(unknown)}')
    expected = [f'f.{i}' for i in range(len(function_keys))]
    if sorted(function_keys, key=lambda k: (len(k), k)) != expected:
        raise ProblemInputError(f'class functions must be numbered f.0 .. f.{len(function_keys) - 1}')
    try:
        atoms = int(entries['atoms'])
        oracle_index = int(entries['oracle_index'])
    except ValueError as exc:
        raise ProblemInputError(str(exc)) from exc
    space = ProbabilitySpace(_parse_values('weights', entries['weights']))
    if space.atom_count != atoms:
        raise ProblemInputError(f'atoms = {atoms} but {space.atom_count} weights given')
    functions = [_parse_values(key, entries[key]) for key in expected]
    return LearningProblem(
        space=space,
        class_functions=functions,
        target=_parse_values('target', entries['target']),
        oracle_index=oracle_index,
    )
