"""Learning problems shared by the test modules."""
from lowerbound.measure import LearningProblem, ProbabilitySpace
from lowerbound.problems import gen_simplex, gen_sphere, gen_two_point


def two_point():
    return gen_two_point(1.0, 0.0)


def simplex(d=4):
    return gen_simplex(d, 1.0)


def sphere():
    return gen_sphere(atoms=8, m=5, rho=0.25, min_sep=0.1, seed=42)


def degenerate():
    """F = {T}: the only function is the target itself."""
    return LearningProblem(ProbabilitySpace.uniform(2), [[0.0, 0.0]], [0.0, 0.0])


def with_suboptimal():
    """The two-point problem plus (1, 1), whose risk is strictly larger."""
    return LearningProblem(ProbabilitySpace.uniform(2), [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], [0.0, 0.0])


def all_problems():
    return {
        'two_point': two_point(),
        'simplex4': simplex(4),
        'simplex16': simplex(16),
        'sphere': sphere(),
        'degenerate': degenerate(),
        'with_suboptimal': with_suboptimal(),
    }
