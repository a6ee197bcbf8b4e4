"""
Experiment harnesses for the ERM lower bound.

Each harness picks the perturbation level lambda_n = c3 H / sqrt(n) and the
radius r_n = c3 H delta^2 rho^2 / sqrt(n), runs independent samples and reports
empirical probabilities with Wilson intervals. The absolute constants of the
lower bound are existential, so the harnesses check stability across n rather
than specific values.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .empirical import TIE_TOLERANCE, choose, erm_failure_rate, estimate_osc, simulate_trials
from .exceptions import ProblemInputError
from .flatfile import format_number
from .gaussian import SupremumEstimate, build_excess_loss_set, closed_form_H_pair, estimate_H
from .measure import expected_perturbed_excess, geometry, minimizer_set, perturbed_excess_loss
from .problems import GeneratorSpec, gen_two_point, gen_unique_minimizer
from .stats import ProbabilityEstimate, proportion

logger = logging.getLogger(__name__)

LAMBDA_CLIP = 0.5
MIN_EXPERIMENT_TRIALS = 100
ORACLE_MAX_N = 10 ** 6
RATIO_TOLERANCE = 1e-9
CONTROL_PROBLEM = (0.5, 0.6)


@dataclass(frozen=True)
class Constants:
    c2: float = 0.25
    c3: float = 0.5
    eta: float = 0.25

    def __post_init__(self):
        for name in ('c2', 'c3', 'eta'):
            if not getattr(self, name) > 0:
                raise ProblemInputError(f'constant {name} must be strictly positive, got {getattr(self, name)}')


def choose_lambda_n(H, n, constants):
    """lambda_n = c3 H / sqrt(n), clipped at 1/2."""
    return min(constants.c3 * H / math.sqrt(n), LAMBDA_CLIP)


def choose_r_n(H, n, delta, geometry, constants):
    """r_n = c3 H delta^2 ||T - f*||^2 / sqrt(n)."""
    return constants.c3 * H * delta ** 2 * geometry.rho ** 2 / math.sqrt(n)


def theorem1_scale(H, n, delta, geometry, constants):
    # excess-risk normalization with ||T - f*|| to the first power
    return constants.c3 * H * delta ** 2 * geometry.rho / math.sqrt(n)


def complexity(problem, trials, seed, workers=None):
    """H(Q) for the minimizer set of ``problem``; exact when Q has two elements."""
    loss_set = build_excess_loss_set(problem)
    if loss_set.size == 2:
        return SupremumEstimate(
            mean=closed_form_H_pair(loss_set.sigma_max), stderr=0.0, trials=0, sigma_max=loss_set.sigma_max,
        )
    return estimate_H(loss_set, trials, seed, workers)


@dataclass(frozen=True)
class DeltaCalibration:
    delta: float
    qualified: bool
    oscillation: object
    budget: float


def calibrate_delta(problem, n, H, constants, delta_grid, trials, seed, workers=None):
    """
    Largest delta of a decreasing grid with osc_n(F, f*, delta) + 2 stderr <= eta H.

    When no grid value qualifies, the smallest one is returned unqualified.
    """
    grid = [float(delta) for delta in delta_grid]
    if not grid:
        raise ProblemInputError('delta grid must not be empty')
    if any(later >= earlier for earlier, later in zip(grid, grid[1:])):
        raise ProblemInputError(f'delta grid must be strictly decreasing, got {grid}')
    budget = constants.eta * H
    for delta in grid:
        oscillation = estimate_osc(problem, problem.oracle_index, delta, n, trials, seed, workers)
        if oscillation.mean + 2.0 * oscillation.stderr <= budget:
            return DeltaCalibration(delta, True, oscillation, budget)
    logger.warning(
        f'no delta in {grid} keeps the oscillation within {budget:g} at n={n}; using {grid[-1]}'
    )
    return DeltaCalibration(grid[-1], False, oscillation, budget)


@dataclass(frozen=True)
class Theorem2Row:
    lam: float
    min_ratio: float
    minimizer_ratio: float


@dataclass(frozen=True)
class Theorem2Report:
    rows: tuple
    c_emp: float
    d_over_rho: float
    minimizer_ratios_exact: bool

    @property
    def passed(self):
        return self.c_emp > 0 and self.minimizer_ratios_exact


def theorem2_check(problem, lambda_grid):
    """
    Ratios E L_lambda(f) / (lambda (rho/D) ||f - f*||^2) over f != f* and the
    grid. On the minimizer set every ratio equals D/rho; the minimum over
    everything is the empirical constant c_emp.
    """
    grid = [float(lam) for lam in lambda_grid]
    if not grid or any(not 0 < lam <= LAMBDA_CLIP for lam in grid):
        raise ProblemInputError(f'lambda grid must be a non-empty subset of (0, 1/2], got {grid}')
    geo = geometry(problem)
    weights = problem.space.weights
    distances = ((problem.class_functions - problem.oracle) ** 2) @ weights
    others = distances > 0
    minimizers = np.zeros(problem.size, dtype=bool)
    minimizers[list(minimizer_set(problem))] = True
    d_over_rho = 1.0 / geo.rho_over_d if geo.rho_over_d > 0 else math.inf

    rows = []
    exact = True
    for lam in grid:
        expected = expected_perturbed_excess(problem, lam)
        denominators = lam * geo.rho_over_d * distances[others]
        with np.errstate(divide='ignore'):
            ratios = np.where(denominators > 0, expected[others] / denominators, math.inf)
        on_minimizers = ratios[minimizers[others]]
        if on_minimizers.size:
            deviation = np.max(np.abs(on_minimizers - d_over_rho))
            exact = exact and bool(deviation <= RATIO_TOLERANCE * max(1.0, d_over_rho))
        rows.append(Theorem2Row(
            lam=lam,
            min_ratio=float(ratios.min()) if ratios.size else math.inf,
            minimizer_ratio=float(on_minimizers.max()) if on_minimizers.size else math.nan,
        ))
    c_emp = min(row.min_ratio for row in rows)
    return Theorem2Report(rows=tuple(rows), c_emp=c_emp, d_over_rho=d_over_rho, minimizer_ratios_exact=exact)


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    counts: tuple
    inf_over_q: float
    inf_over_ball: float
    erm_choice: int
    erm_excess: float


@dataclass(frozen=True, eq=False)
class TrialLedger:
    """Per-trial outcomes of one sample size, all computed from the same samples."""
    n: int
    lambda_n: float
    r_n: float
    ball: tuple
    counts: np.ndarray
    inf_over_q: np.ndarray
    inf_over_ball: np.ndarray
    erm_choice: np.ndarray
    erm_excess: np.ndarray

    @property
    def trials(self):
        return self.counts.shape[0]

    def records(self):
        for index in range(self.trials):
            yield TrialRecord(
                trial_index=index,
                counts=tuple(int(c) for c in self.counts[index]),
                inf_over_q=float(self.inf_over_q[index]),
                inf_over_ball=float(self.inf_over_ball[index]),
                erm_choice=int(self.erm_choice[index]),
                erm_excess=float(self.erm_excess[index]),
            )


def run_trials(problem, n, H, delta, trials, constants, seed, tie_rule='favor_oracle', workers=None):
    """
    Simulate ``trials`` samples of size n against T_lambda_n and record, per
    trial, inf over Q' and over B_{r_n} of P_n L_lambda_n and the ERM outcome.

    B_{r_n} = {f : E L_lambda_n(f) <= r_n} uses exact expectations.
    """
    if trials < MIN_EXPERIMENT_TRIALS:
        raise ProblemInputError(f'experiments need at least {MIN_EXPERIMENT_TRIALS} trials, got {trials}')
    lam = choose_lambda_n(H, n, constants)
    r_n = choose_r_n(H, n, delta, geometry(problem), constants)
    expected = expected_perturbed_excess(problem, lam)
    ball = np.flatnonzero(expected <= r_n)
    batch = simulate_trials(problem, lam, n, trials, seed, workers)
    chosen = choose(batch.empirical_excess, problem.oracle_index, tie_rule)
    ledger = TrialLedger(
        n=n,
        lambda_n=lam,
        r_n=r_n,
        ball=tuple(int(i) for i in ball),
        counts=batch.counts,
        inf_over_q=batch.empirical_excess[:, list(minimizer_set(problem))].min(axis=1),
        inf_over_ball=batch.empirical_excess[:, ball].min(axis=1),
        erm_choice=chosen,
        erm_excess=expected[chosen],
    )
    logger.debug(f'n={n} first trial: {next(ledger.records())}')
    return ledger


@dataclass(frozen=True)
class EventResult:
    """An event probability of one theorem at one sample size."""
    n: int
    H: SupremumEstimate
    lambda_n: float
    threshold: float
    event: ProbabilityEstimate
    delta: float = math.nan
    r_n: float = math.nan
    ball_size: int = 0


def theorem3_event(ledger, H, constants):
    threshold = -constants.c2 * H.mean / math.sqrt(ledger.n)
    return EventResult(
        n=ledger.n,
        H=H,
        lambda_n=ledger.lambda_n,
        threshold=threshold,
        event=proportion(ledger.inf_over_q <= threshold),
    )


def theorem4_event(ledger, H, delta, constants):
    threshold = -constants.c2 * H.mean / (2.0 * math.sqrt(ledger.n))
    return EventResult(
        n=ledger.n,
        H=H,
        lambda_n=ledger.lambda_n,
        threshold=threshold,
        event=proportion(ledger.inf_over_ball >= threshold),
        delta=delta,
        r_n=ledger.r_n,
        ball_size=len(ledger.ball),
    )


def theorem3_experiment(problem, n, trials, constants, seed, H=None, h_trials=100_000,
                        tie_rule='favor_oracle', workers=None):
    """
    Pr[inf over Q' of P_n L_lambda_n <= -c2 H / sqrt(n)], with H exact when
    |Q'| = 2 and estimated otherwise.
    """
    if H is None:
        H = complexity(problem, h_trials, seed, workers)
    ledger = run_trials(problem, n, H.mean, 0.0, trials, constants, seed, tie_rule, workers)
    return theorem3_event(ledger, H, constants)


def theorem4_experiment(problem, n, delta, trials, constants, seed, H=None, h_trials=100_000,
                        tie_rule='favor_oracle', workers=None):
    """Pr[inf over B_{r_n} of P_n L_lambda_n >= -c2 H / (2 sqrt(n))]."""
    if delta < 0:
        raise ProblemInputError(f'delta must be non-negative, got {delta}')
    if H is None:
        H = complexity(problem, h_trials, seed, workers)
    ledger = run_trials(problem, n, H.mean, delta, trials, constants, seed, tie_rule, workers)
    return theorem4_event(ledger, H, delta, constants)


@dataclass(frozen=True)
class ExperimentRow:
    n: int
    trials: int
    H: SupremumEstimate
    calibration: DeltaCalibration
    lambda_n: float
    r_n: float
    r_n_theorem1: float
    p_fail: ProbabilityEstimate
    mean_excess: float
    sqrtn_mean_excess: float
    theorem3: EventResult
    theorem4: EventResult

    @property
    def delta(self):
        return self.calibration.delta


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple
    H: SupremumEstimate
    checks: dict = field(default_factory=dict)
    first_passing_n: int = None

    @property
    def passed(self):
        return all(self.checks.values())


def _stability_ratio(values):
    values = np.asarray(values, dtype=float)
    if values.size < 2 or not np.any(values):
        return 1.0
    if values.min() <= 0:
        return math.inf
    return float(values.max() / values.min())


def theorem1_experiment(problem, n_list, trials, constants, delta_grid, seed, h_trials=100_000,
                        osc_trials=2000, tie_rule='favor_oracle', p_floor=0.0, stability_min_n=256,
                        stability_ratio=1.25, workers=None):
    """
    The full lower-bound experiment over a list of sample sizes.

    Per n: calibrate delta against the oscillation budget, set lambda_n and r_n,
    run ERM and report p_fail(n) = Pr[E(L_lambda_n(f_hat) | D) > r_n] together
    with sqrt(n) times the mean excess risk. H is estimated once and shared by
    every n, and the theorem3 and theorem4 events come from the same samples.
    """
    sizes = sorted({int(n) for n in n_list})
    if not sizes or sizes[0] < 1:
        raise ProblemInputError(f'n_list must hold positive sample sizes, got {list(n_list)}')
    H = complexity(problem, h_trials, seed, workers)
    geo = geometry(problem)
    logger.info(f'H(Q) = {H.mean:.6g} +- {H.stderr:.2g}')

    rows = []
    for n in sizes:
        calibration = calibrate_delta(problem, n, H.mean, constants, delta_grid, osc_trials, seed, workers)
        ledger = run_trials(problem, n, H.mean, calibration.delta, trials, constants, seed, tie_rule, workers)
        mean_excess = float(ledger.erm_excess.mean())
        row = ExperimentRow(
            n=n,
            trials=trials,
            H=H,
            calibration=calibration,
            lambda_n=ledger.lambda_n,
            r_n=ledger.r_n,
            r_n_theorem1=theorem1_scale(H.mean, n, calibration.delta, geo, constants),
            p_fail=proportion(ledger.erm_excess > ledger.r_n),
            mean_excess=mean_excess,
            sqrtn_mean_excess=math.sqrt(n) * mean_excess,
            theorem3=theorem3_event(ledger, H, constants),
            theorem4=theorem4_event(ledger, H, calibration.delta, constants),
        )
        logger.info(
            f'n={n}: delta={row.delta:g} lambda_n={row.lambda_n:.6g} r_n={row.r_n:.6g} '
            f'p_fail={row.p_fail.probability:.4f} sqrt(n)*excess={row.sqrtn_mean_excess:.6g}'
        )
        rows.append(row)

    checks = {f'p_fail(n={row.n}) >= {p_floor:g}': row.p_fail.probability >= p_floor for row in rows}
    stable = [row.sqrtn_mean_excess for row in rows if row.n >= stability_min_n]
    checks[f'max/min sqrt(n)*excess over n >= {stability_min_n} <= {stability_ratio:g}'] = (
        _stability_ratio(stable) <= stability_ratio
    )
    first_passing_n = None
    for row in reversed(rows):
        if row.p_fail.probability < p_floor:
            break
        first_passing_n = row.n
    return ExperimentReport(rows=tuple(rows), H=H, checks=checks, first_passing_n=first_passing_n)


@dataclass(frozen=True)
class ScalingRow:
    label: str
    size: int
    n: int
    H: SupremumEstimate
    rho: float
    lambda_n: float
    failure: object
    normalized_excess: float = None
    control: bool = False

    @property
    def sqrtn_mean_excess(self):
        return self.failure.sqrtn_mean_excess


@dataclass(frozen=True)
class ScalingReport:
    rows: tuple
    checks: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    def series(self, label):
        return [row.sqrtn_mean_excess for row in self.rows if row.label == label]


def _scaling_problems(c, d_list, control):
    dims = sorted({int(d) for d in d_list})
    if not dims or dims[0] < 2:
        raise ProblemInputError(f'd_list must hold integers >= 2, got {list(d_list)}')
    widest = dims[-1]
    problems = []
    for d in dims:
        spec = GeneratorSpec('simplex', {'d': d, 'c': c * math.sqrt(d / widest)})
        problems.append((spec.label, spec.build(), False))
    a, b = control
    problems.append((f'unique:a={format_number(a)}:b={format_number(b)}', gen_unique_minimizer(a, b), True))
    return problems


def h_scaling_experiment(c, d_list, n_list, trials, constants, seed, h_trials=100_000, tie_rule='favor_oracle',
                         control=CONTROL_PROBLEM, control_ratio=0.5, workers=None):
    """
    sqrt(n) times the mean ERM excess risk as the minimizer set grows.

    Every simplex of ``d_list`` is scaled to the same distance c / sqrt(max d)
    from T, so only |V| and with it H(Q) change between them. ERM runs against
    T_lambda_n with lambda_n = c3 H / sqrt(n). A class with a unique minimizer
    runs alongside; its H is zero, so lambda_n = 0 and its excess risk decays
    faster than 1/sqrt(n).
    """
    sizes = sorted({int(n) for n in n_list})
    if len(sizes) < 2 or sizes[0] < 1:
        raise ProblemInputError(f'h-scaling needs at least two positive sample sizes, got {list(n_list)}')
    if trials < MIN_EXPERIMENT_TRIALS:
        raise ProblemInputError(f'experiments need at least {MIN_EXPERIMENT_TRIALS} trials, got {trials}')
    if not 0 < c <= 1:
        raise ProblemInputError(f'h-scaling needs 0 < c <= 1, got {c}')

    rows = []
    for label, problem, is_control in _scaling_problems(c, d_list, control):
        H = complexity(problem, h_trials, seed, workers)
        rho = geometry(problem).rho
        size = len(minimizer_set(problem))
        scale = constants.c3 * H.mean * rho ** 2
        logger.info(f'{label}: |V| = {size}, H(Q) = {H.mean:.6g}')
        for n in sizes:
            lam = choose_lambda_n(H.mean, n, constants)
            estimate = erm_failure_rate(problem, lam, n, trials, seed, tie_rule, workers=workers)
            rows.append(ScalingRow(
                label=label,
                size=size,
                n=n,
                H=H,
                rho=rho,
                lambda_n=lam,
                failure=estimate,
                normalized_excess=estimate.sqrtn_mean_excess / scale if scale > 0 else None,
                control=is_control,
            ))

    checks = {}
    for n in sizes:
        ordered = sorted((row for row in rows if row.n == n and not row.control), key=lambda row: row.H.mean)
        values = [row.sqrtn_mean_excess for row in ordered]
        checks[f'sqrt(n)*excess grows with H(Q) at n={n}'] = all(
            later >= earlier for earlier, later in zip(values, values[1:])
        )
    control_values = [row.sqrtn_mean_excess for row in rows if row.control]
    checks[
        f'unique minimizer: sqrt(n)*excess at n={sizes[-1]} <= {control_ratio:g} x its value at n={sizes[0]}'
    ] = control_values[-1] <= control_ratio * control_values[0]
    return ScalingReport(rows=tuple(rows), checks=checks)


def binomial_oracle_two_point(a, b, n, lam, threshold, inclusive=False):
    """
    Exact probability that P_n L_lambda(f2) of the two-point problem (a, b)
    falls below ``threshold`` (or at it, with ``inclusive``), over
    k ~ Binomial(n, 1/2) draws of atom 0.

    Comparisons carry the ERM tie tolerance so the oracle and the simulated ERM
    agree on exact ties.
    """
    if not 1 <= n <= ORACLE_MAX_N:
        raise ProblemInputError(f'oracle needs 1 <= n <= {ORACLE_MAX_N}, got {n}')
    problem = gen_two_point(a, b)
    v0, v1 = perturbed_excess_loss(1, problem, lam)
    w0 = problem.space.weights[0]
    k = np.arange(n + 1)
    functional = (k * v0 + (n - k) * v1) / n
    if inclusive:
        event = functional <= threshold + TIE_TOLERANCE
    else:
        event = functional < threshold - TIE_TOLERANCE
    log_pmf = (
        gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
        + k * math.log(w0) + (n - k) * math.log1p(-w0)
    )
    return float(min(1.0, np.exp(log_pmf[event]).sum()))


def erm_failure_oracle_two_point(a, b, n, lam):
    """Exact Pr[ERM picks f2] on the two-point problem under the favor_oracle tie rule."""
    return binomial_oracle_two_point(a, b, n, lam, 0.0, inclusive=False)
