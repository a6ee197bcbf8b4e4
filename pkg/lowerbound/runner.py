"""
Experiment dispatch for the run_experiment command.

``run`` computes every row, summary line and in-run assertion of one config
in memory; ``write_artifacts`` writes the CSV and the summary afterwards, so
a failing computation leaves no partial files behind.
"""
import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .empirical import erm_failure_rate, estimate_osc, estimate_osc_pairs
from .flatfile import format_number
from .gaussian import build_excess_loss_set, closed_form_H_pair, concentration_probe, estimate_H
from .theorems import (
    binomial_oracle_two_point, calibrate_delta, choose_lambda_n, complexity, erm_failure_oracle_two_point,
    h_scaling_experiment, theorem1_experiment, theorem2_check, theorem3_experiment, theorem4_experiment,
)

logger = logging.getLogger(__name__)

COLUMNS = {
    'h-estimate': (
        'problem_id', 'M', 'trials', 'H_mean', 'H_stderr', 'sigma_max', 'H_closed_form', 'p_concentration',
        'seed', 'config_hash',
    ),
    'osc-estimate': (
        'problem_id', 'n', 'delta', 'trials', 'osc_mean', 'osc_stderr', 'pair_osc_mean', 'pair_osc_stderr',
        'seed', 'config_hash',
    ),
    'erm-run': (
        'problem_id', 'n', 'trials', 'lambda', 'p_fail', 'p_lo', 'p_hi', 'mean_excess', 'sqrtn_mean_excess',
        'seed', 'config_hash',
    ),
    'theorem1': (
        'problem_id', 'n', 'trials', 'H_mean', 'H_stderr', 'delta', 'lambda_n', 'r_n', 'p_fail', 'p_lo', 'p_hi',
        'mean_excess', 'sqrtn_mean_excess', 'seed', 'config_hash',
    ),
    'theorem2': ('problem_id', 'lambda', 'min_ratio', 'minimizer_ratio', 'd_over_rho', 'seed', 'config_hash'),
    'theorem3': (
        'problem_id', 'n', 'trials', 'H_mean', 'H_stderr', 'lambda_n', 'threshold', 'p_event', 'p_lo', 'p_hi',
        'seed', 'config_hash',
    ),
    'theorem4': (
        'problem_id', 'n', 'trials', 'H_mean', 'H_stderr', 'delta', 'lambda_n', 'r_n', 'ball_size', 'p_event',
        'p_lo', 'p_hi', 'seed', 'config_hash',
    ),
    'h-scaling': (
        'problem_id', 'M', 'n', 'trials', 'H_mean', 'H_stderr', 'lambda_n', 'p_fail', 'p_lo', 'p_hi', 'mean_excess',
        'sqrtn_mean_excess', 'normalized_excess', 'seed', 'config_hash',
    ),
}
COLUMNS['sweep'] = COLUMNS['theorem1']

CONCENTRATION_FLOOR = 0.05
STDERR_MULTIPLE = 3.0
OSC_TOLERANCE = 1e-9


@dataclass
class RunOutcome:
    experiment: str
    problem_id: str
    seed: int
    config_hash: str
    columns: tuple
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    @property
    def status(self):
        return 'success' if self.passed else 'assertion_failed'

    def add_row(self, **values):
        values.setdefault('problem_id', self.problem_id)
        values.update(seed=self.seed, config_hash=self.config_hash)
        self.rows.append([values[column] for column in self.columns])


def _cell(value):
    if value is None:
        return ''
    if isinstance(value, str):
        return value
    return format_number(value)


def _two_point_parameters(config):
    if config.problem.family != 'two_point' or config.tie_rule != 'favor_oracle':
        return None
    return config.problem.parameters['a'], config.problem.parameters['b']


def _h_estimate(config, problem, outcome, workers):
    loss_set = build_excess_loss_set(problem)
    estimate = estimate_H(loss_set, config.trials, config.seed, workers)
    probe = concentration_probe(loss_set, config.trials, config.seed, workers)
    closed_form = None
    if loss_set.size == 1:
        closed_form = 0.0
    elif loss_set.size == 2:
        closed_form = closed_form_H_pair(loss_set.sigma_max)
    outcome.add_row(
        M=loss_set.size, trials=config.trials, H_mean=estimate.mean, H_stderr=estimate.stderr,
        sigma_max=loss_set.sigma_max, H_closed_form=closed_form, p_concentration=probe.probability,
    )
    outcome.notes.append(f'sigma_max / E Z = {probe.sigma_ratio:.6g}')
    if closed_form is not None:
        outcome.checks[f'|H - closed form| <= {STDERR_MULTIPLE:g} stderr'] = (
            abs(estimate.mean - closed_form) <= STDERR_MULTIPLE * estimate.stderr
        )
    outcome.checks[f'Pr(Z >= E Z / 4) >= {CONCENTRATION_FLOOR:g}'] = probe.probability >= CONCENTRATION_FLOOR


def _osc_estimate(config, problem, outcome, workers):
    for n in config.n_list:
        for delta in config.delta_grid:
            center = estimate_osc(problem, problem.oracle_index, delta, n, config.trials, config.seed, workers)
            pairs = estimate_osc_pairs(problem, delta, n, config.trials, config.seed, workers)
            outcome.add_row(
                n=n, delta=delta, trials=config.trials, osc_mean=center.mean, osc_stderr=center.stderr,
                pair_osc_mean=pairs.mean, pair_osc_stderr=pairs.stderr,
            )
            outcome.checks[f'osc(f*, delta={delta:g}) <= osc(delta={delta:g}) at n={n}'] = (
                center.mean <= pairs.mean + OSC_TOLERANCE * max(1.0, pairs.mean)
            )


def _erm_run(config, problem, outcome, workers):
    H = None
    if config.lam is None:
        H = complexity(problem, config.h_trials, config.seed, workers)
        outcome.notes.append(f'H = {H.mean!r} +- {H.stderr!r}')
    two_point = _two_point_parameters(config)
    for n in config.n_list:
        lam = config.lam if config.lam is not None else choose_lambda_n(H.mean, n, config.constants)
        estimate = erm_failure_rate(problem, lam, n, config.trials, config.seed, config.tie_rule, workers=workers)
        failure = estimate.failure
        outcome.add_row(
            n=n, trials=config.trials, **{'lambda': lam}, p_fail=failure.probability, p_lo=failure.low,
            p_hi=failure.high, mean_excess=estimate.mean_excess.mean, sqrtn_mean_excess=estimate.sqrtn_mean_excess,
        )
        if two_point is not None:
            exact = erm_failure_oracle_two_point(*two_point, n, lam)
            outcome.notes.append(f'n={n}: exact Pr[ERM picks f2] = {exact!r}')
            outcome.checks[f'p_fail within the Wilson half-width of the exact value at n={n}'] = (
                abs(failure.probability - exact) <= failure.half_width
            )


def _theorem1_rows(config, problem, outcome, workers):
    report = theorem1_experiment(
        problem, config.n_list, config.trials, config.constants, config.delta_grid, config.seed,
        h_trials=config.h_trials, osc_trials=config.osc_trials, tie_rule=config.tie_rule,
        p_floor=config.p_floor, stability_min_n=config.stability_min_n,
        stability_ratio=config.stability_ratio, workers=workers,
    )
    for row in report.rows:
        outcome.add_row(
            n=row.n, trials=row.trials, H_mean=row.H.mean, H_stderr=row.H.stderr, delta=row.delta,
            lambda_n=row.lambda_n, r_n=row.r_n, p_fail=row.p_fail.probability, p_lo=row.p_fail.low,
            p_hi=row.p_fail.high, mean_excess=row.mean_excess, sqrtn_mean_excess=row.sqrtn_mean_excess,
        )
        qualified = 'qualified' if row.calibration.qualified else 'not qualified'
        outcome.notes.append(
            f'n={row.n}: delta {row.delta!r} ({qualified}, osc {row.calibration.oscillation.mean!r} '
            f'vs budget {row.calibration.budget!r}); c3 H delta^2 rho / sqrt(n) = {row.r_n_theorem1!r}'
        )
    outcome.checks.update(report.checks)
    outcome.notes.append(f'smallest n from which every p_fail check holds: {report.first_passing_n}')
    return report


def _theorem1(config, problem, outcome, workers):
    _theorem1_rows(config, problem, outcome, workers)


def _theorem2_rows(config, problem, outcome, add_rows=True):
    report = theorem2_check(problem, config.lambda_grid)
    if add_rows:
        for row in report.rows:
            outcome.add_row(
                **{'lambda': row.lam}, min_ratio=row.min_ratio, minimizer_ratio=row.minimizer_ratio,
                d_over_rho=report.d_over_rho,
            )
    outcome.notes.append(f'c_emp = {report.c_emp!r}, D / rho = {report.d_over_rho!r}')
    outcome.checks['c_emp > 0'] = report.c_emp > 0
    outcome.checks['ratio equals D / rho on the minimizer set'] = report.minimizer_ratios_exact


def _theorem2(config, problem, outcome, workers):
    _theorem2_rows(config, problem, outcome)


def _theorem3(config, problem, outcome, workers):
    H = complexity(problem, config.h_trials, config.seed, workers)
    two_point = _two_point_parameters(config)
    for n in config.n_list:
        result = theorem3_experiment(
            problem, n, config.trials, config.constants, config.seed, H=H, tie_rule=config.tie_rule,
            workers=workers,
        )
        event = result.event
        outcome.add_row(
            n=n, trials=config.trials, H_mean=H.mean, H_stderr=H.stderr, lambda_n=result.lambda_n,
            threshold=result.threshold, p_event=event.probability, p_lo=event.low, p_hi=event.high,
        )
        outcome.checks[f'p_event(n={n}) >= {config.p_floor:g}'] = event.probability >= config.p_floor
        if two_point is not None:
            exact = binomial_oracle_two_point(*two_point, n, result.lambda_n, result.threshold, inclusive=True)
            outcome.notes.append(f'n={n}: exact event probability = {exact!r}')
            outcome.checks[f'p_event within the Wilson half-width of the exact value at n={n}'] = (
                abs(event.probability - exact) <= event.half_width
            )


def _theorem4(config, problem, outcome, workers):
    H = complexity(problem, config.h_trials, config.seed, workers)
    for n in config.n_list:
        delta = config.delta
        if delta is None:
            delta = calibrate_delta(
                problem, n, H.mean, config.constants, config.delta_grid, config.osc_trials, config.seed, workers,
            ).delta
        result = theorem4_experiment(
            problem, n, delta, config.trials, config.constants, config.seed, H=H, tie_rule=config.tie_rule,
            workers=workers,
        )
        event = result.event
        outcome.add_row(
            n=n, trials=config.trials, H_mean=H.mean, H_stderr=H.stderr, delta=delta, lambda_n=result.lambda_n,
            r_n=result.r_n, ball_size=result.ball_size, p_event=event.probability, p_lo=event.low, p_hi=event.high,
        )
        outcome.checks[f'p_event(n={n}) >= {config.p_floor:g}'] = event.probability >= config.p_floor


def _sweep(config, problem, outcome, workers):
    _theorem2_rows(config, problem, outcome, add_rows=False)
    report = _theorem1_rows(config, problem, outcome, workers)
    for row in report.rows:
        outcome.notes.append(
            f'n={row.n}: Pr[inf over Q of P_n L <= {row.theorem3.threshold!r}] = {row.theorem3.event.probability!r}, '
            f'Pr[inf over B_r (|B_r| = {row.theorem4.ball_size}) of P_n L >= {row.theorem4.threshold!r}] = '
            f'{row.theorem4.event.probability!r}'
        )


def _h_scaling(config, problem, outcome, workers):
    report = h_scaling_experiment(
        config.problem.parameters['c'], config.d_list, config.n_list, config.trials, config.constants, config.seed,
        h_trials=config.h_trials, tie_rule=config.tie_rule, workers=workers,
    )
    for row in report.rows:
        failure = row.failure.failure
        outcome.add_row(
            problem_id=row.label, M=row.size, n=row.n, trials=config.trials, H_mean=row.H.mean,
            H_stderr=row.H.stderr, lambda_n=row.lambda_n, p_fail=failure.probability, p_lo=failure.low,
            p_hi=failure.high, mean_excess=row.failure.mean_excess.mean, sqrtn_mean_excess=row.sqrtn_mean_excess,
            normalized_excess=row.normalized_excess,
        )
    for label in dict.fromkeys(row.label for row in report.rows):
        series = ', '.join(f'{value:.6g}' for value in report.series(label))
        outcome.notes.append(f'{label}: sqrt(n)*excess over n = {series}')
    outcome.checks.update(report.checks)


EXPERIMENT_RUNNERS = {
    'h-estimate': _h_estimate,
    'osc-estimate': _osc_estimate,
    'erm-run': _erm_run,
    'theorem1': _theorem1,
    'theorem2': _theorem2,
    'theorem3': _theorem3,
    'theorem4': _theorem4,
    'sweep': _sweep,
    'h-scaling': _h_scaling,
}


def run(config, workers=None):
    """
    Build the problem and run the configured experiment.

    Raises ProblemInputError for invalid problems and NumericalError or
    RejectionBudgetExceeded for numerical failures; nothing is written here.
    """
    problem = config.problem.build()
    outcome = RunOutcome(
        experiment=config.experiment,
        problem_id=config.problem.label,
        seed=config.seed,
        config_hash=config.config_hash,
        columns=COLUMNS[config.experiment],
    )
    logger.info(f'{config.experiment} on {outcome.problem_id} (seed {config.seed}, config {outcome.config_hash})')
    EXPERIMENT_RUNNERS[config.experiment](config, problem, outcome, workers)
    for name, passed in outcome.checks.items():
        if not passed:
            logger.warning(f'assertion failed: {name}')
    logger.info(f'{config.experiment} finished: {outcome.status}')
    return outcome


def render_csv(outcome):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(outcome.columns)
    writer.writerows([_cell(value) for value in row] for row in outcome.rows)
    return buffer.getvalue()


def render_summary(config, outcome):
    lines = [
        f'experiment = {config.experiment}',
        f'problem_id = {outcome.problem_id}',
        f'seed = {config.seed}',
        f'config_hash = {outcome.config_hash}',
        '',
        '[inputs]',
    ]
    lines += [f'{key} = {value}' for key, value in config.entries if key not in ('seed', 'output')]
    lines += ['', '[results]']
    lines += outcome.notes
    lines += ['', '[assertions]']
    lines += [f"{'PASS' if passed else 'FAIL'} {name}" for name, passed in outcome.checks.items()]
    lines += ['', f'status = {outcome.status}']
    return '\n'.join(lines) + '\n'


def summary_path(csv_path):
    csv_path = Path(csv_path)
    return csv_path.with_name(f'{csv_path.stem}.summary.txt')


def write_artifacts(config, outcome):
    csv_path = Path(config.output)
    if csv_path.parent != Path('.'):
        csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(render_csv(outcome), encoding='utf-8')
    summary = render_summary(config, outcome)
    summary_path(csv_path).write_text(summary, encoding='utf-8')
    return csv_path, summary

