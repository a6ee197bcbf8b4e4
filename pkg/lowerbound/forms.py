import hashlib
from dataclasses import dataclass

from django import forms
from django.core.exceptions import ValidationError

from .flatfile import dump_flat_text, format_number, parse_flat_text, split_list
from .problems import FAMILIES, MAX_SEED, GeneratorSpec
from .theorems import Constants

EXPERIMENTS = (
    'h-estimate', 'osc-estimate', 'erm-run', 'theorem1', 'theorem2', 'theorem3', 'theorem4', 'sweep', 'h-scaling',
)
SAMPLE_SIZE_EXPERIMENTS = ('osc-estimate', 'erm-run', 'theorem1', 'theorem3', 'theorem4', 'sweep', 'h-scaling')
THEOREM_EXPERIMENTS = ('theorem1', 'theorem3', 'theorem4', 'sweep', 'h-scaling')
DEFAULT_D_LIST = (2, 4, 16)

FAMILY_PARAMETERS = {
    'two_point': ('a', 'b'),
    'simplex': ('d', 'c'),
    'sphere': ('atoms', 'm', 'rho', 'min_sep', 'seed'),
    'file': ('file',),
}

DEFAULTS = {
    'seed': 0,
    'problem_a': 1.0,
    'problem_b': 0.0,
    'problem_d': 4,
    'problem_c': 1.0,
    'problem_seed': 0,
    'experiment_trials': 10000,
    'experiment_delta_grid': (1.5, 1.2, 0.9, 0.6, 0.3),
    'experiment_lambda_grid': (0.01, 0.1, 0.5),
    'experiment_h_trials': 100000,
    'experiment_osc_trials': 2000,
    'experiment_tie_rule': 'favor_oracle',
    'experiment_p_floor': 0.0,
    'experiment_stability_min_n': 256,
    'experiment_stability_ratio': 1.25,
    'constants_c2': 0.25,
    'constants_c3': 0.5,
    'constants_eta': 0.25,
}

# not part of the config hash: the same experiment with another seed or path
UNHASHED = ('seed', 'output')


def field_key(name):
    """Form field name to the dotted config key: ``experiment_n_list`` -> ``experiment.n_list``."""
    if name.startswith(('problem_', 'experiment_', 'constants_')):
        return name.replace('_', '.', 1)
    return name


@dataclass(frozen=True)
class RunConfig:
    seed: int
    output: str
    problem: GeneratorSpec
    experiment: str
    n_list: tuple
    trials: int
    delta_grid: tuple
    lambda_grid: tuple
    h_trials: int
    osc_trials: int
    tie_rule: str
    lam: float
    delta: float
    p_floor: float
    stability_min_n: int
    stability_ratio: float
    d_list: tuple
    constants: Constants
    entries: tuple

    @property
    def config_hash(self):
        text = dump_flat_text({key: value for key, value in self.entries if key not in UNHASHED})
        return hashlib.sha256(text.encode('utf-8')).hexdigest()[:12]


class RunConfigForm(forms.Form):
    """Validates the dotted keys of a run config, one field per key with dots as underscores."""
    seed = forms.IntegerField(min_value=0, max_value=MAX_SEED, required=False)
    output = forms.CharField(required=False)

    problem_family = forms.ChoiceField(choices=[(family, family) for family in FAMILIES])
    problem_a = forms.FloatField(required=False, min_value=-1.0, max_value=1.0)
    problem_b = forms.FloatField(required=False, min_value=-1.0, max_value=1.0)
    problem_d = forms.IntegerField(required=False, min_value=2)
    problem_c = forms.FloatField(required=False, max_value=1.0)
    problem_atoms = forms.IntegerField(required=False, min_value=2)
    problem_m = forms.IntegerField(required=False, min_value=2)
    problem_rho = forms.FloatField(required=False, max_value=1.0)
    problem_min_sep = forms.FloatField(required=False)
    problem_seed = forms.IntegerField(required=False, min_value=0, max_value=MAX_SEED)
    problem_file = forms.CharField(required=False)

    experiment_name = forms.ChoiceField(choices=[(name, name) for name in EXPERIMENTS])
    experiment_n_list = forms.CharField(required=False)
    experiment_trials = forms.IntegerField(required=False, min_value=2)
    experiment_delta_grid = forms.CharField(required=False)
    experiment_lambda_grid = forms.CharField(required=False)
    experiment_h_trials = forms.IntegerField(required=False, min_value=2)
    experiment_osc_trials = forms.IntegerField(required=False, min_value=2)
    experiment_tie_rule = forms.ChoiceField(
        required=False, choices=[('favor_oracle', 'favor_oracle'), ('lowest_index', 'lowest_index')],
    )
    experiment_lambda = forms.FloatField(required=False, min_value=0.0, max_value=0.5)
    experiment_delta = forms.FloatField(required=False, min_value=0.0)
    experiment_p_floor = forms.FloatField(required=False, min_value=0.0, max_value=1.0)
    experiment_stability_min_n = forms.IntegerField(required=False, min_value=1)
    experiment_stability_ratio = forms.FloatField(required=False, min_value=1.0)
    experiment_d_list = forms.CharField(required=False)

    constants_c2 = forms.FloatField(required=False)
    constants_c3 = forms.FloatField(required=False)
    constants_eta = forms.FloatField(required=False)

    def _float_list(self, name):
        value = self.cleaned_data.get(name)
        if not value:
            return None
        try:
            return tuple(float(item) for item in split_list(value))
        except ValueError:
            raise ValidationError(f'{field_key(name)} must be a comma-separated list of numbers')

    def clean_experiment_n_list(self):
        value = self.cleaned_data.get('experiment_n_list')
        if not value:
            return None
        try:
            sizes = tuple(int(item) for item in split_list(value))
        except ValueError:
            raise ValidationError('experiment.n_list must be a comma-separated list of integers')
        if not sizes or min(sizes) < 1:
            raise ValidationError('experiment.n_list must hold positive sample sizes')
        return sizes

    def clean_experiment_d_list(self):
        value = self.cleaned_data.get('experiment_d_list')
        if not value:
            return None
        try:
            dims = tuple(int(item) for item in split_list(value))
        except ValueError:
            raise ValidationError('experiment.d_list must be a comma-separated list of integers')
        if not dims or min(dims) < 2:
            raise ValidationError('experiment.d_list values must be at least 2')
        return dims

    def clean_experiment_delta_grid(self):
        grid = self._float_list('experiment_delta_grid')
        if grid is None:
            return None
        if min(grid) < 0:
            raise ValidationError('experiment.delta_grid values must be non-negative')
        if any(later >= earlier for earlier, later in zip(grid, grid[1:])):
            raise ValidationError('experiment.delta_grid must be strictly decreasing')
        return grid

    def clean_experiment_lambda_grid(self):
        grid = self._float_list('experiment_lambda_grid')
        if grid is not None and any(not 0 < lam <= 0.5 for lam in grid):
            raise ValidationError('experiment.lambda_grid values must lie in (0, 0.5]')
        return grid

    def clean(self):
        cleaned_data = super().clean()
        if self.errors:
            return cleaned_data
        for name, default in DEFAULTS.items():
            if cleaned_data.get(name) is None or cleaned_data.get(name) == '':
                cleaned_data[name] = default

        family = cleaned_data['problem_family']
        used = FAMILY_PARAMETERS[family]
        for name in self.fields:
            if name.startswith('problem_') and name != 'problem_family':
                parameter = name[len('problem_'):]
                if parameter not in used and self.data.get(name) not in (None, ''):
                    raise ValidationError(f'{field_key(name)} is not a parameter of family {family}')
        if family == 'sphere':
            missing = [p for p in ('atoms', 'm', 'rho', 'min_sep') if cleaned_data.get(f'problem_{p}') is None]
            if missing:
                raise ValidationError(f"family sphere needs {', '.join('problem.' + p for p in missing)}")
            if not cleaned_data['problem_rho'] > 0 or not cleaned_data['problem_min_sep'] > 0:
                raise ValidationError('problem.rho and problem.min_sep must be strictly positive')
        if family == 'file' and not cleaned_data.get('problem_file'):
            raise ValidationError('family file needs problem.file')
        if family == 'simplex' and not cleaned_data['problem_c'] > 0:
            raise ValidationError('problem.c must be strictly positive')
        if family == 'two_point' and abs(cleaned_data['problem_a']) == abs(cleaned_data['problem_b']):
            raise ValidationError('two_point needs problem.a != +-problem.b')

        name = cleaned_data['experiment_name']
        if name in SAMPLE_SIZE_EXPERIMENTS and not cleaned_data.get('experiment_n_list'):
            raise ValidationError(f'experiment {name} needs experiment.n_list')
        if name in THEOREM_EXPERIMENTS and cleaned_data['experiment_trials'] < 100:
            raise ValidationError(f'experiment {name} needs experiment.trials >= 100')
        if cleaned_data.get('experiment_lambda') is not None and name != 'erm-run':
            raise ValidationError('experiment.lambda is only used by erm-run')
        if cleaned_data.get('experiment_lambda') == 0.0:
            raise ValidationError('experiment.lambda must be strictly positive')
        if cleaned_data.get('experiment_delta') is not None and name != 'theorem4':
            raise ValidationError('experiment.delta is only used by theorem4')
        if cleaned_data.get('experiment_d_list') is not None and name != 'h-scaling':
            raise ValidationError('experiment.d_list is only used by h-scaling')
        if name == 'h-scaling':
            if family != 'simplex':
                raise ValidationError('h-scaling runs on family simplex')
            if self.data.get('problem_d') not in (None, ''):
                raise ValidationError('h-scaling takes its dimensions from experiment.d_list, not problem.d')
            if len(set(cleaned_data['experiment_n_list'])) < 2:
                raise ValidationError('h-scaling needs at least two sample sizes in experiment.n_list')
            if cleaned_data.get('experiment_d_list') is None:
                cleaned_data['experiment_d_list'] = DEFAULT_D_LIST
        for constant in ('constants_c2', 'constants_c3', 'constants_eta'):
            if not cleaned_data[constant] > 0:
                raise ValidationError(f'{field_key(constant)} must be strictly positive')
        return cleaned_data

    def to_config(self):
        data = self.cleaned_data
        family = data['problem_family']
        if family == 'file':
            parameters = {'path': data['problem_file']}
        else:
            parameters = {
                parameter: data[f'problem_{parameter}']
                for parameter in FAMILY_PARAMETERS[family] if parameter != 'seed'
            }
        entries = []
        for name in self.fields:
            value = data.get(name)
            if value is None or value == '':
                continue
            if name.startswith('problem_') and name != 'problem_family':
                if name[len('problem_'):] not in FAMILY_PARAMETERS[family]:
                    continue
            if isinstance(value, tuple):
                value = ','.join(format_number(item) for item in value)
            elif isinstance(value, (int, float)):
                value = format_number(value)
            entries.append((field_key(name), value))
        return RunConfig(
            seed=data['seed'],
            output=data.get('output') or f"{data['experiment_name']}.csv",
            problem=GeneratorSpec(family, parameters, seed=data['problem_seed']),
            experiment=data['experiment_name'],
            n_list=data.get('experiment_n_list') or (),
            trials=data['experiment_trials'],
            delta_grid=data['experiment_delta_grid'],
            lambda_grid=data['experiment_lambda_grid'],
            h_trials=data['experiment_h_trials'],
            osc_trials=data['experiment_osc_trials'],
            tie_rule=data['experiment_tie_rule'],
            lam=data.get('experiment_lambda'),
            delta=data.get('experiment_delta'),
            p_floor=data['experiment_p_floor'],
            stability_min_n=data['experiment_stability_min_n'],
            stability_ratio=data['experiment_stability_ratio'],
            d_list=data.get('experiment_d_list') or (),
            constants=Constants(data['constants_c2'], data['constants_c3'], data['constants_eta']),
            entries=tuple(sorted(entries)),
        )


def parse_config_text(text, seed=None, output=None):
    """
    Parse and validate run config text into a RunConfig.

    ``seed`` and ``output`` override the config values and go through the same
    validation. Unknown keys are errors.
    """
    entries = parse_flat_text(text)
    if seed is not None:
        entries['seed'] = str(seed)
    if output is not None:
        entries['output'] = str(output)

    form = RunConfigForm()
    unknown = [key for key in entries if key.replace('.', '_') not in form.fields
               or field_key(key.replace('.', '_')) != key]
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")

    form = RunConfigForm(data={key.replace('.', '_'): value for key, value in entries.items()})
    if not form.is_valid():
        messages = []
        for name, errors in form.errors.items():
            prefix = '' if name == '__all__' else f'{field_key(name)}: '
            messages.extend(f'{prefix}{error}' for error in errors)
        raise ValidationError(messages)
    return form.to_config()
