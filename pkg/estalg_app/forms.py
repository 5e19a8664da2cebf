from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

from django import forms
from django.core.exceptions import ValidationError

from .superops import KForm


@dataclass(frozen=True)
class RunConfig:
    """Validated knobs of one command invocation"""
    command: str
    out: Path
    output_format: str = 'csv'
    model: Optional[Path] = None
    scheme: Optional[Path] = None
    preset: Optional[str] = None
    record: Optional[Path] = None
    dt: Optional[float] = None
    horizon: Optional[float] = None
    seed: int = 0
    tol: Optional[float] = None
    cap: Optional[int] = None
    ensemble: int = 1
    picture: str = 'density'
    form: str = 'ito'
    k_form: str = KForm.DERIVED.value
    repair_positivity: bool = True
    threads: Optional[int] = None
    dims: Tuple[int, ...] = (2, 3, 4)
    seeds: int = 10
    theorem: bool = False


def _existing_file(value, label):
    if not value:
        return None
    path = Path(value)
    if not path.is_file():
        raise ValidationError(f'{label} file {value} does not exist')
    return path


class RunForm(forms.Form):
    """Options shared by every command"""
    FORMAT_CHOICES = [
        ('csv', 'CSV'),
        ('json', 'JSON'),
    ]

    model = forms.CharField(required=False)
    preset = forms.CharField(required=False)
    out = forms.CharField()
    output_format = forms.ChoiceField(choices=FORMAT_CHOICES, required=False)
    seed = forms.IntegerField(min_value=0, required=False)
    tol = forms.FloatField(required=False)
    cap = forms.IntegerField(min_value=1, required=False)

    command = None

    def clean_model(self):
        return _existing_file(self.cleaned_data.get('model'), 'model')

    def clean_tol(self):
        tol = self.cleaned_data.get('tol')
        if tol is not None and tol <= 0:
            raise ValidationError('Tolerance must be positive.')
        return tol

    def clean(self):
        cleaned_data = super().clean()
        model = cleaned_data.get('model')
        preset = cleaned_data.get('preset')
        if 'model' not in self.errors:
            if model and preset:
                raise ValidationError('Give either --model or --preset, not both.')
            if not model and not preset:
                raise ValidationError('One of --model or --preset is required.')
        return cleaned_data

    def to_config(self):
        data = {k: v for k, v in self.cleaned_data.items() if v not in (None, '')}
        data['out'] = Path(data['out'])
        return RunConfig(command=self.command, **data)


class QuantumRunForm(RunForm):
    scheme = forms.CharField(required=False)

    def clean_scheme(self):
        return _existing_file(self.cleaned_data.get('scheme'), 'scheme')


class ClosureRunForm(QuantumRunForm):
    command = 'closure'


class SimulateRunForm(QuantumRunForm):
    """Form for simulate: record generation or replay plus the filter run"""
    PICTURE_CHOICES = [
        ('density', 'Density matrix'),
        ('pure', 'State vector'),
    ]
    FORM_CHOICES = [
        ('ito', 'Ito'),
        ('strat', 'Stratonovich'),
        ('both', 'Ito and Stratonovich'),
    ]

    command = 'simulate'

    record = forms.CharField(required=False)
    dt = forms.FloatField()
    horizon = forms.FloatField(min_value=0)
    ensemble = forms.IntegerField(min_value=1, required=False)
    picture = forms.ChoiceField(choices=PICTURE_CHOICES)
    form = forms.ChoiceField(choices=FORM_CHOICES)
    repair_positivity = forms.BooleanField(required=False)
    threads = forms.IntegerField(min_value=1, required=False)

    def clean_record(self):
        return _existing_file(self.cleaned_data.get('record'), 'record')

    def clean_dt(self):
        dt = self.cleaned_data.get('dt')
        if dt is not None and dt <= 0:
            raise ValidationError('Time step must be positive.')
        return dt

    def clean(self):
        cleaned_data = super().clean()
        dt = cleaned_data.get('dt')
        horizon = cleaned_data.get('horizon')
        ensemble = cleaned_data.get('ensemble') or 1
        if cleaned_data.get('record') and ensemble > 1:
            raise ValidationError('--record replays one trajectory; it cannot be combined with --ensemble.')
        if not cleaned_data.get('record') and dt and horizon is not None and horizon < dt:
            raise ValidationError('The horizon must cover at least one time step.')
        if ensemble > 1 and cleaned_data.get('form') == 'both':
            raise ValidationError('--form both is available for single trajectories only.')
        return cleaned_data


class VerifyRunForm(forms.Form):
    K_FORM_CHOICES = [(name, name) for name in KForm.choices()]

    out = forms.CharField()
    dims = forms.CharField()
    seeds = forms.IntegerField(min_value=1)
    seed = forms.IntegerField(min_value=0, required=False)
    k_form = forms.ChoiceField(choices=K_FORM_CHOICES)
    theorem = forms.BooleanField(required=False)

    def clean_dims(self):
        raw = self.cleaned_data.get('dims')
        try:
            dims = tuple(int(part) for part in raw.split(',') if part.strip())
        except ValueError:
            raise ValidationError(f'Dimensions must be comma-separated integers, got {raw!r}.')
        if not dims or any(d < 1 or d > 8 for d in dims):
            raise ValidationError('Dimensions must lie between 1 and 8.')
        return dims

    def to_config(self):
        data = {k: v for k, v in self.cleaned_data.items() if v not in (None, '')}
        data['out'] = Path(data['out'])
        return RunConfig(command='verify', output_format='json', **data)


class ClassicalRunForm(RunForm):
    command = 'classical'

    def clean_cap(self):
        cap = self.cleaned_data.get('cap')
        if cap is not None and cap < 2:
            raise ValidationError('The symbolic closure needs a cap of at least 2.')
        return cap


def form_errors(form):
    """Flatten form errors into one line per field"""
    lines = []
    for field, errors in form.errors.items():
        label = 'input' if field == '__all__' else f'--{field.replace("_", "-")}'
        for error in errors:
            lines.append(f'{label}: {error}')
    return '; '.join(lines)
