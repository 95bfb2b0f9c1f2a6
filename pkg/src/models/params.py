"""Gait cycles and temporal gait parameters."""

import math
from dataclasses import dataclass, field

from src.exceptions import InvalidInput
from src.models.events import Foot

STEP_TIME = 'step_time'
CADENCE = 'cadence'
STANCE_TIME = 'stance_time'
DOUBLE_SUPPORT = 'double_support'

# Column order of the descriptive table.
PARAMETERS = (STEP_TIME, CADENCE, STANCE_TIME, DOUBLE_SUPPORT)

PARAMETER_LABELS = {
    STEP_TIME: 'Step time (s)',
    CADENCE: 'Cadence (steps/min)',
    STANCE_TIME: 'Stance time (s)',
    DOUBLE_SUPPORT: 'Double support (s)',
}


def check_parameter(name):
    if name not in PARAMETERS:
        raise InvalidInput(f'Unknown gait parameter: {name!r}')
    return name


@dataclass(frozen=True)
class GaitCycle:
    """One stride of ``foot``: heel contact to the next heel contact of the same foot."""

    foot: Foot
    hc: float
    next_hc: float
    to: float = None
    contralateral_hc: float = None
    contralateral_to: float = None
    pass_id: int = 0

    def __post_init__(self):
        if not self.hc < self.next_hc:
            raise InvalidInput(f'cycle needs hc < next_hc, got {self.hc} >= {self.next_hc}')
        if self.to is not None and not self.hc < self.to < self.next_hc:
            raise InvalidInput(f'cycle toe off {self.to} outside ({self.hc}, {self.next_hc})')

    @property
    def duration(self):
        return self.next_hc - self.hc

    def to_dict(self):
        return {
            'foot': self.foot.value,
            'hc': self.hc,
            'next_hc': self.next_hc,
            'to': self.to,
            'contralateral_hc': self.contralateral_hc,
            'contralateral_to': self.contralateral_to,
            'pass_id': self.pass_id,
        }


def _check_values(name, values, allow_zero=False):
    values = [float(v) for v in values]
    for v in values:
        if not math.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
            raise InvalidInput(f'{name} values must be {"non-negative" if allow_zero else "positive"} '
                               f'and finite, got {v!r}')
    return tuple(values)


@dataclass(frozen=True)
class TemporalParams:
    """The four temporal gait parameters of one trial, one value per step or cycle.

    Double support keeps its total per cycle plus the terminal (contralateral
    contact to own toe off) and initial (own next contact to contralateral
    toe off) phases. A cycle without overlap between the feet contributes 0.
    """

    trial_id: str
    source: str
    step_times_s: tuple = ()
    cadence_steps_per_min: tuple = ()
    stance_times_s: tuple = ()
    double_support_times_s: tuple = ()
    terminal_double_support_s: tuple = ()
    initial_double_support_s: tuple = ()
    subject_id: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'step_times_s', _check_values('step time', self.step_times_s))
        object.__setattr__(self, 'cadence_steps_per_min', _check_values('cadence', self.cadence_steps_per_min))
        object.__setattr__(self, 'stance_times_s', _check_values('stance time', self.stance_times_s))
        for name in ('double_support_times_s', 'terminal_double_support_s', 'initial_double_support_s'):
            object.__setattr__(self, name, _check_values('double support', getattr(self, name), allow_zero=True))

    def __repr__(self):
        return (f'<TemporalParams {self.trial_id} [{self.source}]: {len(self.step_times_s)} steps, '
                f'{len(self.stance_times_s)} stances>')

    def values(self, parameter, double_support='total'):
        """Per-step or per-cycle values of one parameter.

        ``double_support='terminal'`` selects the single terminal phase instead
        of the per-cycle total.
        """
        check_parameter(parameter)
        if parameter == STEP_TIME:
            return self.step_times_s
        if parameter == CADENCE:
            return self.cadence_steps_per_min
        if parameter == STANCE_TIME:
            return self.stance_times_s
        if double_support == 'terminal':
            return self.terminal_double_support_s
        if double_support != 'total':
            raise InvalidInput(f'double_support must be total or terminal, got {double_support!r}')
        return self.double_support_times_s

    def to_dict(self):
        return {
            'trial_id': self.trial_id,
            'subject_id': self.subject_id,
            'source': self.source,
            'step_times_s': list(self.step_times_s),
            'cadence_steps_per_min': list(self.cadence_steps_per_min),
            'stance_times_s': list(self.stance_times_s),
            'double_support_times_s': list(self.double_support_times_s),
            'terminal_double_support_s': list(self.terminal_double_support_s),
            'initial_double_support_s': list(self.initial_double_support_s),
        }


@dataclass(frozen=True)
class ParameterSummary:
    mean: float
    sd: float
    cv_percent: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInput('summary needs n >= 1')

    def to_dict(self):
        return {'mean': self.mean, 'sd': self.sd, 'cv_percent': self.cv_percent, 'n': self.n}


@dataclass(frozen=True)
class TrialAggregate:
    """Mean, SD and CV% per parameter for one trial or one pooled system row."""

    label: str
    summaries: dict = field(default_factory=dict)

    def __getitem__(self, parameter):
        return self.summaries[check_parameter(parameter)]

    def __repr__(self):
        return f'<TrialAggregate {self.label}: {", ".join(self.summaries)}>'

    def to_row(self):
        """Flat row in descriptive-table column order: mean, sd, cv_percent per parameter."""
        row = {}
        for parameter in PARAMETERS:
            if parameter not in self.summaries:
                continue
            summary = self.summaries[parameter]
            row[f'{parameter}_mean'] = summary.mean
            row[f'{parameter}_sd'] = summary.sd
            row[f'{parameter}_cv_percent'] = summary.cv_percent
        return row

    def to_dict(self):
        return {'label': self.label,
                'summaries': {name: s.to_dict() for name, s in self.summaries.items()}}
