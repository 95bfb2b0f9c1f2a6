"""Gait cycles, the four temporal gait parameters, and their aggregation."""

import logging
from collections import defaultdict
from typing import NamedTuple

import numpy as np

from src.exceptions import InsufficientData, InvalidInput
from src.models.events import EventKind, Foot
from src.models.params import (
    PARAMETERS, GaitCycle, ParameterSummary, TemporalParams, TrialAggregate, check_parameter,
)

logger = logging.getLogger(__name__)


class Stance(NamedTuple):
    hc: float
    to: float  # None when the trial ends before toe off


class DoubleSupport(NamedTuple):
    terminal: float
    initial: float

    @property
    def total(self):
        return self.terminal + self.initial


def _stances(e, foot, pass_id):
    """Stance intervals of one foot in one pass, in time order."""
    stances = []
    for event in e.select(foot=foot, pass_id=pass_id):
        if event.kind is EventKind.HC:
            stances.append(Stance(event.time_s, None))
        elif stances and stances[-1].to is None:
            stances[-1] = Stance(stances[-1].hc, event.time_s)
    return stances


def _first_in(events, lo, hi):
    for event in events:
        if lo <= event.time_s < hi:
            return event.time_s
    return None


def build_cycles(e):
    """One GaitCycle per pair of consecutive same-foot heel contacts within a pass.

    The foot's own toe off and the first contralateral HC and TO inside
    [hc, next_hc) are attached when present.
    """
    cycles = []
    for pass_id in e.pass_ids:
        for foot in (Foot.LEFT, Foot.RIGHT):
            contacts = e.select(foot=foot, kind=EventKind.HC, pass_id=pass_id)
            own_offs = e.select(foot=foot, kind=EventKind.TO, pass_id=pass_id)
            other_hcs = e.select(foot=foot.other, kind=EventKind.HC, pass_id=pass_id)
            other_tos = e.select(foot=foot.other, kind=EventKind.TO, pass_id=pass_id)
            for current, following in zip(contacts, contacts[1:]):
                hc, next_hc = current.time_s, following.time_s
                to = _first_in(own_offs, hc, next_hc)
                cycles.append(GaitCycle(
                    foot=foot, hc=hc, next_hc=next_hc, to=to if to is None or to > hc else None,
                    contralateral_hc=_first_in(other_hcs, hc, next_hc),
                    contralateral_to=_first_in(other_tos, hc, next_hc),
                    pass_id=pass_id,
                ))
    cycles.sort(key=lambda c: (c.hc, c.foot.value))
    return cycles


def compute_step_times(e):
    """Intervals between consecutive heel contacts of opposite feet within each pass."""
    steps = []
    for pass_id in e.pass_ids:
        contacts = e.select(kind=EventKind.HC, pass_id=pass_id)
        for previous, current in zip(contacts, contacts[1:]):
            if previous.foot is not current.foot:
                steps.append(current.time_s - previous.time_s)
    return steps


def compute_cadence(step_times):
    """Per-step cadence in steps per minute: 60 / step time."""
    cadence = []
    for step in step_times:
        if not step > 0:
            raise InvalidInput(f'step time must be positive, got {step!r}')
        cadence.append(60.0 / step)
    return cadence


def compute_stance_times(cycles):
    """``to - hc`` per cycle; cycles without a toe off are skipped."""
    return [cycle.to - cycle.hc for cycle in cycles if cycle.to is not None]


def _overlap(a_start, a_end, b_start, b_end):
    a_end = np.inf if a_end is None else a_end
    b_end = np.inf if b_end is None else b_end
    return max(0.0, min(a_end, b_end) - max(a_start, b_start))


def double_support_phases(cycles, e):
    """Terminal and initial double support per cycle.

    The contralateral stance starting inside [hc, next_hc) overlaps the
    cycle foot's current stance (terminal phase) and its next stance, from
    next_hc on (initial phase). Cycles without such a contralateral stance,
    or whose contralateral toe off is missing, are skipped.
    """
    stances = {}
    phases = []
    for cycle in cycles:
        for foot in (cycle.foot, cycle.foot.other):
            if (foot, cycle.pass_id) not in stances:
                stances[foot, cycle.pass_id] = _stances(e, foot, cycle.pass_id)
        own = stances[cycle.foot, cycle.pass_id]
        contra = [s for s in stances[cycle.foot.other, cycle.pass_id] if cycle.hc <= s.hc < cycle.next_hc]
        if not contra or contra[0].to is None:
            logger.debug('Cycle %s@%.3f: no contralateral stance, skipped', cycle.foot.value, cycle.hc)
            continue
        other = contra[0]
        following = next((s for s in own if s.hc == cycle.next_hc), Stance(cycle.next_hc, None))
        terminal = _overlap(cycle.hc, cycle.to if cycle.to is not None else cycle.next_hc, other.hc, other.to)
        initial = _overlap(following.hc, following.to, other.hc, other.to)
        phases.append(DoubleSupport(terminal, initial))
    return phases


def compute_double_support(cycles, e):
    """Total double support (terminal + initial phase) per cycle."""
    return [phase.total for phase in double_support_phases(cycles, e)]


def compute_temporal_params(e, trial_id, source, subject_id=''):
    """All four parameters of one event sequence."""
    cycles = build_cycles(e)
    steps = [step for step in compute_step_times(e) if step > 0]
    phases = double_support_phases(cycles, e)
    params = TemporalParams(
        trial_id=trial_id,
        source=source,
        step_times_s=steps,
        cadence_steps_per_min=compute_cadence(steps),
        stance_times_s=compute_stance_times(cycles),
        double_support_times_s=[phase.total for phase in phases],
        terminal_double_support_s=[phase.terminal for phase in phases],
        initial_double_support_s=[phase.initial for phase in phases],
        subject_id=subject_id,
    )
    logger.debug('%s [%s]: %d cycles, %d steps', trial_id, source, len(cycles), len(steps))
    return params


def cv_percent(mean, sd):
    """Coefficient of variation in percent."""
    if not mean > 0:
        raise InvalidInput(f'CV needs a positive mean, got {mean!r}')
    return 100.0 * sd / mean


def summarize(values, name='parameter'):
    """Mean, sample SD (0 for one value) and CV% of a list of values."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise InsufficientData(f'no {name} values to aggregate')
    mean = float(values.mean())
    sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return ParameterSummary(mean=mean, sd=sd, cv_percent=cv_percent(mean, sd), n=int(values.size))


def aggregate_trial(p, double_support='total'):
    """TrialAggregate of every parameter of one trial."""
    return TrialAggregate(
        label=p.trial_id,
        summaries={name: summarize(p.values(name, double_support), name) for name in PARAMETERS},
    )


def per_video_value(p, parameter, double_support='total'):
    """The value one video contributes to the agreement analysis: the mean of its steps or cycles."""
    values = p.values(check_parameter(parameter), double_support)
    if not values:
        raise InsufficientData(f'{p.trial_id}: no {parameter} values', context=p.source)
    return float(np.mean(values))


def pool_aggregate(params, label, pooling='steps', double_support='total', skip_empty=False):
    """Aggregate several trials into one descriptive row.

    ``pooling='steps'`` summarizes every step or cycle of every trial;
    ``pooling='subjects'`` summarizes the per-subject means. With
    ``skip_empty`` a parameter without any value is left out of the row
    instead of raising InsufficientData.
    """
    if pooling not in ('steps', 'subjects'):
        raise InvalidInput(f'pooling must be steps or subjects, got {pooling!r}')
    summaries = {}
    for name in PARAMETERS:
        if pooling == 'steps':
            values = [v for p in params for v in p.values(name, double_support)]
        else:
            by_subject = defaultdict(list)
            for p in params:
                by_subject[p.subject_id or p.trial_id].extend(p.values(name, double_support))
            values = [float(np.mean(v)) for _, v in sorted(by_subject.items()) if v]
        if not values and skip_empty:
            logger.warning('%s: no %s values, left out of the descriptive table', label, name)
            continue
        summaries[name] = summarize(values, name)
    return TrialAggregate(label=label, summaries=summaries)
