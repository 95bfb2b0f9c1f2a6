import numpy as np
import pytest

from src.exceptions import InsufficientData, InvalidInput
from src.gait_events import detect_grf_events
from src.gait_params import (
    aggregate_trial, build_cycles, compute_cadence, compute_double_support, compute_stance_times,
    compute_step_times, compute_temporal_params, cv_percent, double_support_phases, per_video_value,
    pool_aggregate, summarize,
)
from src.models.events import EventConfig, EventKind, EventSequence, EventSource, Foot, GaitEvent
from src.models.params import CADENCE, DOUBLE_SUPPORT, PARAMETERS, STANCE_TIME, STEP_TIME, GaitCycle, TemporalParams
from src.synth import platform_feet


def sequence(*items):
    """EventSequence from (time, 'R'/'L', 'HC'/'TO'[, pass_id]) tuples."""
    events = []
    for item in items:
        time_s, foot, kind = item[:3]
        pass_id = item[3] if len(item) > 3 else 0
        events.append(GaitEvent(time_s, Foot.parse(foot), EventKind(kind), EventSource.FORCE, pass_id))
    return EventSequence(tuple(events))


# right stance [1.00, 1.70], left stance [1.55, 2.26], right contact again at 2.12
OVERLAPPING = sequence((1.00, 'R', 'HC'), (1.55, 'L', 'HC'), (1.70, 'R', 'TO'), (2.12, 'R', 'HC'),
                       (2.26, 'L', 'TO'), (2.80, 'R', 'TO'))


def params(steps, trial_id='t', subject_id='', stances=(0.7,), double_support=(0.14,)):
    return TemporalParams(
        trial_id=trial_id, source='Platforms', step_times_s=steps,
        cadence_steps_per_min=compute_cadence(steps), stance_times_s=stances,
        double_support_times_s=double_support, terminal_double_support_s=double_support,
        initial_double_support_s=[0.0] * len(double_support), subject_id=subject_id,
    )


def test_one_cycle_between_same_foot_contacts():
    cycles = build_cycles(OVERLAPPING)
    assert len(cycles) == 1
    cycle = cycles[0]
    assert cycle.foot is Foot.RIGHT
    assert (cycle.hc, cycle.next_hc, cycle.to) == (1.00, 2.12, 1.70)
    assert (cycle.contralateral_hc, cycle.contralateral_to) == (1.55, None)


def test_single_contact_gives_no_cycle():
    assert build_cycles(sequence((1.0, 'R', 'HC'))) == []


def test_cycles_do_not_cross_passes():
    e = sequence((1.0, 'R', 'HC', 0), (1.6, 'R', 'TO', 0), (5.0, 'R', 'HC', 1), (5.6, 'R', 'TO', 1))
    assert build_cycles(e) == []
    assert compute_step_times(e) == []


def test_step_times_between_opposite_feet():
    assert compute_step_times(OVERLAPPING) == pytest.approx([0.55, 0.57])


def test_same_foot_contacts_are_not_steps():
    e = sequence((1.0, 'R', 'HC'), (1.6, 'R', 'TO'), (2.1, 'R', 'HC'))
    assert compute_step_times(e) == []


@pytest.mark.parametrize('steps,expected', [
    ([0.5, 0.5], [120.0, 120.0]),
    ([0.6], [100.0]),
    ([0.55, 0.57], [109.0909, 105.2632]),
])
def test_cadence_per_step(steps, expected):
    assert compute_cadence(steps) == pytest.approx(expected, abs=1e-4)


@pytest.mark.parametrize('step', [0.0, -0.5])
def test_cadence_rejects_non_positive_steps(step):
    with pytest.raises(InvalidInput):
        compute_cadence([0.5, step])


def test_stance_time_and_missing_toe_off():
    assert compute_stance_times(build_cycles(OVERLAPPING)) == pytest.approx([0.70])
    cycles = [GaitCycle(Foot.RIGHT, 1.0, 2.1), GaitCycle(Foot.LEFT, 1.5, 2.6, to=2.2)]
    assert compute_stance_times(cycles) == pytest.approx([0.7])


def test_double_support_sums_both_phases():
    cycles = build_cycles(OVERLAPPING)
    phases = double_support_phases(cycles, OVERLAPPING)
    assert phases[0].terminal == pytest.approx(0.15)
    assert phases[0].initial == pytest.approx(0.14)
    assert compute_double_support(cycles, OVERLAPPING) == pytest.approx([0.29])


def test_disjoint_stances_have_zero_double_support():
    e = sequence((1.0, 'R', 'HC'), (1.4, 'R', 'TO'), (1.5, 'L', 'HC'), (2.0, 'L', 'TO'),
                 (2.1, 'R', 'HC'), (2.5, 'R', 'TO'))
    assert compute_double_support(build_cycles(e), e) == [0.0]
    assert compute_temporal_params(e, 'flight', 'Platforms').double_support_times_s == (0.0,)


def test_cv_percent_reproduces_published_rows():
    assert cv_percent(0.557, 0.039) == pytest.approx(7.002, abs=1e-3)
    assert cv_percent(0.552, 0.047) == pytest.approx(8.514, abs=1e-3)
    with pytest.raises(InvalidInput):
        cv_percent(0.0, 0.1)


# (mean, sd, cv%) of step time, cadence, stance time and double support per system
DESCRIPTIVE_ROWS = {
    'OPPT': [(0.552, 0.047, 8.514), (109.419, 9.253, 8.454), (0.670, 0.055, 8.209), (0.133, 0.019, 14.286)],
    'DLCPT': [(0.560, 0.073, 13.036), (108.627, 12.593, 11.590), (0.579, 0.086, 14.853), (0.130, 0.062, 47.692)],
    'DLCCT100': [(0.569, 0.074, 13.005), (107.348, 15.218, 14.178), (0.619, 0.089, 14.378),
                 (0.159, 0.053, 33.333)],
    'DLCCT180R': [(0.553, 0.040, 7.233), (109.118, 7.902, 7.240), (0.682, 0.061, 8.944), (0.138, 0.022, 15.942)],
    'DLCCT200': [(0.550, 0.051, 9.273), (110.042, 10.628, 9.660), (0.675, 0.063, 9.333), (0.143, 0.033, 23.077)],
    'DLCCT280R': [(0.556, 0.039, 7.014), (108.428, 7.709, 7.111), (0.703, 0.054, 7.681), (0.140, 0.018, 12.857)],
    'DLCCT300': [(0.556, 0.042, 7.554), (108.610, 8.323, 7.660), (0.684, 0.054, 7.895), (0.133, 0.020, 15.038)],
    'DLCCT380R': [(0.557, 0.042, 7.540), (108.225, 7.938, 7.336), (0.696, 0.056, 8.046), (0.136, 0.019, 13.971)],
    'DLCCT400': [(0.552, 0.038, 6.884), (109.128, 7.416, 6.799), (0.689, 0.056, 8.128), (0.135, 0.020, 14.815)],
    'Platforms': [(0.557, 0.039, 7.002), (108.139, 7.544, 6.972), (0.695, 0.053, 7.626), (0.136, 0.018, 13.235)],
}


@pytest.mark.parametrize('system', sorted(DESCRIPTIVE_ROWS))
def test_cv_matches_every_descriptive_row(system):
    for mean, sd, cv in DESCRIPTIVE_ROWS[system]:
        assert cv_percent(mean, sd) == pytest.approx(cv, abs=0.01)


def test_summarize_uses_the_sample_sd():
    summary = summarize([0.5, 0.6, 0.7])
    assert summary.mean == pytest.approx(0.6)
    assert summary.sd == pytest.approx(0.1)
    assert summary.cv_percent == pytest.approx(100 * 0.1 / 0.6)
    assert summary.n == 3


def test_summarize_constant_and_single_values():
    assert summarize([0.55] * 4).sd == 0.0
    assert summarize([0.55]).sd == 0.0
    with pytest.raises(InsufficientData):
        summarize([])


def test_mean_cadence_is_not_sixty_over_mean_step():
    p = params([0.5, 0.6])
    aggregate = aggregate_trial(p)
    assert aggregate[CADENCE].mean == pytest.approx(110.0)
    assert aggregate[CADENCE].mean > 60.0 / aggregate[STEP_TIME].mean


def test_pool_aggregate_steps_and_subjects():
    trials = [params([0.5, 0.7], 'a1', 'A'), params([0.6], 'a2', 'A'), params([0.5], 'b1', 'B')]
    pooled = pool_aggregate(trials, 'sys')
    assert pooled[STEP_TIME].n == 4
    assert pooled[STEP_TIME].mean == pytest.approx(0.575)
    by_subject = pool_aggregate(trials, 'sys', pooling='subjects')
    assert by_subject[STEP_TIME].n == 2
    assert by_subject[STEP_TIME].mean == pytest.approx((0.6 + 0.5) / 2)
    with pytest.raises(InvalidInput):
        pool_aggregate(trials, 'sys', pooling='videos')


def test_pool_aggregate_skip_empty():
    trials = [params([0.5, 0.6], double_support=())]
    with pytest.raises(InsufficientData):
        pool_aggregate(trials, 'sys')
    row = pool_aggregate(trials, 'sys', skip_empty=True)
    assert DOUBLE_SUPPORT not in row.summaries
    assert set(row.to_row()) == {f'{p}_{s}' for p in PARAMETERS[:3] for s in ('mean', 'sd', 'cv_percent')}


def test_per_video_value_is_the_trial_mean():
    p = params([0.5, 0.6])
    assert per_video_value(p, STEP_TIME) == pytest.approx(0.55)
    assert per_video_value(p, DOUBLE_SUPPORT, 'terminal') == pytest.approx(0.14)
    with pytest.raises(InsufficientData):
        per_video_value(params([0.5], stances=()), STANCE_TIME)


def test_truth_events_give_the_commanded_parameters(clean_trial):
    p = clean_trial.params
    result = compute_temporal_params(clean_trial.truth, p.trial_id, 'Platforms')
    sample = 1.0 / p.grf_fs
    # truth contacts sit on the force sample grid
    np.testing.assert_allclose(result.step_times_s, p.step_time_s, atol=sample + 1e-9)
    np.testing.assert_allclose(result.stance_times_s, p.stance_time_s, atol=sample + 1e-9)
    np.testing.assert_allclose(result.double_support_times_s, p.double_support_fraction * p.stride_time_s,
                               atol=2 * sample + 1e-9)


def test_force_channel_recovers_the_commanded_parameters(clean_trial):
    p = clean_trial.params
    events = detect_grf_events(clean_trial.grf, EventConfig(grf_threshold_n=p.contact_threshold_n),
                               platform_feet=platform_feet(p))
    aggregate = aggregate_trial(compute_temporal_params(events, p.trial_id, 'Platforms'))
    assert aggregate[STEP_TIME].mean == pytest.approx(p.step_time_s, abs=0.005)
    assert aggregate[CADENCE].mean == pytest.approx(60.0 / p.step_time_s, rel=0.005)
    assert aggregate[STANCE_TIME].mean == pytest.approx(p.stance_time_s, abs=0.005)
    assert aggregate[DOUBLE_SUPPORT].mean == pytest.approx(p.double_support_fraction * p.stride_time_s, abs=0.005)
