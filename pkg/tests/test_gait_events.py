import numpy as np
import pytest

from src.dsp import design_butterworth
from src.exceptions import InsufficientData, InvalidInput
from src.gait_events import (
    detect_grf_events, detect_kinematic_events, enforce_alternation, first_foot_from_keypoints, foot_parts,
    refine_maximum, segment_passes, split_force_passes, supra_threshold_runs,
)
from src.gait_params import compute_step_times, compute_temporal_params
from src.models.events import Direction, EventConfig, EventKind, EventSource, Foot, PassWindow
from src.models.grf import GrfSignal
from src.models.keypoints import BODY_25, DLCCT_16, DLCPT_14, KeypointSeries, LayoutName
from src.synth import SynthParams, generate_trial, platform_feet, render_keypoints

# near-identity filter so hand-built force shapes keep their threshold crossings
WIDE = design_butterworth(2, 400.0, 1000.0)


def trapezoid(n=2500):
    """0 N until sample 1000, +4 N/sample to 800 N, plateau, -4 N/sample back to 0 at sample 1702."""
    i = np.arange(n, dtype=float)
    return np.clip(np.minimum(4.0 * (i - 1000), 4.0 * (1702 - i)), 0.0, 800.0)


def times(events, foot=None, kind=None):
    return [e.time_s for e in events.select(foot=foot, kind=kind)]


def test_supra_threshold_runs():
    assert supra_threshold_runs(np.array([0, 20, 20, 0, 30.0]), 10) == [(1, 3), (4, 5)]
    assert supra_threshold_runs(np.array([10, 10, 10.0]), 10) == []


def test_trapezoid_threshold_crossings():
    events = detect_grf_events(GrfSignal(1000.0, trapezoid()), filter=WIDE)
    assert times(events, kind=EventKind.HC) == [pytest.approx(1.003)]
    assert times(events, kind=EventKind.TO) == [pytest.approx(1.700)]
    assert all(e.source is EventSource.FORCE for e in events)


def test_short_runs_are_debounced():
    force = trapezoid(4000)
    force[3000:3050] = 200.0
    events = detect_grf_events(GrfSignal(1000.0, force), filter=WIDE)
    assert len(events) == 2
    with pytest.raises(InsufficientData):
        detect_grf_events(GrfSignal(1000.0, force), EventConfig(min_stance_s=0.8), filter=WIDE)


def test_runs_cut_by_the_recording_edge_are_dropped():
    force = np.concatenate([np.full(400, 500.0), trapezoid()])
    events = detect_grf_events(GrfSignal(1000.0, force), filter=WIDE)
    assert times(events, kind=EventKind.HC) == [pytest.approx(1.403)]


def test_no_contact_raises():
    with pytest.raises(InsufficientData):
        detect_grf_events(GrfSignal(1000.0, np.zeros(3000)))


def test_split_force_passes_on_long_gaps():
    contacts = [(0, 100, 0), (150, 250, 1), (2000, 2100, 0)]
    assert split_force_passes(contacts, 1000.0, 1.0) == [contacts[:2], contacts[2:]]


def _worst(truth, detected):
    """Largest distance from a truth event to the nearest detected event of the same foot and kind."""
    worst = 0.0
    for event in truth:
        candidates = times(detected, event.foot, event.kind)
        assert candidates, f'no {event.foot.value} {event.kind.value} detected'
        worst = max(worst, min(abs(t - event.time_s) for t in candidates))
    return worst


def _match(truth, detected, tolerance):
    return _worst(truth, detected) <= tolerance


def test_force_events_match_synthetic_truth(clean_trial):
    p = clean_trial.params
    events = detect_grf_events(clean_trial.grf, EventConfig(grf_threshold_n=p.contact_threshold_n),
                               platform_feet=platform_feet(p))
    assert len(events) == len(clean_trial.truth)
    for found, expected in zip(events, clean_trial.truth):
        assert found.foot is expected.foot
        assert found.kind is expected.kind
        assert abs(found.time_s - expected.time_s) <= 1.0 / p.grf_fs + 1e-9


def test_force_events_with_noise_stay_within_two_ms(noisy_trial):
    p = noisy_trial.params
    events = detect_grf_events(noisy_trial.grf, platform_feet=platform_feet(p))
    assert len(events) == len(noisy_trial.truth)
    assert _match(noisy_trial.truth, events, 0.002 + 1e-9)


def test_force_feet_alternate_from_first_foot(clean_trial):
    events = detect_grf_events(clean_trial.grf, first_foot=Foot.LEFT)
    assert events.select(kind=EventKind.HC)[0].foot is Foot.LEFT
    assert events.select(kind=EventKind.HC)[1].foot is Foot.RIGHT


def test_conflicting_platform_map_raises(clean_trial):
    with pytest.raises(InvalidInput):
        detect_grf_events(clean_trial.grf, platform_feet={0: Foot.RIGHT, 1: Foot.RIGHT})
    with pytest.raises(InvalidInput):
        detect_grf_events(clean_trial.grf, platform_feet={0: Foot.RIGHT})


def test_first_foot_from_keypoints(clean_trial):
    decide = first_foot_from_keypoints(clean_trial.keypoints)
    assert decide(0, clean_trial.params.lead_in_s) is Foot.RIGHT
    left_first = generate_trial(SynthParams(first_foot=Foot.LEFT))
    assert first_foot_from_keypoints(left_first.keypoints)(0, 1.0) is Foot.LEFT


def hip_series(hip_x, fps=25.0):
    """DLCCT_16 series whose every part follows the given x trajectory."""
    n = len(hip_x)
    data = np.ones((n, DLCCT_16.part_count, 3))
    data[:, :, 0] = np.asarray(hip_x, dtype=float)[:, None]
    data[:, :, 1] = 240.0
    return KeypointSeries(DLCCT_16, fps, data)


def test_segment_passes_monotone():
    windows = segment_passes(hip_series(np.linspace(50, 600, 200)))
    assert len(windows) == 1
    assert windows[0].direction is Direction.POSITIVE_X


def test_segment_passes_single_turnaround():
    hip = np.concatenate([np.linspace(50, 600, 150), np.linspace(600, 50, 150)])
    windows = segment_passes(hip_series(hip))
    assert [w.direction for w in windows] == [Direction.POSITIVE_X, Direction.NEGATIVE_X]
    assert [w.pass_id for w in windows] == [0, 1]


def test_segment_passes_triangle_wave_with_ten_legs():
    leg = np.linspace(50, 600, 50, endpoint=False)
    hip = np.concatenate([leg if i % 2 == 0 else leg[::-1] + (leg[1] - leg[0]) for i in range(10)])
    windows = segment_passes(hip_series(hip))
    assert len(windows) == 10
    assert [w.direction for w in windows] == [Direction.POSITIVE_X, Direction.NEGATIVE_X] * 5


def test_segment_passes_drops_short_displacements():
    assert segment_passes(hip_series(np.linspace(300, 340, 200))) == []


def test_kinematic_events_match_synthetic_truth(clean_trial):
    k = clean_trial.keypoints
    events = detect_kinematic_events(k)
    assert not events.ankle_substituted
    inner = [e for e in clean_trial.truth if 1.5 <= e.time_s <= clean_trial.params.duration_s - 1.5]
    for kind in (EventKind.HC, EventKind.TO):
        expected = [e for e in inner if e.kind is kind]
        assert expected
        # knee fits land on the scheduled contact, not just the nearest frame
        assert _worst(expected, events) <= 0.25 / k.fps
    assert all(e.source is EventSource.KINEMATIC for e in events)


def test_kinematic_events_with_noise_keep_step_time(noisy_trial):
    steps = compute_step_times(detect_kinematic_events(noisy_trial.keypoints))
    assert steps
    assert abs(np.mean(steps) - noisy_trial.params.step_time_s) <= 0.04


ORACLE_SEEDS = list(range(20))


def oracle_trial(seed):
    return generate_trial(SynthParams(trial_id=f'oracle{seed:02d}', grf_sigma_n=2.0, kp_sigma_px=2.0,
                                      confidence_dropout_rate=0.05, seed=seed))


@pytest.mark.parametrize('seed', ORACLE_SEEDS)
def test_force_channel_oracle(seed):
    trial = oracle_trial(seed)
    p = trial.params
    events = detect_grf_events(trial.grf, platform_feet=platform_feet(p))
    assert len(events) == len(trial.truth)
    for found, expected in zip(events, trial.truth):
        assert (found.foot, found.kind) == (expected.foot, expected.kind)
        assert abs(found.time_s - expected.time_s) <= 0.002 + 1e-9
    result = compute_temporal_params(events, p.trial_id, 'Platforms')
    assert np.mean(result.step_times_s) == pytest.approx(p.step_time_s, abs=0.005)
    assert np.mean(result.stance_times_s) == pytest.approx(p.stance_time_s, abs=0.005)
    assert np.mean(result.double_support_times_s) == pytest.approx(p.double_support_fraction * p.stride_time_s,
                                                                   abs=0.005)


@pytest.mark.parametrize('seed', ORACLE_SEEDS)
def test_kinematic_channel_oracle(seed):
    trial = oracle_trial(seed)
    k = trial.keypoints
    events = detect_kinematic_events(k)
    for kind in (EventKind.HC, EventKind.TO):
        assert _worst(trial.truth.select(kind=kind), events) <= 2.0 / k.fps + 1e-9
    steps = compute_step_times(events)
    assert abs(np.mean(steps) - trial.params.step_time_s) <= 1.0 / k.fps


def test_kinematic_events_shift_with_the_input(clean_trial):
    k = clean_trial.keypoints
    shift = 10
    events = detect_kinematic_events(k, passes=[PassWindow(0, k.n_frames, Direction.POSITIVE_X)])
    shifted = detect_kinematic_events(k.shifted(shift),
                                      passes=[PassWindow(0, k.n_frames + shift, Direction.POSITIVE_X)])
    inner = [e for e in events if 1.5 <= e.time_s <= k.n_frames / k.fps - 1.5]
    assert inner
    for event in inner:
        candidates = times(shifted, event.foot, event.kind)
        assert min(abs(t - event.time_s - shift / k.fps) for t in candidates) < 1e-9


def test_kinematic_events_ignore_uniform_x_scaling(clean_trial):
    k = clean_trial.keypoints
    data = k.data.copy()
    data[:, :, 0] *= 2.0
    scaled = KeypointSeries(k.layout, k.fps, data)
    window = [PassWindow(0, k.n_frames, Direction.POSITIVE_X)]
    base = detect_kinematic_events(k, passes=window)
    doubled = detect_kinematic_events(scaled, EventConfig(peak_prominence_px=20.0), passes=window)
    assert [(e.time_s, e.foot, e.kind) for e in base] == [(e.time_s, e.foot, e.kind) for e in doubled]


def test_ankle_substitution_for_layouts_without_heels():
    p = SynthParams(layout=LayoutName.DLCPT_14)
    k = render_keypoints(p)
    assert k.layout == DLCPT_14
    events = detect_kinematic_events(k)
    assert events.ankle_substituted
    assert len(events.select(kind=EventKind.HC)) > 0


def test_standing_subject_yields_no_events():
    events = detect_kinematic_events(hip_series(np.full(100, 320.0)))
    assert len(events) == 0


def test_explicit_empty_pass_list_is_rejected(clean_trial):
    with pytest.raises(InvalidInput):
        detect_kinematic_events(clean_trial.keypoints, passes=[])


def test_foot_parts():
    parts, substituted = foot_parts(BODY_25)
    assert not substituted
    assert parts[Foot.RIGHT] == (BODY_25.part_index('RHeel'), BODY_25.part_index('RBigToe'))
    parts, substituted = foot_parts(DLCPT_14)
    assert substituted
    assert parts[Foot.LEFT] == (DLCPT_14.part_index('ankle2'), DLCPT_14.part_index('ankle2'))


def test_refine_maximum_finds_the_knee_between_frames():
    x = np.arange(21, dtype=float)
    tent = 5.0 - np.abs(x - 10.3)
    assert refine_maximum(tent, 10, 0, 20) == pytest.approx(10.3, abs=1e-3)
    # noise on the flanks barely moves a fit over the whole window
    noisy = tent + np.random.default_rng(4).normal(0.0, 0.05, x.size)
    assert refine_maximum(noisy, 10, 0, 20) == pytest.approx(10.3, abs=0.1)


def test_refine_maximum_falls_back_to_a_parabola():
    y = np.array([0.0, 1.0, 0.5, 0.0, -0.5])
    # one sample before the peak is too few for a line fit
    assert refine_maximum(y, 1, 0, 4) == pytest.approx(1.0 + 1.0 / 6.0)
    # a valley is no maximum, so the offset comes from the fallback signal
    assert refine_maximum(np.abs(np.arange(9.0) - 4.0), 4, 0, 8, fallback=np.zeros(9)) == 4.0


def test_enforce_alternation_keeps_the_more_prominent_event():
    kept = enforce_alternation([(10, EventKind.HC, 5.0), (12, EventKind.HC, 8.0),
                                (20, EventKind.TO, 3.0), (30, EventKind.TO, 3.0)])
    assert kept == [(12, EventKind.HC, 8.0), (20, EventKind.TO, 3.0)]
