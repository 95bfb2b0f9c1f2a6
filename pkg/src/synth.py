"""Synthetic walking trials with exact ground-truth events.

A trial is an analytic event schedule rendered twice: as vertical force on
one platform per foot, and as 2D keypoints of a subject walking along +x at
constant speed. Feet are stationary during stance and swing linearly
between footholds. Noise and confidence dropouts come from generators seeded
per landmark, so a given seed always yields the same trial.
"""

import logging
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from src.exceptions import InvalidInput
from src.ingest import write_dlc_csv, write_grf_csv, write_openpose_frames
from src.models.events import EventKind, EventSequence, EventSource, Foot, GaitEvent
from src.models.grf import GrfSignal
from src.models.keypoints import BODY_25, KeypointSeries, LayoutName, TrialMeta, get_layout, normalize_part_name
from src.models.report import REFERENCE_SYSTEM

logger = logging.getLogger(__name__)

FRACTION_TOLERANCE = 1e-9
MANIFEST_COLUMNS = ['trial_id', 'subject_id', 'system_tag', 'format', 'path', 'fps', 'fs', 'platform_feet']

# Raised-cosine bumps on normalized loading time: (start, end) of each.
_LOADING_BUMP = (0.0, 0.6)
_PUSH_OFF_BUMP = (0.4, 1.0)
_PEAK_SCALE = 1.1
_EDGE_SCALE = 2.0

HIP_HEIGHT_PX = 240.0
GROUND_PX = 420.0
SWING_LIFT_PX = 12.0


@dataclass(frozen=True)
class SynthParams:
    """Schedule, rendering and noise settings of one synthetic trial.

    Double support per stride is ``2 * stance_fraction - 1`` for symmetric
    alternating gait; ``double_support_fraction`` must agree with it.
    """

    step_time_s: float = 0.557
    stance_fraction: float = 0.62
    double_support_fraction: float = 0.24
    n_strides: int = 10
    walk_speed_px_per_s: float = 45.0
    grf_fs: float = 1000.0
    cam_fps: float = 25.0
    subject_weight_n: float = 700.0
    contact_threshold_n: float = 10.0
    grf_sigma_n: float = 0.0
    kp_sigma_px: float = 0.0
    confidence_dropout_rate: float = 0.0
    seed: int = 0
    layout: LayoutName = LayoutName.DLCCT_16
    lead_in_s: float = 1.0
    tail_s: float = 1.0
    first_foot: Foot = Foot.RIGHT
    foot_length_px: float = 20.0
    start_x_px: float = 10.0
    trial_id: str = 'synth'
    subject_id: str = ''

    def __post_init__(self):
        d, s = self.double_support_fraction, self.stance_fraction
        if not 0 < d < s < 1:
            raise InvalidInput(f'need 0 < double_support_fraction < stance_fraction < 1, got {d} and {s}')
        if abs(d - (2 * s - 1)) > FRACTION_TOLERANCE:
            raise InvalidInput(f'inconsistent fractions: double support {d} must equal 2 * stance - 1 = {2 * s - 1:g}')
        if self.n_strides < 1:
            raise InvalidInput(f'n_strides must be positive, got {self.n_strides}')
        for name in ('step_time_s', 'walk_speed_px_per_s', 'grf_fs', 'cam_fps', 'subject_weight_n',
                     'foot_length_px'):
            if not getattr(self, name) > 0:
                raise InvalidInput(f'{name} must be positive, got {getattr(self, name)!r}')
        for name in ('grf_sigma_n', 'kp_sigma_px', 'lead_in_s', 'tail_s', 'contact_threshold_n'):
            if not getattr(self, name) >= 0:
                raise InvalidInput(f'{name} must be non-negative, got {getattr(self, name)!r}')
        if not 0 <= self.confidence_dropout_rate < 1:
            raise InvalidInput(f'confidence_dropout_rate must be in [0, 1), got {self.confidence_dropout_rate!r}')
        if self.contact_threshold_n >= _PEAK_SCALE * self.subject_weight_n / 2:
            raise InvalidInput('contact threshold must be below half the peak force')
        object.__setattr__(self, 'layout', LayoutName(self.layout))
        object.__setattr__(self, 'first_foot', Foot.parse(self.first_foot))

    @property
    def stride_time_s(self):
        return 2 * self.step_time_s

    @property
    def stance_time_s(self):
        return self.stance_fraction * self.stride_time_s

    @property
    def duration_s(self):
        return self.lead_in_s + 2 * self.n_strides * self.step_time_s + self.stance_time_s + self.tail_s


@dataclass(frozen=True)
class SynthTrial:
    grf: GrfSignal
    keypoints: KeypointSeries
    truth: EventSequence
    params: SynthParams
    meta: TrialMeta = field(default=None)

    def __repr__(self):
        return f'<SynthTrial {self.params.trial_id}: {len(self.truth)} events, {self.keypoints!r}>'


def _on_grid(time_s, fs):
    return round(time_s * fs) / fs


def contact_schedule(p, first=0, last=None):
    """(index, foot, hc, to) of scheduled contacts; index 0 is the first force-plate contact.

    Contact times lie on the force sample grid, so a stance covers whole
    samples and each truth event is a sample time.
    """
    last = 2 * p.n_strides if last is None else last
    contacts = []
    for j in range(first, last + 1):
        foot = p.first_foot if j % 2 == 0 else p.first_foot.other
        hc = p.lead_in_s + j * p.step_time_s
        contacts.append((j, foot, _on_grid(hc, p.grf_fs), _on_grid(hc + p.stance_time_s, p.grf_fs)))
    return contacts


def _truth_events(p):
    events = []
    for _, foot, hc, to in contact_schedule(p):
        events.append(GaitEvent(hc, foot, EventKind.HC, EventSource.FORCE, 0))
        events.append(GaitEvent(to, foot, EventKind.TO, EventSource.FORCE, 0))
    return EventSequence(tuple(events))


def _raised_cosine(tau, start, end):
    inside = (tau >= start) & (tau <= end)
    return np.where(inside, 0.5 * (1.0 - np.cos(2 * np.pi * (tau - start) / (end - start))), 0.0)


def stance_force(t, hc, to, weight_n, threshold_n, fs):
    """Vertical force of one stance: exactly zero outside [hc, to).

    Inside, a constant edge of ``2 * threshold_n`` carries a smooth double
    bump that starts and ends at zero. Zero-phase filtering then crosses the
    threshold midway between the last unloaded and the first loaded sample
    at either end, so the detected HC is the sample at ``hc`` and the
    detected TO the sample at ``to``.
    """
    # half-sample margins keep grid times on the right side of either edge
    inside = (t >= hc - 0.5 / fs) & (t < to - 0.5 / fs)
    tau = (t - hc) / (to - hc)
    bumps = _PEAK_SCALE * weight_n * (_raised_cosine(tau, *_LOADING_BUMP) + _raised_cosine(tau, *_PUSH_OFF_BUMP))
    return np.where(inside, _EDGE_SCALE * threshold_n + bumps, 0.0)


def _render_grf(p):
    n = int(round(p.duration_s * p.grf_fs))
    t = np.arange(n) / p.grf_fs
    forces = np.zeros((2, n))
    for j, _, hc, to in contact_schedule(p):
        forces[j % 2] += stance_force(t, hc, to, p.subject_weight_n, p.contact_threshold_n, p.grf_fs)
    if p.grf_sigma_n > 0:
        for platform in range(2):
            rng = np.random.default_rng([p.seed, 1000 + platform])
            forces[platform] += rng.normal(0.0, p.grf_sigma_n, n)
    return GrfSignal(fs=p.grf_fs, forces=forces)


def _heel_x(p, t, foot, hip_x_at):
    """Heel x of one foot: fixed during stance, linear swing between footholds."""
    knots_t, knots_x = [], []
    # two extra strides on each side keep the feet walking through lead-in and tail
    for _, contact_foot, hc, to in contact_schedule(p, first=-4, last=2 * p.n_strides + 4):
        if contact_foot is not foot:
            continue
        foothold = float(hip_x_at(hc)) + p.walk_speed_px_per_s * p.stance_time_s / 2.0
        knots_t += [hc, to]
        knots_x += [foothold, foothold]
    return np.interp(t, knots_t, knots_x)


def _swing_lift(p, t, foot):
    lift = np.zeros_like(t)
    contacts = [c for c in contact_schedule(p, first=-4, last=2 * p.n_strides + 4) if c[1] is foot]
    for (_, _, _, to), (_, _, next_hc, _) in zip(contacts, contacts[1:]):
        phase = (t - to) / (next_hc - to)
        inside = (phase > 0) & (phase < 1)
        lift[inside] = SWING_LIFT_PX * np.sin(np.pi * phase[inside])
    return lift


def _landmarks(p, t):
    """Noise-free (x, y) trajectories of every landmark any layout uses, keyed by normalized name."""
    v = p.walk_speed_px_per_s

    def hip_x_at(time):
        return p.start_x_px + v * np.asarray(time, dtype=float)

    hip_x = hip_x_at(t)
    hip_y = np.full_like(t, HIP_HEIGHT_PX)
    shoulder_y = hip_y - 120.0
    marks = {
        'midhip': (hip_x, hip_y),
        'neck': (hip_x + 2.0, hip_y - 130.0),
        'nose': (hip_x + 8.0, hip_y - 165.0),
        'chin': (hip_x + 6.0, hip_y - 150.0),
        'forehead': (hip_x + 6.0, hip_y - 180.0),
    }
    for foot in (Foot.RIGHT, Foot.LEFT):
        side = 'right' if foot is Foot.RIGHT else 'left'
        heel_x = _heel_x(p, t, foot, hip_x_at)
        lift = _swing_lift(p, t, foot)
        heel_y = GROUND_PX - lift
        ankle = (heel_x + 0.25 * p.foot_length_px, heel_y - 15.0)
        marks.update({
            f'{side}heel': (heel_x, heel_y),
            f'{side}toe': (heel_x + p.foot_length_px, GROUND_PX - 0.5 * lift),
            f'{side}bigtoe': (heel_x + p.foot_length_px, GROUND_PX - 0.5 * lift),
            f'{side}smalltoe': (heel_x + 0.85 * p.foot_length_px, GROUND_PX - 0.5 * lift),
            f'{side}ankle': ankle,
            f'{side}knee': ((ankle[0] + hip_x) / 2.0 + 4.0, (ankle[1] + hip_y) / 2.0),
            f'{side}hip': (hip_x, hip_y),
            f'{side}shoulder': (hip_x, shoulder_y),
            f'{side}elbow': (hip_x + 3.0, shoulder_y + 55.0),
            f'{side}wrist': (hip_x + 6.0, shoulder_y + 105.0),
            f'{side}eye': (hip_x + 7.0, hip_y - 172.0),
            f'{side}ear': (hip_x - 2.0, hip_y - 170.0),
        })
    return marks


def render_keypoints(p, layout=None):
    """Keypoints of the trial in any layout, with the trial's noise and dropouts."""
    layout = get_layout(layout or p.layout)
    n = int(np.floor(p.duration_s * p.cam_fps)) + 1
    t = np.arange(n) / p.cam_fps
    marks = _landmarks(p, t)
    landmark_ids = {name: i for i, name in enumerate(sorted(marks))}
    data = np.empty((n, layout.part_count, 3))
    for part in layout.parts:
        name = normalize_part_name(part.name)
        x, y = marks[name]
        rng = np.random.default_rng([p.seed, landmark_ids[name]])
        noise = rng.normal(0.0, p.kp_sigma_px, (2, n)) if p.kp_sigma_px > 0 else np.zeros((2, n))
        confidence = rng.uniform(0.85, 1.0, n)
        dropped = rng.random(n) < p.confidence_dropout_rate
        garbage_x = rng.uniform(0.0, 640.0, n)
        garbage_y = rng.uniform(0.0, 480.0, n)
        data[:, part.index, 0] = np.where(dropped, garbage_x, x + noise[0])
        data[:, part.index, 1] = np.where(dropped, garbage_y, y + noise[1])
        data[:, part.index, 2] = np.where(dropped, rng.uniform(0.0, 0.45, n), confidence)
    return KeypointSeries(layout, p.cam_fps, data)


def generate_trial(p):
    """Render one synthetic trial and its ground-truth events."""
    meta = TrialMeta(trial_id=p.trial_id, subject_id=p.subject_id, camera_fps=p.cam_fps)
    trial = SynthTrial(
        grf=_render_grf(p),
        keypoints=render_keypoints(p),
        truth=_truth_events(p).with_meta(meta),
        params=p,
        meta=meta,
    )
    logger.debug('Generated %r', trial)
    return trial


def platform_feet(p):
    """Platform map of a synthetic trial: platform 0 carries the first foot."""
    return {0: p.first_foot, 1: p.first_foot.other}


def write_trial(trial, directory, openpose=False):
    """Write a trial in the ingest formats: grf.csv, keypoints.csv and optional OpenPose frames.

    Returns:
        dict of written paths keyed 'grf', 'dlc' and (optionally) 'openpose'.
    """
    os.makedirs(directory, exist_ok=True)
    paths = {
        'grf': os.path.join(directory, 'grf.csv'),
        'dlc': os.path.join(directory, 'keypoints.csv'),
    }
    write_grf_csv(trial.grf, paths['grf'])
    write_dlc_csv(trial.keypoints, paths['dlc'])
    if openpose:
        paths['openpose'] = os.path.join(directory, 'openpose')
        write_openpose_frames(render_keypoints(trial.params, BODY_25.name), paths['openpose'],
                              video_name=trial.params.trial_id)
    return paths


def study_params(base, n_trials, step_sd_s=0.039, seed=0):
    """Per-trial parameters of a study: step time varies across trials, everything else follows ``base``."""
    if n_trials < 1:
        raise InvalidInput(f'n_trials must be positive, got {n_trials}')
    rng = np.random.default_rng([seed, 7])
    steps = np.clip(rng.normal(base.step_time_s, step_sd_s, n_trials), 0.45, 0.7)
    values = {name: getattr(base, name) for name in base.__dataclass_fields__}
    params = []
    for i, step in enumerate(steps):
        values.update(step_time_s=float(step), seed=base.seed + i, trial_id=f'trial{i + 1:02d}',
                      subject_id=f'S{i // 2 + 1:02d}')
        params.append(SynthParams(**values))
    return params


def _feet_text(mapping):
    return ';'.join(f'{platform}:{foot.value}' for platform, foot in sorted(mapping.items()))


def write_study(params_list, directory, system_tag='DLCCT', openpose=False):
    """Generate and write every trial, plus a manifest pairing each video with the platforms.

    Returns:
        path of the written manifest.csv.
    """
    rows = []
    for p in params_list:
        trial = generate_trial(p)
        trial_dir = os.path.join(directory, p.trial_id)
        paths = write_trial(trial, trial_dir, openpose=openpose)
        relative = {kind: os.path.relpath(path, directory) for kind, path in paths.items()}
        rows.append([p.trial_id, p.subject_id, REFERENCE_SYSTEM, 'grf', relative['grf'], '', p.grf_fs,
                     _feet_text(platform_feet(p))])
        rows.append([p.trial_id, p.subject_id, system_tag, 'dlc', relative['dlc'], p.cam_fps, '', ''])
        if openpose:
            rows.append([p.trial_id, p.subject_id, 'OPPT', 'openpose', relative['openpose'], p.cam_fps, '', ''])
    manifest = os.path.join(directory, 'manifest.csv')
    pd.DataFrame(rows, columns=MANIFEST_COLUMNS).to_csv(manifest, index=False, lineterminator='\n')
    logger.info('Wrote %d synthetic trials to %s', len(params_list), directory)
    return manifest
