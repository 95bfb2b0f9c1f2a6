"""Heel-contact and toe-off detection from force platforms and from 2D keypoints."""

import logging

import numpy as np
from scipy import optimize, signal

from src.dsp import MaskedSeries, design_butterworth, filtfilt, interpolate_gaps, preprocess_trajectory
from src.exceptions import InsufficientData, InvalidInput
from src.models.events import (
    Direction, EventConfig, EventKind, EventSequence, EventSource, Foot, GaitEvent, PassWindow,
)

logger = logging.getLogger(__name__)

GRF_FILTER = (2, 20.0)
KINEMATIC_FILTER = (4, 5.0)

# knee fits reach at most this far from an event and stop this many frames short of its neighbours
KNEE_REACH_S = 0.4
KNEE_NEIGHBOUR_MARGIN = 2
KNEE_SEARCH_FRAMES = 3.0

_FEET = (Foot.LEFT, Foot.RIGHT)


def _side(foot):
    return 'left' if foot is Foot.LEFT else 'right'


# ---------------------------------------------------------------- force channel

def supra_threshold_runs(force, threshold):
    """(start, end) sample pairs of runs with force > threshold; end is the first sample back at or below it."""
    above = np.concatenate([[0], (force > threshold).astype(np.int8), [0]])
    edges = np.diff(above)
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))


def _contacts(grf, cfg, spec):
    min_samples = cfg.min_stance_s * grf.fs
    contacts = []
    for platform in range(grf.n_platforms):
        filtered = filtfilt(grf.forces[platform], spec)
        for start, end in supra_threshold_runs(filtered, cfg.grf_threshold_n):
            if start == 0 or end == grf.n_samples:
                logger.debug('Platform %d: contact at sample %d cut by the recording edge, skipped', platform, start)
                continue
            if end - start < min_samples:
                logger.debug('Platform %d: %d-sample run below min stance, skipped', platform, end - start)
                continue
            contacts.append((int(start), int(end), platform))
    contacts.sort()
    return contacts


def split_force_passes(contacts, fs, gap_s):
    """Group time-sorted contacts into passes separated by unloaded gaps longer than ``gap_s``."""
    passes = []
    loaded_until = None
    for contact in contacts:
        start, end, _ = contact
        if loaded_until is None or (start - loaded_until) / fs > gap_s:
            passes.append([])
        passes[-1].append(contact)
        loaded_until = end if loaded_until is None else max(loaded_until, end)
    return passes


def _pass_feet(contacts, pass_id, platform_feet, first_foot, fs, t0):
    if platform_feet is not None:
        mapping = platform_feet[pass_id] if isinstance(platform_feet, (list, tuple)) else platform_feet
        feet = []
        for _, _, platform in contacts:
            if platform not in mapping:
                raise InvalidInput(f'platform {platform} has no foot in the platform map for pass {pass_id}')
            feet.append(Foot.parse(mapping[platform]))
    else:
        first = first_foot(pass_id, t0 + contacts[0][0] / fs) if callable(first_foot) else Foot.parse(first_foot)
        feet = [first if i % 2 == 0 else first.other for i in range(len(contacts))]
    for previous, current, contact in zip(feet, feet[1:], contacts[1:]):
        if previous is current:
            raise InvalidInput(f'conflicting platform map: two consecutive {current.value} contacts '
                               f'in pass {pass_id} (platform {contact[2]})')
    return feet


def detect_grf_events(g, cfg=None, filter=None, platform_feet=None, first_foot=Foot.RIGHT,
                      pass_gap_s=1.0, meta=None):
    """Heel contacts and toe offs from vertical force.

    After zero-phase filtering, each run of force above ``cfg.grf_threshold_n``
    is a contact: HC is its first sample, TO the first sample back at or
    below the threshold. Runs shorter than ``cfg.min_stance_s`` and runs cut
    by either end of the recording are discarded.

    Args:
        g: GrfSignal.
        cfg: EventConfig, defaults when omitted.
        filter: FilterSpec, 2nd order 20 Hz by default.
        platform_feet: platform index -> Foot, or one such map per pass.
            Without it feet alternate in contact order within each pass.
        first_foot: Foot of the first contact of every pass, or a callable
            ``(pass_id, hc_time_s) -> Foot``.
        pass_gap_s: unloaded gap that starts a new pass.

    Raises:
        InsufficientData: no contact survives.
        InvalidInput: platform map missing a platform or assigning the same
            foot to consecutive contacts.
    """
    cfg = cfg or EventConfig()
    spec = filter or design_butterworth(GRF_FILTER[0], GRF_FILTER[1], g.fs)
    contacts = _contacts(g, cfg, spec)
    if not contacts:
        raise InsufficientData(f'no force run above {cfg.grf_threshold_n:g} N lasting {cfg.min_stance_s:g} s',
                               context=getattr(meta, 'trial_id', None))

    events = []
    for pass_id, pass_contacts in enumerate(split_force_passes(contacts, g.fs, pass_gap_s)):
        feet = _pass_feet(pass_contacts, pass_id, platform_feet, first_foot, g.fs, g.t0)
        for (start, end, _), foot in zip(pass_contacts, feet):
            events.append(GaitEvent(g.t0 + start / g.fs, foot, EventKind.HC, EventSource.FORCE, pass_id))
            events.append(GaitEvent(g.t0 + end / g.fs, foot, EventKind.TO, EventSource.FORCE, pass_id))
    logger.debug('Force events: %d contacts in %d passes', len(contacts), events[-1].pass_id + 1)
    return EventSequence(tuple(events), meta)


# ------------------------------------------------------------ kinematic channel

def _hip_masked(k, threshold):
    layout = k.layout
    with np.errstate(invalid='ignore'):
        valid = k.sample_valid & (k.confidence >= threshold)
    mid = layout.role_index('mid_hip')
    if mid is not None:
        return MaskedSeries(k.x[:, mid], valid[:, mid], k.fps)
    left, right = layout.role_index('left_hip'), layout.role_index('right_hip')
    if left is None or right is None:
        raise InvalidInput(f'{layout.name.value} has no hip keypoints')
    both = valid[:, left] & valid[:, right]
    return MaskedSeries(np.where(both, (k.x[:, left] + k.x[:, right]) / 2.0, 0.0), both, k.fps)


def hip_trajectory(k, threshold=0.5, filter=None, order='mask_first'):
    """Preprocessed hip x: the mid-hip keypoint, or the mean of both hips."""
    hip = _hip_masked(k, threshold)
    if hip.valid_count < 2:
        raise InsufficientData('no hip trajectory: fewer than 2 valid hip samples')
    spec = filter or design_butterworth(KINEMATIC_FILTER[0], KINEMATIC_FILTER[1], k.fps)
    return preprocess_trajectory(hip, spec, order)


def _sign_runs(signs):
    runs = []
    start = 0
    for i in range(1, len(signs) + 1):
        if i == len(signs) or signs[i] != signs[start]:
            runs.append([start, i, signs[start]])
            start = i
    return runs


def _merge_short_runs(runs, min_frames):
    while len(runs) > 1:
        shortest = min(range(len(runs)), key=lambda i: (runs[i][1] - runs[i][0], i))
        if runs[shortest][1] - runs[shortest][0] >= min_frames:
            break
        neighbours = [i for i in (shortest - 1, shortest + 1) if 0 <= i < len(runs)]
        target = max(neighbours, key=lambda i: runs[i][1] - runs[i][0])
        runs[shortest][2] = runs[target][2]
        merged = []
        for run in runs:
            if merged and merged[-1][2] == run[2]:
                merged[-1][1] = run[1]
            else:
                merged.append(list(run))
        runs = merged
    return runs


def segment_passes(k, image_width=640, threshold=0.5, persist_s=0.5, min_displacement_frac=0.25,
                   filter=None, order='mask_first'):
    """Split a back-and-forth recording into monotone walkway traversals.

    The preprocessed hip x is cut where its velocity changes sign; sign runs
    shorter than ``persist_s`` are merged into their longer neighbour. Windows
    whose net hip displacement is below ``min_displacement_frac`` of the image
    width (turnarounds, off-camera stretches) are dropped.

    Raises:
        InsufficientData: fewer than 2 valid hip samples.
    """
    hip_x = hip_trajectory(k, threshold, filter, order)
    velocity = np.gradient(hip_x) * k.fps
    signs = np.sign(velocity)
    # a zero velocity carries the previous sign
    for i in range(1, signs.size):
        if signs[i] == 0:
            signs[i] = signs[i - 1]
    runs = _merge_short_runs(_sign_runs(signs.tolist()), max(1, int(round(persist_s * k.fps))))

    windows = []
    min_displacement = min_displacement_frac * image_width
    for start, end, _ in runs:
        displacement = hip_x[end - 1] - hip_x[start]
        if abs(displacement) < min_displacement:
            logger.debug('Frames [%d, %d): hip moved %.1f px, not a pass', start, end, displacement)
            continue
        direction = Direction.POSITIVE_X if displacement > 0 else Direction.NEGATIVE_X
        windows.append(PassWindow(int(start), int(end), direction, len(windows)))
    logger.debug('Segmented %d passes: %s', len(windows), windows)
    return windows


def foot_parts(layout):
    """Heel and toe part index per foot, substituting the ankle where a layout lacks them.

    Returns:
        ({foot: (heel_index, toe_index)}, ankle_substituted)
    """
    parts = {}
    substituted = False
    for foot in _FEET:
        side = _side(foot)
        heel, toe = layout.role_index(f'{side}_heel'), layout.role_index(f'{side}_toe')
        ankle = layout.role_index(f'{side}_ankle')
        if heel is None or toe is None:
            if ankle is None:
                raise InvalidInput(f'{layout.name.value} has no {side} heel, toe or ankle keypoint')
            substituted = True
            heel = ankle if heel is None else heel
            toe = ankle if toe is None else toe
        parts[foot] = (heel, toe)
    return parts, substituted


def _extrema(progression, cfg, fps):
    distance = max(1, int(round(cfg.min_event_separation_s * fps)))
    peaks, props = signal.find_peaks(progression, prominence=cfg.peak_prominence_px, distance=distance)
    return list(zip(peaks.tolist(), props['prominences'].tolist()))


def _hinge_fit(offsets, values, knee):
    """Least-squares fit of two lines joined at ``knee``; returns (sse, (level, rise, fall))."""
    design = np.column_stack([np.ones_like(offsets), np.minimum(offsets - knee, 0.0),
                              np.maximum(offsets - knee, 0.0)])
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    residual = values - design @ coef
    return float(residual @ residual), coef


def _parabola_offset(y, i):
    if 0 < i < y.size - 1:
        curvature = y[i - 1] - 2.0 * y[i] + y[i + 1]
        if curvature < 0:
            return float(np.clip(0.5 * (y[i - 1] - y[i + 1]) / curvature, -0.5, 0.5))
    return 0.0


def refine_maximum(y, frame, lo, hi, fallback=None):
    """Sub-frame position of the maximum found at ``frame``.

    Samples ``y[lo:hi + 1]`` are fitted with two lines meeting at a knee
    within ``KNEE_SEARCH_FRAMES`` of ``frame``, and the knee is returned when
    the fit bends downwards. Otherwise, or with fewer than three samples on
    either side, a three-point parabola on ``fallback`` (default ``y``) gives
    the offset.
    """
    y = np.asarray(y, dtype=float)
    lo, hi = max(int(lo), 0), min(int(hi), y.size - 1)
    if frame - lo >= 3 and hi - frame >= 3:
        offsets = np.arange(lo, hi + 1, dtype=float) - frame
        values = y[lo:hi + 1]
        reach = min(KNEE_SEARCH_FRAMES, frame - lo - 1.0, hi - frame - 1.0)

        def sse(knee):
            return _hinge_fit(offsets, values, knee)[0]

        grid = np.linspace(-reach, reach, int(8 * reach) + 1)
        coarse = grid[int(np.argmin([sse(k) for k in grid]))]
        step = grid[1] - grid[0]
        best = optimize.minimize_scalar(sse, bounds=(max(coarse - step, -reach), min(coarse + step, reach)),
                                        method='bounded', options={'xatol': 1e-4})
        knee = float(best.x)
        _, (_, rise, fall) = _hinge_fit(offsets, values, knee)
        if rise > fall:
            return frame + knee
    return frame + _parabola_offset(y if fallback is None else np.asarray(fallback, dtype=float), frame)


def enforce_alternation(candidates):
    """Drop the lower-prominence member of each same-kind adjacent pair; ties keep the earlier.

    Args:
        candidates: (frame, kind, prominence) tuples of one foot in one pass.
    """
    kept = []
    for candidate in sorted(candidates, key=lambda c: (c[0], c[1].value)):
        if kept and kept[-1][1] is candidate[1]:
            if candidate[2] > kept[-1][2]:
                kept[-1] = candidate
            continue
        kept.append(candidate)
    return kept


def detect_kinematic_events(k, cfg=None, filter=None, passes=None, threshold=0.5, order='mask_first',
                            image_width=640, persist_s=0.5, min_displacement_frac=0.25, meta=None):
    """Heel contacts and toe offs from heel and toe x relative to the hip.

    Within each pass the progression coordinate is
    ``direction * (part_x - hip_x)``; heel contacts are its maxima for the
    heel and toe offs its minima for the toe, both filtered through
    prominence and minimum separation. Each kept extremum is then placed at
    the knee of a two-line fit to the gap-filled, unfiltered part x between
    its neighbouring events (see refine_maximum), so event times are not
    restricted to whole frames. Layouts without heel or toe use the ankle,
    and the returned sequence is flagged ``ankle_substituted``.

    When ``passes`` is omitted they come from segment_passes; a recording
    with no traversal (a standing subject) then yields an empty sequence.

    Raises:
        InvalidInput: missing foot or hip keypoints, or an explicit empty pass list.
    """
    cfg = cfg or EventConfig()
    parts, substituted = foot_parts(k.layout)
    spec = filter or design_butterworth(KINEMATIC_FILTER[0], KINEMATIC_FILTER[1], k.fps)
    if passes is None:
        passes = segment_passes(k, image_width, threshold, persist_s, min_displacement_frac, spec, order)
        if not passes:
            logger.warning('%s: no walkway pass found, no kinematic events',
                           getattr(meta, 'trial_id', k))
            return EventSequence((), meta, substituted)
    elif not passes:
        raise InvalidInput('pass list is empty')

    hip_x = hip_trajectory(k, threshold, spec, order)
    trajectories, gap_filled = {}, {}
    for foot, (heel, toe) in parts.items():
        for index in {heel, toe}:
            if index not in trajectories:
                with np.errstate(invalid='ignore'):
                    valid = k.sample_valid[:, index] & (k.confidence[:, index] >= threshold)
                masked = MaskedSeries(k.x[:, index], valid, k.fps)
                if masked.valid_count < 2:
                    raise InsufficientData(f'{k.layout.parts[index].name}: fewer than 2 valid samples',
                                           context=getattr(meta, 'trial_id', None))
                trajectories[index] = preprocess_trajectory(masked, spec, order)
                gap_filled[index] = interpolate_gaps(masked)

    reach = max(3, int(round(KNEE_REACH_S * k.fps)))
    events = []
    for window in passes:
        span = slice(window.start_frame, window.end_frame)
        hip = hip_x[span]
        for foot, (heel, toe) in parts.items():
            heel_forward = window.direction * (trajectories[heel][span] - hip)
            toe_forward = window.direction * (trajectories[toe][span] - hip)
            # knees are fitted on the unfiltered part alone: a locally linear hip tilts both lines equally
            knee_signal = {EventKind.HC: (window.direction * gap_filled[heel][span], heel_forward),
                           EventKind.TO: (-window.direction * gap_filled[toe][span], -toe_forward)}
            candidates = [(f, EventKind.HC, p) for f, p in _extrema(heel_forward, cfg, k.fps)]
            candidates += [(f, EventKind.TO, p) for f, p in _extrema(-toe_forward, cfg, k.fps)]
            kept = enforce_alternation(candidates)
            for i, (frame, kind, _) in enumerate(kept):
                lo = kept[i - 1][0] + KNEE_NEIGHBOUR_MARGIN if i > 0 else 0
                hi = kept[i + 1][0] - KNEE_NEIGHBOUR_MARGIN if i + 1 < len(kept) else heel_forward.size - 1
                raw, detection = knee_signal[kind]
                position = refine_maximum(raw, frame, max(lo, frame - reach), min(hi, frame + reach), detection)
                time_s = (window.start_frame + position) / k.fps
                events.append(GaitEvent(time_s, foot, kind, EventSource.KINEMATIC, window.pass_id))
    logger.debug('Kinematic events: %d over %d passes (ankle substituted: %s)',
                 len(events), len(passes), substituted)
    return EventSequence(tuple(events), meta, substituted)


def first_foot_from_keypoints(k, threshold=0.5, filter=None, order='mask_first', window_s=0.5):
    """Build a ``(pass_id, hc_time_s) -> Foot`` callable for detect_grf_events.

    At the contact time the foot whose heel (or ankle) is further forward
    along the direction of travel is taken as the contacting foot. Force and
    video share the time origin.
    """
    parts, _ = foot_parts(k.layout)
    spec = filter or design_butterworth(KINEMATIC_FILTER[0], KINEMATIC_FILTER[1], k.fps)
    hip_x = hip_trajectory(k, threshold, spec, order)
    heels = {}
    for foot, (heel, _) in parts.items():
        with np.errstate(invalid='ignore'):
            valid = k.sample_valid[:, heel] & (k.confidence[:, heel] >= threshold)
        heels[foot] = preprocess_trajectory(MaskedSeries(k.x[:, heel], valid, k.fps), spec, order)
    half = max(1, int(round(window_s * k.fps)))

    def first_foot(pass_id, hc_time_s):
        frame = min(max(int(round(hc_time_s * k.fps)), 0), k.n_frames - 1)
        lo, hi = max(frame - half, 0), min(frame + half, k.n_frames - 1)
        direction = 1.0 if hip_x[hi] >= hip_x[lo] else -1.0
        lead = direction * (heels[Foot.RIGHT][frame] - heels[Foot.LEFT][frame])
        foot = Foot.RIGHT if lead >= 0 else Foot.LEFT
        logger.debug('Pass %d: first contact at %.3f s attributed to %s', pass_id, hc_time_s, foot.value)
        return foot

    return first_foot
