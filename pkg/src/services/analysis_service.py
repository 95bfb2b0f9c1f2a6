"""Study orchestration: manifest loading, the per-trial pipeline and report assembly."""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import NamedTuple

from src.config import AnalysisConfig
from src.exceptions import FormatError, InsufficientData, InvalidInput, PairingError, PipelineError
from src.gait_events import detect_grf_events, detect_kinematic_events, first_foot_from_keypoints
from src.gait_params import compute_temporal_params, per_video_value, pool_aggregate
from src.ingest import (
    list_openpose_frames, parse_dlc_csv, parse_grf_csv, parse_openpose_frames, read_string_table, read_text,
)
from src.models.events import Foot
from src.models.grf import GrfSignal
from src.models.keypoints import TrialMeta
from src.models.report import REFERENCE_SYSTEM, InputFormat, Manifest, ManifestEntry, StudyReport
from src.stats import absolute_errors, bland_altman, pearson, shapiro_wilk

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ('trial_id', 'system_tag', 'format', 'path')


class TrialResult(NamedTuple):
    entry: ManifestEntry
    events: object
    params: object


def parse_platform_feet(text, location=None):
    """Parse a ``0:R;1:L`` platform map; blank text means no map."""
    text = (text or '').strip()
    if not text:
        return None
    mapping = {}
    for item in text.split(';'):
        platform, sep, foot = item.partition(':')
        try:
            if not sep:
                raise ValueError(item)
            mapping[int(platform)] = Foot.parse(foot.strip())
        except (ValueError, InvalidInput):
            raise InvalidInput(f'platform map entry {item!r} is not "<platform>:<L|R>"', location=location)
    return mapping


def _optional_rate(text, name, location):
    text = (text or '').strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        raise FormatError(f'{name} must be a number, got {text!r}', location=location)
    if not (math.isfinite(value) and value > 0):
        raise FormatError(f'{name} must be positive, got {text!r}', location=location)
    return value


def load_manifest(path):
    """Read a manifest CSV; paths are resolved relative to the manifest's directory.

    Raises:
        FormatError: missing columns, unknown format or bad rate cells.
        InvalidInput: a referenced path does not exist, or a duplicate trial.
    """
    table = read_string_table(read_text(path), header=0)
    table.columns = [str(c).strip().lower() for c in table.columns]
    missing = [c for c in REQUIRED_COLUMNS if c not in table.columns]
    if missing:
        raise FormatError(f'manifest lacks columns {missing}', location=str(path))
    base_dir = Path(os.path.dirname(os.path.abspath(path)))

    entries = []
    for row, record in enumerate(table.to_dict('records'), start=2):
        where = f'{path}, row {row}'
        cell = {key: str(value).strip() for key, value in record.items()}
        if not cell['trial_id'] or not cell['system_tag']:
            raise FormatError('trial_id and system_tag must not be blank', location=where)
        try:
            fmt = InputFormat(cell['format'].lower())
        except ValueError:
            raise FormatError(f'unknown format {cell["format"]!r} (grf, dlc or openpose)', location=where)
        target = base_dir / cell['path']
        if not cell['path'] or not target.exists():
            raise InvalidInput(f'referenced path {cell["path"]!r} does not exist', location=where)
        entries.append(ManifestEntry(
            trial_id=cell['trial_id'],
            system_tag=cell['system_tag'],
            format=fmt,
            path=target,
            subject_id=cell.get('subject_id', ''),
            fps=_optional_rate(cell.get('fps'), 'fps', where),
            fs=_optional_rate(cell.get('fs'), 'fs', where),
            platform_feet=parse_platform_feet(cell.get('platform_feet'), where),
        ))
    manifest = Manifest(tuple(entries), base_dir)
    logger.info('Manifest %s: %d entries, systems %s', path, len(manifest), ', '.join(manifest.systems))
    return manifest


def load_keypoints(entry, config):
    fps = entry.fps or config.camera_fps
    if entry.format is InputFormat.DLC:
        return parse_dlc_csv(entry.path, fps=fps)
    if entry.format is InputFormat.OPENPOSE:
        return parse_openpose_frames(list_openpose_frames(entry.path), fps, config.person_index)
    raise InvalidInput(f'{entry.format.value} entry has no keypoints')


def _first_foot(entry, config, companion):
    if config.first_foot != 'auto':
        return Foot.parse(config.first_foot)
    if companion is None:
        raise PairingError(f'first_foot = auto needs a keypoint entry for trial {entry.trial_id!r}')
    k = load_keypoints(companion, config)
    return first_foot_from_keypoints(k, config.confidence_threshold, config.kinematic_filter(k.fps),
                                     config.preprocess_order)


def detect_events(entry, config=None, companion=None):
    """Run ingest, preprocessing and event detection for one manifest entry.

    Args:
        entry: ManifestEntry of any format.
        config: AnalysisConfig, defaults when omitted.
        companion: keypoint entry of the same video, used by force entries
            when ``first_foot = auto``.
    """
    config = config or AnalysisConfig()
    meta = TrialMeta(trial_id=entry.trial_id, subject_id=entry.subject_id,
                     camera_fps=entry.fps or config.camera_fps,
                     resolution=(config.image_width, config.image_height))
    cfg = config.event_config()
    if entry.format is InputFormat.GRF:
        grf = parse_grf_csv(entry.path)
        if entry.fs is not None and entry.fs != grf.fs:
            logger.debug('%s: sampling rate %g Hz overridden to %g Hz', entry.trial_id, grf.fs, entry.fs)
            grf = GrfSignal(entry.fs, grf.forces, grf.t0)
        first_foot = Foot.RIGHT if entry.platform_feet else _first_foot(entry, config, companion)
        return detect_grf_events(grf, cfg, config.force_filter(grf.fs), entry.platform_feet, first_foot,
                                 config.force_pass_gap_s, meta)
    k = load_keypoints(entry, config)
    return detect_kinematic_events(
        k, cfg, config.kinematic_filter(k.fps), None, config.confidence_threshold, config.preprocess_order,
        config.image_width, config.pass_persistence_s, config.pass_min_displacement_frac, meta,
    )


def analyze_trial(entry, config=None, companion=None):
    """Events and temporal parameters of one entry; failures carry the system/trial context."""
    config = config or AnalysisConfig()
    try:
        events = detect_events(entry, config, companion)
        params = compute_temporal_params(events, entry.trial_id, entry.system_tag, entry.subject_id)
    except PipelineError as err:
        err.context = f'{entry.system_tag}/{entry.trial_id}'
        raise
    except InvalidInput as err:
        err.location = f'{entry.path}, {err.location}' if err.location else str(entry.path)
        raise
    logger.debug('%s/%s: %d events', entry.system_tag, entry.trial_id, len(events))
    return TrialResult(entry, events, params)


def _check_pairing(manifest):
    systems = manifest.systems
    if REFERENCE_SYSTEM not in systems:
        raise PairingError(f'manifest has no {REFERENCE_SYSTEM} entries to pair '
                           f'{", ".join(systems) or "any system"} with')
    estimating = [s for s in systems if s != REFERENCE_SYSTEM]
    if not estimating:
        raise PairingError(f'manifest holds only {REFERENCE_SYSTEM} entries, nothing to compare')
    reference_ids = {e.trial_id for e in manifest.for_system(REFERENCE_SYSTEM)}
    for system in estimating:
        unpaired = sorted({e.trial_id for e in manifest.for_system(system)} - reference_ids)
        if unpaired:
            raise PairingError(f'system {system}: no {REFERENCE_SYSTEM} entry for {", ".join(unpaired)}')
    return estimating


def _companions(manifest):
    """Keypoint entry per trial id, taken from the first estimating system that has one."""
    companions = {}
    for system in manifest.systems:
        for entry in manifest.for_system(system):
            if entry.format is not InputFormat.GRF:
                companions.setdefault(entry.trial_id, entry)
    return companions


def run_analyze(manifest, config=None, threads=1):
    """Analyze every trial of the manifest and assemble the StudyReport.

    Trials run on up to ``threads`` workers; results are reduced in
    (system_tag, trial_id) order, so the report does not depend on
    scheduling.

    Raises:
        PairingError: no reference entries, or a video without its reference.
        PipelineError: a trial failed; the message names system and trial.
    """
    config = config or AnalysisConfig()
    if threads < 1:
        raise InvalidInput(f'threads must be >= 1, got {threads}')
    estimating = _check_pairing(manifest)
    companions = _companions(manifest)
    entries = sorted(manifest.entries, key=lambda e: (e.system_tag, e.trial_id))

    def run(entry):
        return analyze_trial(entry, config, companions.get(entry.trial_id))

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(run, entries))
    logger.info('Analyzed %d trials over %d systems', len(results), len(estimating) + 1)
    return build_report(results, estimating, config)


def _warn_cell(what, system, parameter, err):
    logger.warning('%s %s/%s left empty: %s', what, system, parameter, err)


def build_report(results, systems, config=None):
    """Reduce per-trial results into descriptive, agreement and normality tables."""
    config = config or AnalysisConfig()
    report = StudyReport(systems=list(systems))
    by_system, analyzed = {}, {}
    for result in sorted(results, key=lambda res: (res.entry.system_tag, res.entry.trial_id)):
        by_system.setdefault(result.entry.system_tag, []).append(result.params)
        analyzed.setdefault(result.entry.system_tag, []).append(result.entry.trial_id)
        report.subjects[result.entry.trial_id] = result.entry.subject_id

    for system, params in by_system.items():
        aggregate = pool_aggregate(params, system, config.pooling, config.double_support, skip_empty=True)
        if aggregate.summaries:
            report.table_a[system] = aggregate
        report.per_video[system] = {}
        for parameter in report.parameters:
            values = {}
            for p in params:
                try:
                    values[p.trial_id] = per_video_value(p, parameter, config.double_support)
                except InsufficientData as err:
                    logger.warning('Video %s left out of %s pairing: %s', p.trial_id, parameter, err)
            report.per_video[system][parameter] = values

    for system in report.systems:
        for parameter in report.parameters:
            est = report.per_video.get(system, {}).get(parameter, {})
            ref = report.per_video.get(report.reference, {}).get(parameter, {})
            dropped = sorted(video for video in analyzed.get(system, ()) if video not in est or video not in ref)
            if dropped:
                report.unpaired[system, parameter] = dropped
                logger.warning('%s/%s pairing leaves out %s', system, parameter, ', '.join(dropped))
            try:
                paired = report.paired(system, parameter)
            except InvalidInput as err:
                _warn_cell('Agreement', system, parameter, err)
                continue
            for what, table, compute in (('Bland-Altman', report.table_b, bland_altman),
                                         ('Absolute error', report.table_c, absolute_errors),
                                         ('Pearson', report.pearson, lambda ps: pearson(ps.est, ps.ref))):
                try:
                    table[system, parameter] = compute(paired)
                except (InvalidInput, InsufficientData) as err:
                    _warn_cell(what, system, parameter, err)

    for dataset in report.all_datasets:
        for parameter in report.parameters:
            values = report.per_video.get(dataset, {}).get(parameter, {})
            if len(values) < 3:
                logger.warning('Normality of %s/%s skipped: %d videos', dataset, parameter, len(values))
                continue
            try:
                report.normality[dataset, parameter] = shapiro_wilk([values[v] for v in sorted(values)])
            except InvalidInput as err:
                _warn_cell('Normality', dataset, parameter, err)
    return report


def agreement_record(paired):
    """Every agreement statistic of one paired series, as a flat dict; unavailable ones are None."""
    record = {'n': len(paired)}
    ba = bland_altman(paired) if len(paired) >= 2 else None
    errors = absolute_errors(paired)
    record.update(bias=ba.bias if ba else None, loa_lower=ba.loa_lower if ba else None,
                  loa_upper=ba.loa_upper if ba else None, accuracy_mu=errors.accuracy_mu,
                  precision_sigma=errors.precision_sigma)
    try:
        record['r'] = pearson(paired.est, paired.ref)
    except (InvalidInput, InsufficientData) as err:
        logger.warning('Pearson unavailable: %s', err)
        record['r'] = None
    return record
