import os

import numpy as np
import pandas as pd
import pytest

from src.config import AnalysisConfig
from src.exceptions import FormatError, InsufficientData, InvalidInput, PairingError
from src.gait_params import compute_cadence
from src.ingest import write_grf_csv
from src.models.events import Foot
from src.models.grf import GrfSignal
from src.models.params import PARAMETERS, STANCE_TIME, STEP_TIME, TemporalParams
from src.models.report import InputFormat, ManifestEntry, PairedSeries
from src.report import raw_record, render_text
from src.services.analysis_service import (
    TrialResult, agreement_record, analyze_trial, build_report, load_manifest, parse_platform_feet, run_analyze,
)
from src.synth import MANIFEST_COLUMNS, SynthParams, study_params, write_study


@pytest.fixture(scope='module')
def study_dir(tmp_path_factory):
    """Four short noisy synthetic trials with platforms and DLCCT entries."""
    directory = tmp_path_factory.mktemp('study')
    base = SynthParams(n_strides=6, grf_sigma_n=2.0, kp_sigma_px=1.0, confidence_dropout_rate=0.02)
    write_study(study_params(base, 4, seed=1), str(directory))
    return directory


def write_manifest(path, rows):
    pd.DataFrame(rows, columns=MANIFEST_COLUMNS).to_csv(path, index=False, lineterminator='\n')
    return str(path)


def manifest_rows(study_dir):
    return pd.read_csv(study_dir / 'manifest.csv', dtype=str, keep_default_na=False).values.tolist()


def test_parse_platform_feet():
    assert parse_platform_feet('0:R;1:L') == {0: Foot.RIGHT, 1: Foot.LEFT}
    assert parse_platform_feet(' ') is None
    with pytest.raises(InvalidInput):
        parse_platform_feet('0=R')
    with pytest.raises(InvalidInput):
        parse_platform_feet('0:X')


def test_load_manifest_resolves_paths(study_dir):
    manifest = load_manifest(str(study_dir / 'manifest.csv'))
    assert len(manifest) == 8
    assert manifest.systems == ['DLCCT', 'Platforms']
    entry = manifest.for_system('Platforms')[0]
    assert entry.format is InputFormat.GRF
    assert entry.platform_feet == {0: Foot.RIGHT, 1: Foot.LEFT}
    assert os.path.isabs(entry.path)
    assert manifest.for_system('DLCCT')[0].fps == 25.0


def test_load_manifest_rejects_bad_rows(study_dir, tmp_path):
    rows = manifest_rows(study_dir)
    with pytest.raises(FormatError):
        load_manifest(write_manifest(tmp_path / 'a.csv', [r[:3] + ['video'] + r[4:] for r in rows]))
    missing = [list(rows[0])]
    missing[0][4] = 'nowhere/grf.csv'
    (tmp_path / 'b').mkdir()
    with pytest.raises(InvalidInput) as excinfo:
        load_manifest(write_manifest(tmp_path / 'b' / 'manifest.csv', missing))
    assert excinfo.value.location.endswith('row 2')
    pd.DataFrame([['t1', 'Platforms']], columns=['trial_id', 'system_tag']).to_csv(tmp_path / 'c.csv', index=False)
    with pytest.raises(FormatError):
        load_manifest(str(tmp_path / 'c.csv'))


def test_identity_pairing_has_no_disagreement(study_dir):
    rows = [row for row in manifest_rows(study_dir) if row[2] == 'Platforms']
    mirrored = rows + [[row[0], row[1], 'Mirror'] + row[3:] for row in rows]
    report = run_analyze(load_manifest(write_manifest(study_dir / 'mirror.csv', mirrored)))
    assert report.systems == ['Mirror']
    for parameter in PARAMETERS:
        ba = report.table_b['Mirror', parameter]
        errors = report.table_c['Mirror', parameter]
        assert (ba.bias, ba.loa_lower, ba.loa_upper) == (0.0, 0.0, 0.0)
        assert (errors.accuracy_mu, errors.precision_sigma) == (0.0, 0.0)


def test_study_end_to_end(study_dir):
    report = run_analyze(load_manifest(str(study_dir / 'manifest.csv')))
    assert report.systems == ['DLCCT']
    assert set(report.table_a) == {'Platforms', 'DLCCT'}
    assert abs(report.table_b['DLCCT', STEP_TIME].bias) <= 0.04
    assert report.table_c['DLCCT', STEP_TIME].accuracy_mu <= 0.04
    assert len(report.per_video['Platforms'][STEP_TIME]) == 4
    assert report.subjects == {'trial01': 'S01', 'trial02': 'S01', 'trial03': 'S02', 'trial04': 'S02'}
    assert ('Platforms', STEP_TIME) in report.normality


def test_report_does_not_depend_on_thread_count(study_dir):
    manifest = load_manifest(str(study_dir / 'manifest.csv'))
    assert raw_record(run_analyze(manifest, threads=1)) == raw_record(run_analyze(manifest, threads=3))
    with pytest.raises(InvalidInput):
        run_analyze(manifest, threads=0)


def test_missing_reference_names_the_system(study_dir):
    rows = [row for row in manifest_rows(study_dir) if row[2] == 'DLCCT']
    with pytest.raises(PairingError) as excinfo:
        run_analyze(load_manifest(write_manifest(study_dir / 'video_only.csv', rows)))
    assert 'DLCCT' in str(excinfo.value)


def test_video_without_reference_is_a_pairing_error(study_dir):
    rows = [row for row in manifest_rows(study_dir) if not (row[2] == 'Platforms' and row[0] == 'trial04')]
    with pytest.raises(PairingError) as excinfo:
        run_analyze(load_manifest(write_manifest(study_dir / 'unpaired.csv', rows)))
    assert 'DLCCT' in str(excinfo.value)
    assert 'trial04' in str(excinfo.value)


def test_platforms_only_manifest_is_rejected(study_dir):
    rows = [row for row in manifest_rows(study_dir) if row[2] == 'Platforms']
    with pytest.raises(PairingError):
        run_analyze(load_manifest(write_manifest(study_dir / 'platforms_only.csv', rows)))


def test_trial_failures_carry_their_context(tmp_path):
    path = tmp_path / 'flat.csv'
    write_grf_csv(GrfSignal(1000.0, np.zeros((2, 3000))), str(path))
    entry = ManifestEntry('t1', 'Platforms', InputFormat.GRF, path)
    with pytest.raises(InsufficientData) as excinfo:
        analyze_trial(entry)
    assert str(excinfo.value).startswith('Platforms/t1: ')
    with pytest.raises(PairingError):
        analyze_trial(entry, AnalysisConfig(first_foot='auto'))


def test_agreement_record():
    record = agreement_record(PairedSeries([1.0, 2.0, 3.0], [1.5, 1.0, 3.0]))
    assert record['n'] == 3
    assert record['accuracy_mu'] == pytest.approx(0.5)
    assert record['bias'] == pytest.approx(0.5 / 3)
    single = agreement_record(PairedSeries([1.0], [1.5]))
    assert single['bias'] is None
    assert single['r'] is None


@pytest.fixture(scope='module')
def twenty_trial_study(tmp_path_factory):
    directory = tmp_path_factory.mktemp('study20')
    base = SynthParams(grf_sigma_n=2.0, kp_sigma_px=2.0, confidence_dropout_rate=0.05)
    return write_study(study_params(base, 20, seed=0), str(directory))


def test_twenty_trial_study_step_time_correlates_strongly(twenty_trial_study):
    report = run_analyze(load_manifest(twenty_trial_study), threads=4)
    assert len(report.per_video['DLCCT'][STEP_TIME]) == 20
    assert report.pearson['DLCCT', STEP_TIME] > 0.7
    assert report.unpaired == {}


def trial_result(trial_id, system, step, stances=(0.7,)):
    steps = (step, step)
    params = TemporalParams(trial_id=trial_id, source=system, step_times_s=steps,
                            cadence_steps_per_min=compute_cadence(steps), stance_times_s=stances,
                            double_support_times_s=(0.2,), terminal_double_support_s=(0.1,),
                            initial_double_support_s=(0.1,))
    fmt = InputFormat.GRF if system == 'Platforms' else InputFormat.DLC
    return TrialResult(ManifestEntry(trial_id, system, fmt, f'{trial_id}.csv'), None, params)


def test_videos_left_out_of_a_pairing_are_recorded():
    results = [trial_result('t0', 'Platforms', 0.5, stances=())]
    results += [trial_result(f't{i}', 'Platforms', 0.5 + 0.01 * i) for i in range(1, 4)]
    results += [trial_result(f't{i}', 'DLCCT', 0.51 + 0.01 * i) for i in range(4)]
    report = build_report(results, ['DLCCT'])
    assert report.unpaired == {('DLCCT', STANCE_TIME): ['t0']}
    assert len(report.table_c['DLCCT', STANCE_TIME].errors) == 3
    assert len(report.table_c['DLCCT', STEP_TIME].errors) == 4
    assert raw_record(report)['unpaired'] == {'DLCCT': {STANCE_TIME: ['t0']}}
    assert 'Videos left out of a pairing' in render_text(report)
