import os

import numpy as np
import pytest

from src.error_handlers import EXIT_INPUT_ERROR, EXIT_OK, EXIT_PIPELINE_ERROR
from src.ingest import write_grf_csv
from src.main import main
from src.models.grf import GrfSignal

LABELED = (
    'scorer,,,alice,alice\n'
    'bodyparts,,,heel,heel\n'
    'coords,,,x,y\n'
    'labeled-data,walk01,img001.png,10,20\n'
    'labeled-data,walk01,img002.png,30,40\n'
)


@pytest.fixture(scope='module')
def study(tmp_path_factory):
    directory = tmp_path_factory.mktemp('cli_study')
    assert main(['synth', '--out', str(directory), '--trials', '3', '--seed', '2', '--kp-noise', '1']) == EXIT_OK
    return directory


def test_synth_writes_a_manifest(study):
    assert os.path.exists(study / 'manifest.csv')
    assert sorted(name for name in os.listdir(study) if name.startswith('trial')) == ['trial01', 'trial02',
                                                                                    'trial03']


def test_analyze_is_byte_identical_across_runs(study, tmp_path):
    for run in ('first', 'second'):
        assert main(['analyze', '--manifest', str(study / 'manifest.csv'), '--out', str(tmp_path / run)]) == EXIT_OK
    for folder in ('', 'plots'):
        first, second = tmp_path / 'first' / folder, tmp_path / 'second' / folder
        names = sorted(os.listdir(first))
        assert names == sorted(os.listdir(second))
        for name in names:
            if os.path.isfile(first / name):
                assert (first / name).read_bytes() == (second / name).read_bytes()
    assert os.path.exists(tmp_path / 'first' / 'table_b.csv')


def test_analyze_text_format_prints_the_report(study, tmp_path, capsys):
    assert main(['analyze', '--manifest', str(study / 'manifest.csv'), '--out', str(tmp_path / 'out'),
                 '--format', 'text', '--threads', '2']) == EXIT_OK
    assert 'Agreement with Platforms' in capsys.readouterr().out


def test_missing_manifest_is_an_input_error(tmp_path):
    code = main(['analyze', '--manifest', str(tmp_path / 'missing.csv'), '--out', str(tmp_path / 'out')])
    assert code == EXIT_INPUT_ERROR
    assert not os.path.exists(tmp_path / 'out')


def test_bad_config_is_an_input_error(study, tmp_path):
    config = tmp_path / 'bad.cfg'
    config.write_text('mystery = 1\n', encoding='utf-8')
    code = main(['analyze', '--manifest', str(study / 'manifest.csv'), '--out', str(tmp_path / 'out'),
                 '--config', str(config)])
    assert code == EXIT_INPUT_ERROR


def test_events_verb_writes_a_table(study, tmp_path):
    out = tmp_path / 'events.csv'
    code = main(['events', '--input', str(study / 'trial01' / 'grf.csv'), '--kind', 'grf',
                 '--platform-feet', '0:R;1:L', '--out', str(out)])
    assert code == EXIT_OK
    lines = out.read_text(encoding='utf-8').splitlines()
    assert lines[0] == 'time_s,foot,kind,source,pass_id'
    assert lines[1].split(',')[1:4] == ['R', 'HC', 'Force']


def test_events_verb_text_on_keypoints(study, capsys):
    code = main(['events', '--input', str(study / 'trial01' / 'keypoints.csv'), '--kind', 'dlc', '--format', 'text'])
    assert code == EXIT_OK
    assert 'Step time (s)' in capsys.readouterr().out


def test_flat_force_record_is_a_pipeline_error(tmp_path):
    path = tmp_path / 'flat.csv'
    write_grf_csv(GrfSignal(1000.0, np.zeros((2, 3000))), str(path))
    assert main(['events', '--input', str(path), '--kind', 'grf']) == EXIT_PIPELINE_ERROR


def test_stats_verb(tmp_path, capsys):
    paired = tmp_path / 'paired.csv'
    paired.write_text('video_id,est,ref\nv1,1.0,1.5\nv2,2.0,1.0\nv3,3.0,3.1\n', encoding='utf-8')
    assert main(['stats', '--paired', str(paired)]) == EXIT_OK
    header, values = capsys.readouterr().out.splitlines()
    assert header == 'n,bias,loa_lower,loa_upper,accuracy_mu,precision_sigma,r'
    assert values.startswith('3,')


def test_mae_verb(tmp_path):
    reference = tmp_path / 'reference.csv'
    reference.write_text(LABELED, encoding='utf-8')
    snapshots = tmp_path / 'snapshots'
    snapshots.mkdir()
    (snapshots / 'snapshot-100.csv').write_text(LABELED.replace(',10,20', ',13,24'), encoding='utf-8')
    (snapshots / 'snapshot-50.csv').write_text(LABELED, encoding='utf-8')
    assert main(['mae', '--reference', str(reference), '--snapshots', str(snapshots),
                 '--out', str(tmp_path / 'out')]) == EXIT_OK
    lines = (tmp_path / 'out' / 'mae_curve.csv').read_text(encoding='utf-8').splitlines()
    assert lines == ['snapshot,mae_px', 'snapshot-50,0.000', 'snapshot-100,2.500']


def test_usage_errors_exit_with_the_input_error_code(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(['analyze', '--manifest', 'm.csv', '--out', 'o', '--threads', '0'])
    assert excinfo.value.code == EXIT_INPUT_ERROR
    assert '--threads' in capsys.readouterr().err


@pytest.mark.parametrize('argv', [[], ['sideways'], ['stats'], ['events', '--input', 'x', '--kind', 'nope']])
def test_missing_or_unknown_arguments_exit_with_the_input_error_code(argv):
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    assert excinfo.value.code == EXIT_INPUT_ERROR
