import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.synth import SynthParams, generate_trial  # noqa: E402


@pytest.fixture(scope='session')
def clean_trial():
    """Noise-free synthetic trial with default parameters."""
    return generate_trial(SynthParams(trial_id='clean'))


@pytest.fixture(scope='session')
def noisy_trial():
    return generate_trial(SynthParams(trial_id='noisy', grf_sigma_n=2.0, kp_sigma_px=2.0,
                                      confidence_dropout_rate=0.05, seed=3))


@pytest.fixture
def out_dir(tmp_path):
    return tmp_path / 'out'
