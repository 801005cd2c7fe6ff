import numpy as np
import pytest

from posthoc_bench.pipeline import prepare_recording
from posthoc_bench.signal import TimeSeriesMatrix
from posthoc_bench.source_space import mne_inverse_operator, synth_lead_field, synth_recording

ACCEPTANCE_LINES = []

PLANTED_SEEDS = (0, 1, 2, 3, 4)
PLANTED_TARGET = 7


def planted_recording(seed, snr_db=10.0, duration_s=1100.0):
    """31 channels, 50 sources, 8-12 Hz target at ``snr_db``, 120 Hz."""
    lf = synth_lead_field(31, 50, seed)
    x, truth = synth_recording(lf, duration_s, 120.0, (8.0, 12.0), PLANTED_TARGET, snr_db, seed)
    prepared = prepare_recording(x, mne_inverse_operator(lf), (8.0, 12.0), 1.0, 80e-6)
    return lf, x, truth, prepared


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_recording(rng):
    return TimeSeriesMatrix(rng.standard_normal((4, 600)), 120.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
