import numpy as np
import pytest

from ssvep_xfer import SynthSpec, gen_dataset

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_dataset():
    spec = SynthSpec(n_subjects=4, n_stimuli=4, n_blocks=3, n_channels=6,
                     trial_length_s=0.6, snr_db=5.0, cluster_ids=[0, 0, 1, 1], seed=3)
    return [t for t, _ in gen_dataset(spec)], spec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
