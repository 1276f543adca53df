import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from noise_eval.data import fit_standardizer, split_occ, synth_blobs

settings.register_profile(
    "default", max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def blob_train():
    """Standardized training normals from the synthetic blob fixture."""
    ds = synth_blobs(500, 50, 10, 10.0, seed=0)
    split = split_occ(ds, 0, 0.5, 0)
    return fit_standardizer(split.train_X).transform(split.train_X)
