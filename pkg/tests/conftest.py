import numpy as np
import pytest
from hypothesis import settings
from scipy import sparse

from stale_sgmcmc.models import Dataset, GaussianModel, LogisticRegressionModel, generate_gaussian_data

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def gaussian_model():
    return GaussianModel(generate_gaussian_data(0.0, 1000, 1))


@pytest.fixture(scope="session")
def small_gaussian():
    return GaussianModel(generate_gaussian_data(0.5, 50, 3))


@pytest.fixture(scope="session")
def toy_blr():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(40, 5))
    x[rng.random(x.shape) < 0.4] = 0.0
    y = (rng.random(40) < 0.5).astype(np.int8)
    return LogisticRegressionModel(Dataset(sparse.csr_matrix(x), y, 5))
