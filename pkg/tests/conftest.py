import numpy as np
import pytest

from config import ENV_MAX_COST, ENV_OUTPUT_DIR, ENV_WORKERS
from qremlib.disorder import DisorderVariant, sample


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in (ENV_OUTPUT_DIR, ENV_MAX_COST, ENV_WORKERS, "LOADING_MODE_FOR_ENV_VARS"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def strict_realization():
    return sample(DisorderVariant.strict(3), 8, seed=11)


@pytest.fixture
def full_realization():
    return sample(DisorderVariant.full(2), 8, seed=12)


@pytest.fixture
def rem_realization():
    return sample(DisorderVariant.rem(), 10, seed=13)
