import sys
from pathlib import Path

import numpy as np
import pytest

SRC = Path(__file__).resolve().parents[1] / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from sgm_schedules.models import Schedule, TimeGrid  # noqa: E402
from sgm_schedules.process.targets import GaussianTarget, benchmark_gaussian  # noqa: E402


@pytest.fixture
def linear():
    return Schedule.linear()


@pytest.fixture
def grid500():
    return TimeGrid(500, 1.0)


@pytest.fixture
def iso50():
    return benchmark_gaussian("iso", 50)


@pytest.fixture
def rescaled_iso50():
    """Law of the iso d=50 target after standardize-and-rescale (exact in the limit)."""
    return GaussianTarget(np.zeros(50), 0.5 * np.eye(50))


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("SGM_THREADS", "2")
    monkeypatch.setattr("sgm_schedules.config.CACHE_DIR", tmp_path / "cache")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running end-to-end checks (deselect with -m 'not slow')")
