import copy

import numpy as np
import pytest

from unfold_dynamics import acceptance
from unfold_dynamics.config import parse_problem


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def example_doc():
    return copy.deepcopy(acceptance.EXAMPLE)


@pytest.fixture
def example_problem():
    return parse_problem(copy.deepcopy(acceptance.EXAMPLE))


@pytest.fixture
def flow_problem():
    return parse_problem(copy.deepcopy(acceptance.FLOW_Y2))


@pytest.fixture
def perturbed_problem():
    return parse_problem(copy.deepcopy(acceptance.PERTURBED))


@pytest.fixture(autouse=True)
def isolated_files(tmp_path, monkeypatch):
    """Keep settings and log files out of the real home directory."""
    monkeypatch.setenv('UNFOLD_SETTINGS', str(tmp_path / 'settings.json'))
    monkeypatch.setattr('unfold_dynamics.logger.LOG_FILE', str(tmp_path / 'unfold.log'))
    monkeypatch.delenv('UNFOLD_THREADS', raising=False)
