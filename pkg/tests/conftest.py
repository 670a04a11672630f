import os
from importlib import resources

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def data_dir():
    return str(resources.files("supround") / "data")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brute_marginals(values, weights):
    """Marginals by explicit loops over the multi-index; independent of the kernels."""
    values = np.asarray(values, dtype=float)
    out = [np.zeros(n) for n in values.shape]
    for idx in np.ndindex(*values.shape):
        cell = values[idx]
        for j in range(values.ndim):
            w = 1.0
            for k in range(values.ndim):
                if k != j:
                    w *= weights[k][idx[k]]
            out[j][idx[j]] += cell * w
    return out
