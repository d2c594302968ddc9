import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stable_depths import network as nw  # noqa: E402
from stable_depths.spectral import InputMatrix  # noqa: E402

BASE_ROWS = [[1.0, -0.5], [0.3, 0.8]]

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def base_inputs():
    return InputMatrix(BASE_ROWS)


def make_config(alpha=1.5, sigma_w=1.0, sigma_b=1.0, depth=2, width=64, activation=None, rows=None):
    return nw.NetworkConfig(alpha, sigma_w, sigma_b, depth, width,
                            activation or nw.tanh(), InputMatrix(rows or BASE_ROWS))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
