import sys
from pathlib import Path

import numpy as np
import pytest

from holelab.geometry import Box, HoleFamily, TilingSpec, instantiate_holes

TESTS = Path(__file__).parent
ROOT = TESTS.parent
CONFIGS = ROOT / "configs"

sys.path.insert(0, str(TESTS))

# acceptance verdict lines, echoed in the terminal summary even when output is captured
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def single_hole_domain(d, mu):
    """One hole at (0.375, ...) with guard radius 0.1: eps = 0.25, C = 0.4."""
    fam = HoleFamily(Box([0.25] * d, [0.5] * d), 1, mu, [[0.5] * d])
    return instantiate_holes([fam], TilingSpec.unit(d), Box([0.0] * d, [1.0] * d), 0.25, 0.4)


@pytest.fixture
def unit_tiling_2d():
    return TilingSpec.unit(2)


@pytest.fixture
def unit_box_2d():
    return Box([0.0, 0.0], [1.0, 1.0])


@pytest.fixture
def sixteen_hole_domain(unit_tiling_2d, unit_box_2d):
    """F = Omega = [0,1)^2, one centered hole per tile at eps = 0.25."""
    def make(mu=1.0, C=0.25):
        fam = HoleFamily(unit_box_2d, 1, mu, [[0.5, 0.5]])
        return instantiate_holes([fam], unit_tiling_2d, unit_box_2d, 0.25, C)
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def config_dir():
    return CONFIGS
