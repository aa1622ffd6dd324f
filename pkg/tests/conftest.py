import numpy as np
import pytest

from dcone.curve import CurveSpec, make_curve, make_equator
from dcone.mesh import MeshSpec, build_mesh

ACCEPTANCE_LINES = []  # (criterion number, line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def wave64():
    return make_curve(CurveSpec(amplitude=0.2, wavenumber=3, resolution=64))


@pytest.fixture(scope="session")
def wave192():
    return make_curve(CurveSpec(amplitude=0.2, wavenumber=3, resolution=192))


@pytest.fixture(scope="session")
def equator64():
    return make_equator(64)


@pytest.fixture(scope="session")
def small_mesh():
    return build_mesh(MeshSpec(64, 64), 2.0**-5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
