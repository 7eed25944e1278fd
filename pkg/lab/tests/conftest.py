import math

import numpy as np
import pytest
import src.morawetz as morawetz
import src.spectral as spectral
from src.schemas import IMultiplierSpec, SolverConfig, WeightSpec

DEMO_CONFIG = """\
# small Gaussian demo
GRID__N=16
GRID__L=16.0

DATA__KIND=gaussian
DATA__A=1.0
DATA__SIGMA=1.0
DATA__V=1.0,0.5

SOLVER__DT=0.001
SOLVER__T=0.01
SOLVER__RECORD_STRIDE=5

IMETHOD__S=0.5
IMETHOD__N=8
IMETHOD__N_LIST=2,4
IMETHOD__REGION_SAMPLES=2000
"""


@pytest.fixture
def grid():
    return spectral.make_grid(32, 16.0)


@pytest.fixture
def fine_grid():
    return spectral.make_grid(64, 16.0)


@pytest.fixture
def gaussian(grid):
    return spectral.synthesize_gaussian(grid, A=1.0, sigma=1.0)


@pytest.fixture
def moving_gaussian(grid):
    return spectral.synthesize_gaussian(grid, A=1.0, sigma=1.0, v=(1.0, 0.5))


@pytest.fixture
def plane_wave():
    def build(grid, modes=(1, 2), A=1.0):
        X, Y = grid.mesh
        k = 2 * math.pi / grid.L
        return spectral.Field(grid, A * np.exp(1j * k * (modes[0] * X + modes[1] * Y)))

    return build


@pytest.fixture
def short_run():
    return SolverConfig(dt=1e-3, T=0.02, record_stride=2)


@pytest.fixture
def weight():
    return WeightSpec(M=2.0)


@pytest.fixture
def ispec(grid):
    return IMultiplierSpec(s=0.5, N=2 * 2 * math.pi / grid.L)


@pytest.fixture
def fresh_kernels():
    morawetz.kernel_tables.cache.clear()
    yield
    morawetz.kernel_tables.cache.clear()


@pytest.fixture
def demo_config(tmp_path):
    path = tmp_path / "demo.env"
    path.write_text(DEMO_CONFIG)
    return path


@pytest.fixture
def broken_kernels(mocker, fresh_kernels):
    """Pair kernels with the sign of K flipped, so only the action oracle can fail."""
    original = morawetz._tabulate

    def tabulate(grid, spec):
        tables = original(grid, spec)
        return morawetz.PairKernels(
            K=(-tables.K[0], -tables.K[1]), H=tables.H, lap=tables.lap
        )

    return mocker.patch("src.morawetz._tabulate", side_effect=tabulate)
