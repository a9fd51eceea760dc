import numpy as np
import pytest

from nehari_linking.grid import ExteriorGrid
from nehari_linking.limit_problem import shoot_ground_state
from nehari_linking.nonlinearity import NonlinearityModel


@pytest.fixture(scope="session")
def model():
    return NonlinearityModel(s=0.5, lam=1.0)


@pytest.fixture(scope="session")
def profile(model):
    return shoot_ground_state(model)


@pytest.fixture(scope="session")
def small_grid():
    # 241 x 241 nodes, hole of radius 1
    return ExteriorGrid(h=0.1, R_out=12.0)


@pytest.fixture(scope="session")
def coarse_grid():
    return ExteriorGrid(h=0.2, R_out=8.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_field(grid, rng, smooth=True, spread=None):
    """Random grid function that is smooth enough for difference quotients.

    Blob centres are drawn from [-spread, spread]^2 (default R_out / 2); a
    small spread keeps two random fields from being nearly orthogonal.
    """
    X, Y = grid.coords()
    v = np.zeros(grid.shape)
    spread = grid.R_out / 2 if spread is None else spread
    for _ in range(4):
        c = rng.uniform(-spread, spread, size=2)
        a = rng.uniform(0.5, 2.0)
        v += rng.uniform(0.2, 1.5) * np.exp(-((X - c[0]) ** 2 + (Y - c[1]) ** 2) / (2 * a * a))
    if not smooth:
        v += 0.05 * rng.standard_normal(grid.shape)
    return grid.field(v)


# one line per acceptance criterion, echoed again at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            for line in ACCEPTANCE_LINES[key]:
                terminalreporter.write_line(line)
