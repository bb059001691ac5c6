import numpy as np
import pytest

from gaugecvt.grf import FieldSpec, generate_grf
from gaugecvt.grid import Grid, ObservationMatrix


@pytest.fixture(scope="session")
def benchmark_obs():
    """40x40 exponential-correlation field, d0 = 9 cells, 1000 steps, seed 7."""
    return generate_grf(FieldSpec(Grid(40, 40), 1000, 1.0, 9.0, 1.0, seed=7))


@pytest.fixture
def small_obs():
    rng = np.random.default_rng(3)
    grid = Grid(6, 5)
    return ObservationMatrix(grid, rng.standard_normal((grid.n_cells, 20)))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
