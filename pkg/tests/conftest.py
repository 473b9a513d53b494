import pytest

from vortexpair.grid import Field, Params, make_grid
from vortexpair.solver import solve_dipole

# filled by test_acceptance, echoed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def reference_grid():
    return make_grid(6.0, 6.0, 256, 128)


@pytest.fixture(scope="session")
def dipole(reference_grid):
    """The s = 1/2, mu = 0.02 dipole on the 256 x 128 reference grid."""
    return solve_dipole(Params(s=0.5, mu=0.02), reference_grid)


@pytest.fixture(scope="session")
def small_dipole():
    return solve_dipole(Params(s=0.5, mu=0.02), make_grid(6.0, 6.0, 128, 64))


def half_disk(grid, radius, center=(0.0, 0.0)):
    X1, X2 = grid.mesh()
    return Field(grid, ((X1 - center[0]) ** 2 + (X2 - center[1]) ** 2 < radius**2).astype(float))


def random_field(grid, rng, density=0.3):
    v = rng.random(grid.shape) * (rng.random(grid.shape) < density)
    return Field(grid, v)
