import numpy as np
import pytest

from intercell import (Discretization, MeshConfig, ModelParams,
                       build_hierarchy)

#: PASS/FAIL lines recorded by the acceptance suite; echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def disc8():
    """Default 8-cell scene, one refinement level."""
    return Discretization(build_hierarchy(MeshConfig(2, 10.0, 5.0, 1)))


@pytest.fixture(scope="session")
def disc1():
    """Single-cell scene, one refinement level."""
    return Discretization(build_hierarchy(MeshConfig(1, 10.0, 5.0, 1)))


@pytest.fixture(scope="session")
def params8():
    """Biological parameters, cell 0 secreting."""
    q = np.zeros(8)
    q[0] = 2500.0
    return ModelParams(q=q)


@pytest.fixture(scope="session")
def params1():
    return ModelParams(q=np.array([2500.0]))


def random_positive_state(disc, rng):
    """A strictly positive, moderately sized state for derivative checks."""
    state = disc.zero_state()
    state.u[:] = 0.02 + 0.05 * rng.random(state.u.shape[0])
    v = state.v_cells
    v[:, 0] = 100.0 + 200.0 * rng.random(v.shape[0])
    v[:, 1] = 50.0 + 300.0 * rng.random(v.shape[0])
    v[:, 2] = 10.0 + 100.0 * rng.random(v.shape[0])
    return state
