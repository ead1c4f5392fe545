import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from plume import mesh as meshmod
from plume import wind as windmod
from plume.transport import TransportConfig, TransportOperator

settings.register_profile("plume", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("plume")

HOLES = [[0.25, 0.15, 0.5, 0.4], [0.6, 0.6, 0.75, 0.85]]

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_line():
    """Record a one-line pass/fail summary shown at the end of the run."""
    def record(number, name, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {name}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def square8():
    return meshmod.build_rect_mesh((0.0, 0.0, 1.0, 1.0), 8, 8)


@pytest.fixture(scope="session")
def holed16():
    return meshmod.build_rect_mesh((0.0, 0.0, 1.0, 1.0), 16, 16, HOLES)


@pytest.fixture(scope="session")
def small_transport():
    """16 x 16 two-building mesh, oblique uniform wind, SUPG on."""
    m = meshmod.build_rect_mesh((0.0, 0.0, 1.0, 1.0), 16, 16, HOLES)
    w = windmod.uniform(m, 0.6, 0.25)
    m = m.with_markers(meshmod.classify_boundary(m, w))
    return TransportOperator(m, w, TransportConfig(0.002, 0.05, 20))


@pytest.fixture(scope="session")
def gyre_transport():
    """Closed 16 x 16 two-building domain with the obstacle-fitted gyre (no inflow)."""
    m = meshmod.build_rect_mesh((0.0, 0.0, 1.0, 1.0), 16, 16, HOLES)
    w = windmod.double_gyre(m, -0.05, fit_obstacles=True)
    m = m.with_markers(meshmod.classify_boundary(m, w))
    return TransportOperator(m, w, TransportConfig(0.002, 0.1, 20))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
