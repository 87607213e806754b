import functools

import numpy as np
import pytest

from cgdg.mesh import generate_square_mesh
from cgdg.operators import Operators


@functools.lru_cache(maxsize=None)
def periodic_mesh(nx, ny=None, perturb=0.15, seed=0, box=(0.0, 1.0, 0.0, 1.0)):
    return generate_square_mesh(nx, ny or nx, box, perturb, seed)


@functools.lru_cache(maxsize=None)
def operators(nx, degree, perturb=0.15, seed=0, box=(0.0, 1.0, 0.0, 1.0), mass_solver="cg"):
    return Operators(periodic_mesh(nx, nx, perturb, seed, box), degree, mass_solver=mass_solver)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def unit_right_triangle():
    from cgdg.mesh import TriMesh

    return TriMesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]), (0.0, 1.0, 0.0, 1.0))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number: int, title: str, passed: bool, detail: str = "") -> None:
        line = f"{'PASS' if passed else 'FAIL'}  criterion {number:2d}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
