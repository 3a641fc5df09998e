import numpy as np
import pytest

from cscktorus import GridSpec, random_kahler_potential

TWO_PI = 2 * np.pi


def cosine_potential(grid: GridSpec, eps: float) -> np.ndarray:
    """``-eps cos(2 pi x) / (4 pi^2)``, whose metric has ``det g = 1 + eps cos(2 pi x)`` when n = 1."""
    x = grid.coords()[0]
    return -eps * np.cos(TWO_PI * x) / (4 * np.pi**2)


def random_potentials(n: int, N: int, count: int, seed: int, strength: float = 0.5):
    rng = np.random.default_rng(seed)
    grid = GridSpec(n, N)
    return [random_kahler_potential(grid, rng, strength=strength) for _ in range(count)]


@pytest.fixture
def grid1():
    return GridSpec(1, 64)


@pytest.fixture
def grid2():
    return GridSpec(2, 32)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
