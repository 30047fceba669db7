import numpy as np
import pytest

from fastrp.graph import from_pairs, generate_erdos_renyi


@pytest.fixture
def k3():
    return from_pairs([(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def p3():
    return from_pairs([(0, 1), (1, 2)])


@pytest.fixture
def er64():
    return generate_erdos_renyi(64, 512, seed=11)


def random_connected_nonbipartite(n, m, rng):
    while True:
        g = generate_erdos_renyi(n, m, int(rng.integers(2**31)))
        if g.is_connected() and not g.is_bipartite():
            return g


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
