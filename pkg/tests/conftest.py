import pytest

from loopsoup.lattice import build_torus, extend_torus, two_vertex_graph


@pytest.fixture
def two_vertex():
    return two_vertex_graph()


@pytest.fixture
def four_cycle():
    return build_torus(4, 1)


@pytest.fixture
def torus_2x2():
    return build_torus(2, 2)


@pytest.fixture
def ext_two_vertex():
    return extend_torus(two_vertex_graph())


@pytest.fixture
def ext_four_cycle():
    return extend_torus(build_torus(4, 1))


def exact_fixtures():
    """The three graphs small enough for exact enumeration."""
    return {"two-vertex": two_vertex_graph(), "four-cycle": build_torus(4, 1), "torus-2x2": build_torus(2, 2)}


ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    """Collect one verdict line per acceptance criterion for the terminal summary."""
    return ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
