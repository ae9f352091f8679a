import pytest

from quantbal import Digraph

FIXTURE_EDGES = [(0, 1), (0, 2), (1, 2), (2, 0)]


@pytest.fixture
def triangle():
    """Three nodes, out-degrees (2, 1, 1), starting balances (-1, 0, 1)."""
    return Digraph.from_edges(3, FIXTURE_EDGES)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
