import numpy as np
import pytest

from wbsubgrad.digraph import DiGraph, complete_graph, cycle_graph, from_labeled_edges
from wbsubgrad.experiment import generate_graph


def g4() -> DiGraph:
    """Three nodes labeled 1, 2, 3 with edges 1->2, 2->3, 3->1, 1->3."""
    return from_labeled_edges([("1", "2"), ("2", "3"), ("3", "1"), ("1", "3")])


def two_node() -> DiGraph:
    return DiGraph(2, [(0, 1), (1, 0)])


def sample_graphs() -> list[DiGraph]:
    graphs = [g4(), two_node(), cycle_graph(3), cycle_graph(7), complete_graph(4)]
    graphs += [generate_graph(n, p, seed) for n, p, seed in
               [(5, 0.3, 1), (10, 0.2, 2), (20, 0.1, 3), (20, 0.25, 4)]]
    return graphs




@pytest.fixture
def G4():
    return g4()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(number: int, title: str, ok: bool, detail: str):
        ACCEPTANCE_LINES[number] = (f"criterion {number:>2} [{'PASS' if ok else 'FAIL'}] "
                                    f"{title}: {detail}")
        assert ok, detail
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
