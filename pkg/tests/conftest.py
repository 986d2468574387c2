from fractions import Fraction

import pytest

from pgsim.core import Level1Strategy
from pgsim.modelfile import data_path, load_model

# acceptance lines collected by test_acceptance.py, echoed once at the end
ACCEPTANCE_LINES: dict = {}


@pytest.fixture(scope="session")
def fig1():
    return load_model(data_path("fig1.pgs")).game


@pytest.fixture(scope="session")
def fig2():
    from pgsim.lifting import relation_from_json

    left = load_model(data_path("fig2a.pgs")).game
    right = load_model(data_path("fig2b.pgs")).game
    table = relation_from_json(data_path("fig2rel.json").read_text())
    return left, right, table


def fig1_strategies(G, p, q):
    """I plays ``a1`` with probability ``p``, II plays ``b1`` with probability ``q``."""
    p, q = Fraction(p), Fraction(q)
    sI = Level1Strategy({s: {"a1": p, "a2": 1 - p} for s in G.states})
    sII = Level1Strategy({s: {"b1": q, "b2": 1 - q} for s in G.states})
    return sI, sII


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
