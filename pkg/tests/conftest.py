import itertools
import json
from pathlib import Path

import networkx as nx
import pytest
from hypothesis import strategies as st

from mbtcp.faults import FaultReport
from mbtcp.lts import LtsModel, login_model
from mbtcp.testgen import TestSuite, suite_from_dict

GOLDEN = Path(__file__).parent / "golden"

# criterion lines collected by test_acceptance, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def login() -> LtsModel:
    return login_model()


@pytest.fixture
def table1() -> TestSuite:
    return load_table1()


@pytest.fixture
def tc1_fails() -> FaultReport:
    return FaultReport({"F1": frozenset(["TC1"])})


def load_table1() -> TestSuite:
    return suite_from_dict(json.loads((GOLDEN / "table1.json").read_text(encoding="utf-8")))


# ---------------------------------------------------------------- oracles


def brute_paths(model: LtsModel, bound: int) -> list[tuple]:
    """Every maximal visit-bounded path, found by growing all walks level by
    level instead of by DFS.  Order is not meaningful."""
    done = []
    frontier = [((), {model.initial: 1}, model.initial)]
    while frontier:
        nxt = []
        for path, visits, state in frontier:
            ext = [t for t in model.transitions if t.source == state and visits.get(t.target, 0) < bound]
            if not ext:
                if path:
                    done.append(path)
                continue
            for t in ext:
                v = dict(visits)
                v[t.target] = v.get(t.target, 0) + 1
                nxt.append((path + (t,), v, t.target))
        frontier = nxt
    return done


def brute_longest_simple_path(model: LtsModel) -> int:
    """Enumerate every simple path from the initial state with networkx."""
    g = nx.DiGraph()
    g.add_nodes_from(model.states)
    g.add_edges_from((t.source, t.target) for t in model.transitions)
    best = 0
    for target in model.states - {model.initial}:
        for path in nx.all_simple_paths(g, model.initial, target):
            best = max(best, len(path) - 1)
    return best


def brute_max_apfd(ids, faults: FaultReport) -> float:
    n = len(ids)
    best = -1.0
    for perm in itertools.permutations(ids):
        pos = {t: i for i, t in enumerate(perm, 1)}
        tf = [min(pos[t] for t in ts) for ts in faults.faults.values()]
        best = max(best, 1 - sum(tf) / (n * len(tf)) + 1 / (2 * n))
    return best


# ---------------------------------------------------------------- strategies

PREFIXES = ("S - ", "R - ", "C - ")


@st.composite
def small_models(draw, max_states: int = 6):
    """Connected models on at most ``max_states`` states: a random spanning
    tree from s0 plus a few extra edges, possibly closing cycles."""
    n = draw(st.integers(2, max_states))
    edges = []
    for i in range(1, n):
        edges.append((draw(st.integers(0, i - 1)), i))
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=4))
    edges += [e for e in extra if e[0] != e[1]]
    trans = []
    for k, (a, b) in enumerate(edges):
        prefix = PREFIXES[draw(st.integers(0, 2))]
        trans.append((f"s{a}", f"{prefix}step {k}", f"s{b}"))
    return LtsModel.from_transitions("s0", trans)


@st.composite
def small_suites(draw, min_size: int = 1, max_size: int = 7):
    n = draw(st.integers(min_size, max_size))
    alphabet = [f"S - a{i}" for i in range(6)]
    paths = [draw(st.lists(st.sampled_from(alphabet), min_size=1, max_size=8)) for _ in range(n)]
    return TestSuite.from_steps("s", paths)


@st.composite
def suites_with_faults(draw, max_size: int = 7, max_faults: int = 3):
    suite = draw(small_suites(min_size=1, max_size=max_size))
    m = draw(st.integers(1, max_faults))
    faults = {}
    for j in range(m):
        faults[f"F{j + 1}"] = frozenset(draw(st.lists(st.sampled_from(suite.ids), min_size=1, unique=True)))
    return suite, FaultReport(faults)
