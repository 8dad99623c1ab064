import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from mbtcp import prioritizers as P
from mbtcp.faults import FaultReport
from mbtcp.lts import LtsModel, profile
from mbtcp.prioritizers import TECHNIQUES, DistanceKind, SuiteIndex, UnknownTechnique, distance, prioritize
from mbtcp.stats import apfd
from mbtcp.testgen import TestCase, TestSuite, generate, trace

from conftest import small_suites, suites_with_faults


def tc(*steps, id="t"):
    return TestCase(id, tuple(steps))


def suite(*paths):
    return TestSuite.from_steps("s", paths)


# ---------------------------------------------------------------- distances


def test_distance_examples():
    a, b = tc("x", "y"), tc("y", "z")
    assert distance("Jaccard", a, b, ["x", "y", "z"]) == pytest.approx(2 / 3)
    assert distance("Manhattan", a, b, ["x", "y", "z"]) == 2
    assert distance("SimilarityCM", a, b) == pytest.approx(0.5)


def test_distance_identity_and_disjoint():
    a = tc("x", "y", "x")
    assert distance("Jaccard", a, a) == 0
    assert distance("Manhattan", a, a) == 0
    assert distance("SimilarityCM", a, a) == pytest.approx(2 / 3)
    b = tc("p", "q")
    assert distance("Jaccard", a, b) == 1
    assert distance("SimilarityCM", a, b) == 0


def test_distance_universe_checked():
    with pytest.raises(ValueError):
        distance("Manhattan", tc("x"), tc("y"), ["x"])


@settings(max_examples=200, deadline=None)
@given(small_suites(min_size=2))
def test_matrix_matches_pairwise(s):
    idx = SuiteIndex(s)
    for kind in DistanceKind:
        m = idx.matrix(kind)
        assert np.allclose(m, m.T)
        for i, j in itertools.product(range(len(s)), repeat=2):
            assert m[i, j] == pytest.approx(distance(kind, s.test_cases[i], s.test_cases[j], idx.universe))


# ---------------------------------------------------------------- Ran


def test_ran_singleton_and_determinism():
    s = suite(["a"])
    assert prioritize("Ran", s, 3).order == ("TC1",)
    s = suite(["a"], ["b"], ["c"], ["d"])
    assert prioritize("Ran", s, 11).order == prioritize("Ran", s, 11).order


def test_ran_uniform_over_permutations():
    s = suite(["a"], ["b"], ["c"])
    idx = SuiteIndex(s)
    counts = Counter(P.prioritize_ran(idx, seed).order for seed in range(60_000))
    assert len(counts) == 6
    freqs = np.array(list(counts.values())) / 60_000
    assert np.all(np.abs(freqs - 1 / 6) <= 0.01)
    assert chisquare(list(counts.values())).pvalue > 0.001


# ---------------------------------------------------------------- ARP


@pytest.mark.parametrize("tech", ["ARPJac", "ARPMan", "ARPSim1", "ARPSim2"])
def test_arp_pair_is_forced(tech):
    s = suite(["a"], ["b"])
    for seed in range(20):
        assert sorted(prioritize(tech, s, seed).order) == ["TC1", "TC2"]


def test_arp_picks_farthest_second():
    # TC4 shares nothing with the others; the others share everything
    s = suite(["a", "b"], ["a", "b"], ["a", "b", "c"], ["x", "y"])
    d = SuiteIndex(s).matrix("Jaccard")
    for seed in range(200):
        order = prioritize("ARPJac", s, seed).order
        first = s.ids.index(order[0])
        far = np.flatnonzero(d[first] == d[first].max())
        assert s.ids.index(order[1]) in far


def test_arp_outlier_in_first_two():
    s = suite(["a"], ["a"], ["a"], ["a"], ["z", "w"])
    for tech in ("ARPJac", "ARPMan"):
        for seed in range(200):
            assert "TC5" in prioritize(tech, s, seed).order[:2]


def test_arp_sim2_prefers_most_similar():
    # MaxMax over similarity: after TC1, the candidate with highest similarity wins
    s = suite(["a", "b"], ["a", "b"], ["x"])
    for seed in range(50):
        order = prioritize("ARPSim2", s, seed).order
        if order[0] in ("TC1", "TC2"):
            assert order[1] in ("TC1", "TC2")


def test_arp_first_pick_is_uniform():
    s = suite(["a"], ["b"], ["c"], ["d"])
    idx = SuiteIndex(s)
    firsts = Counter(P.prioritize_arp(idx, seed, "Jaccard").order[0] for seed in range(4000))
    assert chisquare(list(firsts.values())).pvalue > 0.001


# ---------------------------------------------------------------- FW, Stoop, PC


def test_fw_branch_free_is_size_descending():
    m = LtsModel.from_transitions("a", [("a", "S - 1", "b"), ("b", "S - 2", "c"), ("c", "S - 3", "d")])
    s = TestSuite.from_steps("s", [["S - 1"], ["S - 1", "S - 2", "S - 3"], ["S - 1", "S - 2"]])
    for seed in range(10):
        assert prioritize("FW", s, seed, model=m).order == ("TC2", "TC3", "TC1")


def test_fw_branch_crossing_first():
    m = LtsModel.from_transitions("a", [
        ("a", "C - p", "b"), ("a", "C - q", "c"),
        ("b", "S - 1", "d"), ("d", "S - 2", "f"),
        ("c", "S - 3", "g"), ("g", "C - z", "h"), ("g", "C - w", "i"),
    ])
    s = TestSuite.from_steps("s", [["C - p", "S - 1", "S - 2"], ["C - q", "S - 3", "C - z"]])
    for seed in range(10):
        assert prioritize("FW", s, seed, model=m).order == ("TC2", "TC1")


def test_fw_table1_against_tally(login, table1):
    prof = profile(login)
    weights = {}
    for t in table1:
        w = 0
        for tr in trace(login, t.steps):
            w += 2 if tr.source in prof.branch_states or tr.target in prof.join_states else 1
        weights[t.id] = w
    for seed in range(20):
        order = prioritize("FW", table1, seed, model=login).order
        ws = [weights[i] for i in order]
        assert ws == sorted(ws, reverse=True)


def test_fw_suite_only_fallback():
    # a chain of steps has no branch or join: weights equal sizes
    idx = SuiteIndex(suite(["a", "b", "c"], ["a", "b"], ["a"]))
    assert list(idx.fixed_weights) == [3, 2, 1]
    # the start fans out to a and d, and a fans out to b and c
    idx = SuiteIndex(suite(["a", "b"], ["a", "c"], ["d", "e"]))
    assert list(idx.fixed_weights) == [4, 4, 3]


def test_stoop_example():
    s = suite(["x"], ["x", "y"])
    idx = SuiteIndex(s)
    assert list(idx.awpl) == [2.0, 1.5]
    for seed in range(10):
        assert prioritize("Stoop", s, seed).order == ("TC1", "TC2")


def test_stoop_identical_tests_random():
    s = suite(["x"], ["x"], ["x"])
    assert len({prioritize("Stoop", s, seed).order for seed in range(60)}) == 6


def test_pc_examples():
    idx = SuiteIndex(suite(["a", "b", "c", "d"]))
    # interior steps b and c have fanin = fanout = 1
    assert idx.path_complexity[0] == 4 + 2
    idx = SuiteIndex(suite(["a", "b"], ["c", "b"]))
    assert list(idx.path_complexity) == [2, 2]


def test_pc_fanin_widening_reranks():
    base = suite(["a", "b", "c"], ["d", "e"])
    before = SuiteIndex(base).path_complexity
    wider = suite(["a", "b", "c"], ["d", "e"], ["x", "b"])
    after = SuiteIndex(wider).path_complexity
    # b now has fanin 2 and fanout 1, so IF(b) goes from 1 to 4
    assert after[0] == before[0] + 3
    assert after[1] == before[1]


# ---------------------------------------------------------------- SD


def test_sd_string_metrics():
    idx = SuiteIndex(suite(["ab"], ["ba"]))
    assert idx.string_matrix("hamming")[0, 1] == 2
    assert idx.string_matrix("manhattan")[0, 1] == 2 * abs(ord("a") - ord("b"))
    assert idx.string_matrix("euclidean")[0, 1] == pytest.approx(np.sqrt(2))
    same = SuiteIndex(suite(["ab"], ["ab"]))
    for metric in ("hamming", "euclidean", "manhattan"):
        assert same.string_matrix(metric)[0, 1] == 0


def test_sd_padding_with_nul():
    idx = SuiteIndex(suite(["ab"], ["a"]))
    assert idx.string_matrix("hamming")[0, 1] == 1
    assert idx.string_matrix("manhattan")[0, 1] == ord("b")


@pytest.mark.parametrize("tech", ["SDh", "SDe", "SDm"])
def test_sd_distinct_never_last(tech):
    s = suite(["S - same"], ["S - same"], ["R - other thing"])
    for seed in range(50):
        assert prioritize(tech, s, seed).order[-1] != "TC3"


def test_sd_unknown_metric():
    with pytest.raises(ValueError):
        P.prioritize_sd(suite(["a"]), 0, "levenshtein")


# ---------------------------------------------------------------- ST, SA


def test_dominant_coverer_first():
    s = suite(["x"], ["x", "y", "z"], ["y"])
    for seed in range(10):
        assert prioritize("ST", s, seed).order[0] == "TC2"
        assert prioritize("SA", s, seed).order[0] == "TC2"


def test_sa_example_with_reset():
    s = suite(["x", "y"], ["z"], ["x"])
    for seed in range(10):
        assert prioritize("SA", s, seed).order == ("TC1", "TC2", "TC3")


def test_identical_step_sets_random():
    s = suite(["x", "y"], ["y", "x"], ["x", "y", "x"])
    for tech in ("ST", "SA"):
        assert len({prioritize(tech, s, seed).order for seed in range(80)}) == 6


@settings(max_examples=200, deadline=None)
@given(small_suites(min_size=1), st.integers(0, 2**32))
def test_sa_prefix_optimality(s, seed):
    sets = {t.id: set(t.steps) for t in s}
    covered: set = set()
    order = prioritize("SA", s, seed).order
    for i, tid in enumerate(order):
        rest = order[i:]
        gains = {r: len(sets[r] - covered) for r in rest}
        if max(gains.values()) == 0 and covered:
            covered = set()
            gains = {r: len(sets[r]) for r in rest}
        assert gains[tid] == max(gains.values())
        covered |= sets[tid]


# ---------------------------------------------------------------- Opt and dispatch


def test_opt_table1(table1, tc1_fails):
    for seed in range(20):
        order = prioritize("Opt", table1, seed, faults=tc1_fails)
        assert order.order[0] == "TC1"
        assert apfd(order, tc1_fails).value == pytest.approx(13 / 14)


def test_opt_needs_faults(table1):
    with pytest.raises(ValueError):
        prioritize("Opt", table1, 0)
    with pytest.raises(ValueError):
        prioritize("Opt", table1, 0, faults=FaultReport({"F": frozenset(["TC99"])}))


def test_unknown_technique(table1):
    with pytest.raises(UnknownTechnique, match="ARPJac"):
        prioritize("NoSuchTech", table1, 0)


def test_empty_suite_rejected():
    with pytest.raises(ValueError):
        prioritize("Ran", TestSuite("e", ()), 0)


def test_generated_suite_every_technique(login):
    s = generate(login, 2)
    f = FaultReport({"F1": frozenset(["TC3"])})
    for t in TECHNIQUES:
        order = prioritize(t, s, 5, faults=f, model=login)
        assert sorted(order.order) == sorted(s.ids)
        assert order.technique == t


@settings(max_examples=200, deadline=None)
@given(suites_with_faults(), st.integers(0, 2**63))
def test_permutation_and_determinism(case, seed):
    s, f = case
    idx = SuiteIndex(s)
    for t in TECHNIQUES:
        a = prioritize(t, idx, seed, faults=f)
        assert sorted(a.order) == sorted(s.ids)
        assert a == prioritize(t, s, seed, faults=f)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=1, max_size=8), st.integers(1, 50), st.integers(0, 2**32))
def test_rank_desc_scale_invariant(scores, k, seed):
    x = np.array(scores, dtype=float)
    a = P._rank_desc(x, np.random.default_rng(seed))
    b = P._rank_desc(x * k, np.random.default_rng(seed))
    assert a == b
    assert list(x[a]) == sorted(x, reverse=True)
