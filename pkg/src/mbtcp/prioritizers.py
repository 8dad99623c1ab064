"""The fourteen prioritization techniques.

Every technique maps a suite and a seed to a permutation of the suite's test
ids.  Randomness comes only from ``numpy.random.default_rng(seed)``; every tie
is broken uniformly at random from that generator.

Per-suite quantities (distance matrices, step weights) do not depend on the
seed, so they live on a :class:`SuiteIndex` that callers may build once and
reuse across repetitions.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .faults import FaultReport
from .lts import LtsModel, profile
from .testgen import TestCase, TestSuite, trace

TECHNIQUES = (
    "Opt", "Ran", "ARPJac", "ARPMan", "ARPSim1", "ARPSim2", "FW",
    "Stoop", "PC", "SDh", "SDe", "SDm", "ST", "SA",
)

CANDIDATE_SET_SIZE = 10


class UnknownTechnique(ValueError):
    pass


@dataclass(frozen=True)
class PrioritizedOrder:
    suite_name: str
    technique: str
    seed: int
    order: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(self.order))
        if len(set(self.order)) != len(self.order):
            raise ValueError("order contains duplicate test ids")


class DistanceKind(str, Enum):
    JACCARD = "Jaccard"
    MANHATTAN = "Manhattan"
    SIMILARITY_CM = "SimilarityCM"


class Selection(str, Enum):
    MAX_MIN = "MaxMin"
    MAX_MAX = "MaxMax"


# ---------------------------------------------------------------- distances


def distance(kind: DistanceKind | str, a: TestCase, b: TestCase, universe: Sequence[str] | None = None) -> float:
    """Pairwise measure between two test cases over their distinct steps.

    Manhattan counts positions where the binary step-coverage vectors differ,
    which equals the size of the symmetric difference of the step sets; the
    universe is only checked for containment.
    """
    kind = DistanceKind(kind)
    sa, sb = set(a.steps), set(b.steps)
    if universe is not None and not (sa | sb) <= set(universe):
        raise ValueError("universe does not contain every step of both test cases")
    common = len(sa & sb)
    if kind is DistanceKind.JACCARD:
        union = len(sa | sb)
        return 0.0 if union == 0 else 1 - common / union
    if kind is DistanceKind.MANHATTAN:
        return float(len(sa ^ sb))
    return 2 * common / (len(a.steps) + len(b.steps))


def string_form(tc: TestCase) -> str:
    return "\n".join(tc.steps)


class SuiteIndex:
    """Seed-independent per-suite data shared by the techniques."""

    def __init__(self, suite: TestSuite, model: LtsModel | None = None):
        if not len(suite):
            raise ValueError("suite is empty")
        self.suite = suite
        self.model = model
        self.ids = suite.ids
        self.n = len(suite)

    @cached_property
    def step_sets(self) -> list[frozenset[str]]:
        return [frozenset(tc.steps) for tc in self.suite]

    @cached_property
    def universe(self) -> list[str]:
        seen: dict[str, None] = {}
        for tc in self.suite:
            for s in tc.steps:
                seen.setdefault(s, None)
        return list(seen)

    @cached_property
    def coverage(self) -> np.ndarray:
        col = {s: j for j, s in enumerate(self.universe)}
        m = np.zeros((self.n, len(col)), dtype=np.int64)
        for i, steps in enumerate(self.step_sets):
            m[i, [col[s] for s in steps]] = 1
        return m

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([tc.size for tc in self.suite], dtype=np.int64)

    @cached_property
    def _common(self) -> np.ndarray:
        return self.coverage @ self.coverage.T

    def matrix(self, kind: DistanceKind | str) -> np.ndarray:
        kind = DistanceKind(kind)
        key = f"_m_{kind.value}"
        if key not in self.__dict__:
            common = self._common
            distinct = np.diag(common)
            union = distinct[:, None] + distinct[None, :] - common
            if kind is DistanceKind.JACCARD:
                with np.errstate(invalid="ignore", divide="ignore"):
                    m = np.where(union == 0, 0.0, 1 - common / np.where(union == 0, 1, union))
            elif kind is DistanceKind.MANHATTAN:
                m = (union - common).astype(float)
            else:
                m = 2 * common / (self.sizes[:, None] + self.sizes[None, :])
            self.__dict__[key] = m
        return self.__dict__[key]

    @cached_property
    def _codepoints(self) -> np.ndarray:
        strings = [string_form(tc) for tc in self.suite]
        width = max(len(s) for s in strings)
        arr = np.zeros((self.n, width), dtype=np.int64)  # zero is NUL padding
        for i, s in enumerate(strings):
            arr[i, : len(s)] = [ord(c) for c in s]
        return arr

    def string_matrix(self, metric: str) -> np.ndarray:
        key = f"_sd_{metric}"
        if key not in self.__dict__:
            x = self._codepoints
            m = np.empty((self.n, self.n))
            for i in range(self.n):
                diff = x - x[i]
                if metric == "hamming":
                    m[i] = (diff != 0).sum(axis=1)
                elif metric == "euclidean":
                    m[i] = np.sqrt((diff * diff).sum(axis=1))
                elif metric == "manhattan":
                    m[i] = np.abs(diff).sum(axis=1)
                else:
                    raise ValueError(f"unknown string metric {metric!r}")
            self.__dict__[key] = m
        return self.__dict__[key]

    @cached_property
    def awpl(self) -> np.ndarray:
        eweight: dict[str, int] = {}
        for steps in self.step_sets:
            for s in steps:
                eweight[s] = eweight.get(s, 0) + 1
        return np.array([sum(eweight[s] for s in tc.steps) / tc.size for tc in self.suite])

    @cached_property
    def path_complexity(self) -> np.ndarray:
        preds: dict[str, set[str]] = {}
        succs: dict[str, set[str]] = {}
        for tc in self.suite:
            for s in tc.steps:
                preds.setdefault(s, set())
                succs.setdefault(s, set())
            for a, b in zip(tc.steps, tc.steps[1:]):
                succs[a].add(b)
                preds[b].add(a)
        info_flow = {s: (len(preds[s]) * len(succs[s])) ** 2 for s in preds}
        return np.array([tc.size + sum(info_flow[s] for s in tc.steps) for tc in self.suite], dtype=float)

    @cached_property
    def fixed_weights(self) -> np.ndarray:
        if self.model is not None:
            prof = profile(self.model)
            out = []
            for tc in self.suite:
                out.append(sum(
                    2 if (t.source in prof.branch_states or t.target in prof.join_states) else 1
                    for t in trace(self.model, tc.steps)
                ))
            return np.array(out, dtype=float)
        return self._suite_fixed_weights()

    def _suite_fixed_weights(self) -> np.ndarray:
        # Steps act as transitions between implicit states: a step following a
        # step with several distinct successors leaves a branch, a step whose
        # successor has several distinct predecessors enters a join.
        start = object()
        succs: dict[object, set[str]] = {}
        preds: dict[str, set[object]] = {}
        for tc in self.suite:
            prev: object = start
            for s in tc.steps:
                succs.setdefault(prev, set()).add(s)
                preds.setdefault(s, set()).add(prev)
                prev = s
        out = []
        for tc in self.suite:
            w = 0
            prev = start
            for i, s in enumerate(tc.steps):
                branch = len(succs[prev]) > 1
                nxt = tc.steps[i + 1] if i + 1 < tc.size else None
                join = nxt is not None and len(preds[nxt]) > 1
                w += 2 if branch or join else 1
                prev = s
            out.append(w)
        return np.array(out, dtype=float)


# ---------------------------------------------------------------- helpers


def _rank_desc(scores: np.ndarray, rng: np.random.Generator) -> list[int]:
    tiebreak = rng.permutation(len(scores))
    return np.lexsort((tiebreak, -np.asarray(scores, dtype=float))).tolist()


def _argmax_random(values: np.ndarray, rng: np.random.Generator) -> int:
    best = np.flatnonzero(values == values.max())
    return int(best[rng.integers(len(best))])


def _index(suite: TestSuite | SuiteIndex, model: LtsModel | None = None) -> SuiteIndex:
    if isinstance(suite, SuiteIndex):
        return suite
    return SuiteIndex(suite, model)


def _result(idx: SuiteIndex, technique: str, seed: int, positions: Sequence[int]) -> PrioritizedOrder:
    return PrioritizedOrder(idx.suite.name, technique, seed, tuple(idx.ids[i] for i in positions))


# ---------------------------------------------------------------- techniques


def prioritize_ran(suite: TestSuite | SuiteIndex, seed: int) -> PrioritizedOrder:
    idx = _index(suite)
    rng = np.random.default_rng(seed)
    return _result(idx, "Ran", seed, rng.permutation(idx.n).tolist())


def prioritize_arp(
    suite: TestSuite | SuiteIndex,
    seed: int,
    kind: DistanceKind | str,
    selection: Selection | str = Selection.MAX_MIN,
    technique: str | None = None,
) -> PrioritizedOrder:
    idx = _index(suite)
    kind, selection = DistanceKind(kind), Selection(selection)
    rng = np.random.default_rng(seed)
    d = idx.matrix(kind)
    n = idx.n
    first = int(rng.integers(n))
    order = [first]
    remaining = [i for i in range(n) if i != first]
    # running min (or max) of the measure from each test to the prioritized set
    agg = d[first].copy()
    reduce = np.minimum if selection is Selection.MAX_MIN else np.maximum
    while remaining:
        k = min(CANDIDATE_SET_SIZE, len(remaining))
        cand = rng.choice(len(remaining), size=k, replace=False)
        pick = int(cand[_argmax_random(agg[[remaining[c] for c in cand]], rng)])
        chosen = remaining.pop(pick)
        order.append(chosen)
        agg = reduce(agg, d[chosen])
    return _result(idx, technique or f"ARP{kind.value}{selection.value}", seed, order)


def prioritize_fw(suite: TestSuite | SuiteIndex, seed: int, model: LtsModel | None = None) -> PrioritizedOrder:
    idx = _index(suite, model)
    if model is not None and idx.model is None:
        idx = SuiteIndex(idx.suite, model)
    rng = np.random.default_rng(seed)
    return _result(idx, "FW", seed, _rank_desc(idx.fixed_weights, rng))


def prioritize_stoop(suite: TestSuite | SuiteIndex, seed: int) -> PrioritizedOrder:
    idx = _index(suite)
    rng = np.random.default_rng(seed)
    return _result(idx, "Stoop", seed, _rank_desc(idx.awpl, rng))


def prioritize_pc(suite: TestSuite | SuiteIndex, seed: int) -> PrioritizedOrder:
    idx = _index(suite)
    rng = np.random.default_rng(seed)
    return _result(idx, "PC", seed, _rank_desc(idx.path_complexity, rng))


_SD_NAMES = {"hamming": "SDh", "euclidean": "SDe", "manhattan": "SDm"}


def prioritize_sd(suite: TestSuite | SuiteIndex, seed: int, metric: str) -> PrioritizedOrder:
    idx = _index(suite)
    metric = metric.lower()
    if metric not in _SD_NAMES:
        raise ValueError(f"unknown string metric {metric!r}")
    rng = np.random.default_rng(seed)
    d = idx.string_matrix(metric)
    first = _argmax_random(d.sum(axis=1), rng)
    order = [first]
    left = np.ones(idx.n, dtype=bool)
    left[first] = False
    mind = d[first].copy()
    while left.any():
        pos = np.flatnonzero(left)
        chosen = int(pos[_argmax_random(mind[pos], rng)])
        order.append(chosen)
        left[chosen] = False
        mind = np.minimum(mind, d[chosen])
    return _result(idx, _SD_NAMES[metric], seed, order)


def prioritize_st(suite: TestSuite | SuiteIndex, seed: int) -> PrioritizedOrder:
    idx = _index(suite)
    rng = np.random.default_rng(seed)
    return _result(idx, "ST", seed, _rank_desc(idx.coverage.sum(axis=1), rng))


def prioritize_sa(suite: TestSuite | SuiteIndex, seed: int) -> PrioritizedOrder:
    idx = _index(suite)
    rng = np.random.default_rng(seed)
    cov = idx.coverage.astype(bool)
    left = np.ones(idx.n, dtype=bool)
    covered = np.zeros(cov.shape[1], dtype=bool)
    order = []
    while left.any():
        pos = np.flatnonzero(left)
        gain = (cov[pos] & ~covered).sum(axis=1)
        if gain.max() == 0 and covered.any():
            covered[:] = False
            gain = cov[pos].sum(axis=1)
        chosen = int(pos[_argmax_random(gain, rng)])
        order.append(chosen)
        left[chosen] = False
        covered |= cov[chosen]
    return _result(idx, "SA", seed, order)


def prioritize_opt(suite: TestSuite | SuiteIndex, seed: int, faults: FaultReport) -> PrioritizedOrder:
    idx = _index(suite)
    faults.check_against(idx.suite)
    rng = np.random.default_rng(seed)
    pos = {tid: i for i, tid in enumerate(idx.ids)}
    reveals = np.zeros((idx.n, len(faults)), dtype=bool)
    for j, tests in enumerate(faults.faults.values()):
        for tid in tests:
            reveals[pos[tid], j] = True
    left = np.ones(idx.n, dtype=bool)
    found = np.zeros(len(faults), dtype=bool)
    order = []
    while not found.all():
        cand = np.flatnonzero(left)
        gain = (reveals[cand] & ~found).sum(axis=1)
        chosen = int(cand[_argmax_random(gain, rng)])
        order.append(chosen)
        left[chosen] = False
        found |= reveals[chosen]
    rest = np.flatnonzero(left)
    order.extend(rest[rng.permutation(len(rest))].tolist())
    return _result(idx, "Opt", seed, order)


_DISPATCH: dict[str, Callable[..., PrioritizedOrder]] = {
    "Ran": lambda idx, seed, **_: prioritize_ran(idx, seed),
    "ARPJac": lambda idx, seed, **_: prioritize_arp(idx, seed, DistanceKind.JACCARD, Selection.MAX_MIN, "ARPJac"),
    "ARPMan": lambda idx, seed, **_: prioritize_arp(idx, seed, DistanceKind.MANHATTAN, Selection.MAX_MIN, "ARPMan"),
    "ARPSim1": lambda idx, seed, **_: prioritize_arp(idx, seed, DistanceKind.SIMILARITY_CM, Selection.MAX_MIN, "ARPSim1"),
    "ARPSim2": lambda idx, seed, **_: prioritize_arp(idx, seed, DistanceKind.SIMILARITY_CM, Selection.MAX_MAX, "ARPSim2"),
    "FW": lambda idx, seed, **_: prioritize_fw(idx, seed),
    "Stoop": lambda idx, seed, **_: prioritize_stoop(idx, seed),
    "PC": lambda idx, seed, **_: prioritize_pc(idx, seed),
    "SDh": lambda idx, seed, **_: prioritize_sd(idx, seed, "hamming"),
    "SDe": lambda idx, seed, **_: prioritize_sd(idx, seed, "euclidean"),
    "SDm": lambda idx, seed, **_: prioritize_sd(idx, seed, "manhattan"),
    "ST": lambda idx, seed, **_: prioritize_st(idx, seed),
    "SA": lambda idx, seed, **_: prioritize_sa(idx, seed),
}


def prioritize(
    technique: str,
    suite: TestSuite | SuiteIndex,
    seed: int,
    *,
    faults: FaultReport | None = None,
    model: LtsModel | None = None,
) -> PrioritizedOrder:
    """Run a technique by its identifier.  ``faults`` is required for Opt;
    ``model`` is used by FW when given."""
    if technique not in TECHNIQUES:
        raise UnknownTechnique(f"unknown technique {technique!r}; valid: {', '.join(TECHNIQUES)}")
    idx = _index(suite, model)
    if model is not None and idx.model is None:
        idx = SuiteIndex(idx.suite, model)
    if technique == "Opt":
        if faults is None:
            raise ValueError("Opt requires a fault report")
        return prioritize_opt(idx, seed, faults)
    return _DISPATCH[technique](idx, seed)
