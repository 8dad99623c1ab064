"""Test suite generation by bounded depth-first search over an LTS.

The all-n-loop-paths criterion is read as a per-state visit bound: a path may
enter each state at most ``loop_bound`` times, and a path is recorded once it
reaches a sink or every extension would break that bound.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

from .lts import LtsModel, Transition, profile, require_valid


class SuiteError(ValueError):
    pass


@dataclass(frozen=True)
class TestCase:
    id: str
    steps: tuple[str, ...]

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if not self.steps:
            raise SuiteError(f"test case {self.id!r} has no steps")
        object.__setattr__(self, "steps", tuple(self.steps))

    @property
    def size(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class TestSuite:
    name: str
    test_cases: tuple[TestCase, ...]

    __test__ = False

    def __post_init__(self):
        object.__setattr__(self, "test_cases", tuple(self.test_cases))
        ids = [tc.id for tc in self.test_cases]
        if len(set(ids)) != len(ids):
            raise SuiteError(f"suite {self.name!r} has duplicate test ids")

    def __len__(self) -> int:
        return len(self.test_cases)

    def __iter__(self) -> Iterator[TestCase]:
        return iter(self.test_cases)

    @property
    def ids(self) -> list[str]:
        return [tc.id for tc in self.test_cases]

    def by_id(self) -> dict[str, TestCase]:
        return {tc.id: tc for tc in self.test_cases}

    @classmethod
    def from_steps(cls, name: str, paths: Sequence[Sequence[str]]) -> "TestSuite":
        return cls(name, tuple(TestCase(f"TC{i}", tuple(p)) for i, p in enumerate(paths, 1)))


# ---------------------------------------------------------------- generation


def walk_paths(model: LtsModel, loop_bound: int) -> Iterator[tuple[Transition, ...]]:
    """Yield every maximal visit-bounded path from the initial state, in DFS
    order with children taken in declaration order.

    A lone initial state with no way out yields nothing: a test case needs at
    least one step.
    """
    visits = {model.initial: 1}
    path: list[Transition] = []
    stack: list[Iterator[Transition]] = [iter(model.outgoing(model.initial))]
    extended = [False]
    while stack:
        t = next(stack[-1], None)
        if t is None:
            stack.pop()
            if not extended.pop() and path:
                yield tuple(path)
            if path:
                last = path.pop()
                visits[last.target] -= 1
            continue
        if visits.get(t.target, 0) >= loop_bound:
            continue
        extended[-1] = True
        visits[t.target] = visits.get(t.target, 0) + 1
        path.append(t)
        stack.append(iter(model.outgoing(t.target)))
        extended.append(False)


def generate(model: LtsModel, loop_bound: int = 2, name: str = "suite") -> TestSuite:
    if loop_bound < 1:
        raise ValueError("loop_bound must be >= 1")
    require_valid(model)
    return TestSuite.from_steps(name, [[t.label for t in p] for p in walk_paths(model, loop_bound)])


def trace(model: LtsModel, steps: Sequence[str]) -> tuple[Transition, ...]:
    """Resolve a label sequence to the transitions it walks from initial.

    Where labels are ambiguous the first match in declaration order wins.
    """
    result: list[Transition] = []

    def extend(state: str, i: int) -> bool:
        if i == len(steps):
            return True
        for t in model.outgoing(state):
            if t.label == steps[i]:
                result.append(t)
                if extend(t.target, i + 1):
                    return True
                result.pop()
        return False

    # iterative fast path for deterministic models, recursion only on ambiguity
    state = model.initial
    for i, label in enumerate(steps):
        matches = [t for t in model.outgoing(state) if t.label == label]
        if len(matches) == 1:
            result.append(matches[0])
            state = matches[0].target
            continue
        if not matches:
            raise SuiteError(f"step {i + 1} {label!r} is not a transition of the model")
        if extend(state, i):
            return tuple(result)
        raise SuiteError(f"steps from position {i + 1} do not form a path of the model")
    return tuple(result)


# ---------------------------------------------------------------- metrics


@dataclass(frozen=True)
class TestCaseMetrics:
    size: int
    branch_count: int
    join_count: int
    loop_traversals: int
    essential: bool

    __test__ = False


def metrics(suite: TestSuite, model: LtsModel) -> dict[str, TestCaseMetrics]:
    prof = profile(model)
    traces = {tc.id: trace(model, tc.steps) for tc in suite}
    coverers: dict[Transition, set[str]] = {}
    for tid, tr in traces.items():
        for t in tr:
            coverers.setdefault(t, set()).add(tid)
    out = {}
    for tc in suite:
        tr = traces[tc.id]
        out[tc.id] = TestCaseMetrics(
            size=tc.size,
            branch_count=sum(t.source in prof.branch_states for t in tr),
            join_count=sum(t.target in prof.join_states for t in tr),
            loop_traversals=sum(t in prof.loop_transitions for t in tr),
            essential=any(coverers[t] == {tc.id} for t in tr),
        )
    return out


# ---------------------------------------------------------------- file formats


def suite_to_dict(suite: TestSuite) -> dict:
    return {"name": suite.name, "test_cases": [{"id": tc.id, "steps": list(tc.steps)} for tc in suite]}


def suite_from_dict(doc: dict) -> TestSuite:
    try:
        return TestSuite(doc["name"], tuple(TestCase(str(t["id"]), tuple(t["steps"])) for t in doc["test_cases"]))
    except (KeyError, TypeError) as exc:
        raise SuiteError(f"malformed suite document: {exc}") from exc


def save_suite(suite: TestSuite, path: str | Path) -> None:
    Path(path).write_text(json.dumps(suite_to_dict(suite), indent=2) + "\n", encoding="utf-8", newline="\n")


def load_suite(path: str | Path) -> TestSuite:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SuiteError(f"{path}: {exc}") from exc
    return suite_from_dict(doc)


def suite_to_csv(suite: TestSuite) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["test_id", "position", "step"])
    for tc in suite:
        for pos, step in enumerate(tc.steps, 1):
            w.writerow([tc.id, pos, step])
    return buf.getvalue()
