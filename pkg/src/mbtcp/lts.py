"""Labeled transition system models: construction, validation, parsing and
structural profiling.

A model is the tuple (states, labels, transitions, initial).  Transition
order is kept as declared; it drives every deterministic traversal in the
package (DFS child order, path generation, loop identification), while
equality between models is structural and ignores declaration order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator


class LabelKind(Enum):
    USER_STEP = "UserStep"
    SYSTEM_RESPONSE = "SystemResponse"
    CONDITION = "Condition"


_PREFIXES = {
    "S - ": LabelKind.USER_STEP,
    "R - ": LabelKind.SYSTEM_RESPONSE,
    "C - ": LabelKind.CONDITION,
}


def label_kind(label: str) -> LabelKind | None:
    """Return the kind encoded by the label prefix, or None if unrecognized."""
    for prefix, kind in _PREFIXES.items():
        if label.startswith(prefix):
            return kind
    return None


@dataclass(frozen=True)
class Transition:
    source: str
    label: str
    target: str


class ModelError(ValueError):
    """Raised for malformed model files or models failing validation."""

    def __init__(self, message: str, report: "ValidationReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class LtsModel:
    states: frozenset[str]
    labels: frozenset[str]
    transitions: tuple[Transition, ...]
    initial: str

    @classmethod
    def from_transitions(
        cls,
        initial: str,
        transitions: Iterable[tuple[str, str, str] | Transition],
        extra_states: Iterable[str] = (),
    ) -> "LtsModel":
        """Build a model whose states and labels are implied by the transitions.

        Duplicate triples are dropped, keeping the first declaration.
        """
        seen: dict[Transition, None] = {}
        for t in transitions:
            if not isinstance(t, Transition):
                t = Transition(*t)
            seen.setdefault(t, None)
        trans = tuple(seen)
        states = {initial, *extra_states}
        for t in trans:
            states.add(t.source)
            states.add(t.target)
        return cls(
            states=frozenset(states),
            labels=frozenset(t.label for t in trans),
            transitions=trans,
            initial=initial,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LtsModel):
            return NotImplemented
        return (
            self.initial == other.initial
            and self.states == other.states
            and self.labels == other.labels
            and frozenset(self.transitions) == frozenset(other.transitions)
        )

    def __hash__(self) -> int:
        return hash((self.initial, self.states, frozenset(self.transitions)))

    def outgoing(self, state: str) -> tuple[Transition, ...]:
        return self._out.get(state, ())

    def incoming(self, state: str) -> tuple[Transition, ...]:
        return self._in.get(state, ())

    @property
    def _out(self) -> dict[str, tuple[Transition, ...]]:
        cache = self.__dict__.get("_out_cache")
        if cache is None:
            acc: dict[str, list[Transition]] = {}
            for t in self.transitions:
                acc.setdefault(t.source, []).append(t)
            cache = {k: tuple(v) for k, v in acc.items()}
            object.__setattr__(self, "_out_cache", cache)
        return cache

    @property
    def _in(self) -> dict[str, tuple[Transition, ...]]:
        cache = self.__dict__.get("_in_cache")
        if cache is None:
            acc: dict[str, list[Transition]] = {}
            for t in self.transitions:
                acc.setdefault(t.target, []).append(t)
            cache = {k: tuple(v) for k, v in acc.items()}
            object.__setattr__(self, "_in_cache", cache)
        return cache

    def reachable(self) -> set[str]:
        seen = {self.initial}
        stack = [self.initial]
        while stack:
            s = stack.pop()
            for t in self.outgoing(s):
                if t.target not in seen:
                    seen.add(t.target)
                    stack.append(t.target)
        return seen


# ---------------------------------------------------------------- validation


@dataclass(frozen=True)
class Violation:
    kind: str  # unreachable | dangling | unknown-label | bad-initial | empty | unknown-prefix
    detail: str
    warning: bool = False


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def errors(self) -> tuple[Violation, ...]:
        return tuple(v for v in self.violations if not v.warning)

    @property
    def warnings(self) -> tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.warning)

    @property
    def ok(self) -> bool:
        """True when there are no hard errors (prefix warnings are tolerated)."""
        return not self.errors

    def __bool__(self) -> bool:
        return bool(self.violations)

    def __len__(self) -> int:
        return len(self.violations)

    def __str__(self) -> str:
        return "; ".join(f"{v.kind}: {v.detail}" for v in self.violations) or "ok"


def validate(model: LtsModel) -> ValidationReport:
    out: list[Violation] = []
    if not model.states:
        out.append(Violation("empty", "model has no states"))
    if model.initial not in model.states:
        out.append(Violation("bad-initial", f"initial state {model.initial!r} not in states"))
    for t in model.transitions:
        for end in (t.source, t.target):
            if end not in model.states:
                out.append(Violation("dangling", f"{t.source} -> {t.target} : {t.label} ({end!r} unknown)"))
        if t.label not in model.labels:
            out.append(Violation("unknown-label", f"label {t.label!r} not in label set"))
    if model.initial in model.states:
        unreachable = sorted(model.states - model.reachable())
        for s in unreachable:
            out.append(Violation("unreachable", f"state {s!r} unreachable from initial"))
    for label in sorted(model.labels):
        if label_kind(label) is None:
            out.append(Violation("unknown-prefix", f"label {label!r} has no S/R/C prefix", warning=True))
    return ValidationReport(tuple(out))


def require_valid(model: LtsModel) -> None:
    report = validate(model)
    if not report.ok:
        raise ModelError(f"invalid model: {report}", report)


# ---------------------------------------------------------------- profiling


@dataclass(frozen=True)
class StructuralProfile:
    branch_states: frozenset[str]
    join_states: frozenset[str]
    loop_transitions: frozenset[Transition]
    max_depth: int

    @property
    def counts(self) -> tuple[int, int, int, int]:
        return (len(self.branch_states), len(self.join_states), len(self.loop_transitions), self.max_depth)


def back_edges(model: LtsModel) -> list[Transition]:
    """Transitions whose target is on the DFS stack, visiting children in
    declaration order.  Iterative to survive deep models."""
    on_stack: set[str] = set()
    visited: set[str] = set()
    loops: list[Transition] = []
    visited.add(model.initial)
    on_stack.add(model.initial)
    stack: list[tuple[str, Iterator[Transition]]] = [(model.initial, iter(model.outgoing(model.initial)))]
    while stack:
        state, children = stack[-1]
        t = next(children, None)
        if t is None:
            stack.pop()
            on_stack.discard(state)
            continue
        if t.target in on_stack:
            loops.append(t)
        elif t.target not in visited:
            visited.add(t.target)
            on_stack.add(t.target)
            stack.append((t.target, iter(model.outgoing(t.target))))
    return loops


def longest_simple_path(model: LtsModel) -> int:
    """Transition count of the longest path from initial repeating no state.

    Exhaustive DFS; the cost is the number of simple paths, which stays small
    for the use-case shaped models handled here.
    """
    best = 0
    on_path = {model.initial}
    stack: list[tuple[str, int, Iterator[Transition]]] = [
        (model.initial, 0, iter(model.outgoing(model.initial)))
    ]
    while stack:
        state, depth, children = stack[-1]
        if depth > best:
            best = depth
        t = next(children, None)
        if t is None:
            stack.pop()
            on_path.discard(state)
            continue
        if t.target in on_path:
            continue
        on_path.add(t.target)
        stack.append((t.target, depth + 1, iter(model.outgoing(t.target))))
    return best


def profile(model: LtsModel) -> StructuralProfile:
    require_valid(model)
    branches = frozenset(s for s in model.states if len(model.outgoing(s)) > 1)
    joins = frozenset(s for s in model.states if len(model.incoming(s)) > 1)
    return StructuralProfile(
        branch_states=branches,
        join_states=joins,
        loop_transitions=frozenset(back_edges(model)),
        max_depth=longest_simple_path(model),
    )


# ---------------------------------------------------------------- file formats


def parse_text(text: str) -> LtsModel:
    initial: str | None = None
    transitions: list[Transition] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if initial is None:
            key, sep, value = line.partition(":")
            if not sep or key.strip() != "initial" or not value.strip():
                raise ModelError(f"line {lineno}: expected 'initial: <state-id>'")
            initial = value.strip()
            continue
        head, sep, label = line.partition(":")
        src, arrow, dst = head.partition("->")
        if not sep or not arrow or not src.strip() or not dst.strip() or not label.strip():
            raise ModelError(f"line {lineno}: expected '<source> -> <target> : <label>'")
        transitions.append(Transition(src.strip(), label.strip(), dst.strip()))
    if initial is None:
        raise ModelError("missing 'initial:' line")
    return LtsModel.from_transitions(initial, transitions)


def to_text(model: LtsModel) -> str:
    lines = [f"initial: {model.initial}"]
    lines += [f"{t.source} -> {t.target} : {t.label}" for t in model.transitions]
    # isolated states cannot be expressed in the line format
    return "\n".join(lines) + "\n"


def to_dict(model: LtsModel) -> dict:
    return {
        "initial": model.initial,
        "states": sorted(model.states),
        "transitions": [{"source": t.source, "label": t.label, "target": t.target} for t in model.transitions],
    }


def from_dict(doc: dict) -> LtsModel:
    try:
        trans = [Transition(t["source"], t["label"], t["target"]) for t in doc["transitions"]]
        states = frozenset(doc.get("states") or ())
        base = LtsModel.from_transitions(doc["initial"], trans)
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model document: {exc}") from exc
    if states:
        # keep the declared state set so dangling endpoints surface in validate()
        return LtsModel(states=states, labels=base.labels, transitions=base.transitions, initial=base.initial)
    return base


def load(path: str | Path) -> LtsModel:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        try:
            return from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: {exc}") from exc
    return parse_text(text)


def save(model: LtsModel, path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(to_dict(model), indent=2) + "\n", encoding="utf-8", newline="\n")
    else:
        path.write_text(to_text(model), encoding="utf-8", newline="\n")


def login_model() -> LtsModel:
    """The bundled login/password use-case model."""
    from importlib.resources import files

    return parse_text(files("mbtcp.data").joinpath("login.lts").read_text(encoding="utf-8"))
