"""Synthetic LTS generator with controlled branch, join and loop counts.

Starting from a backbone chain, three edits are applied in a shuffled order:

* branch: a state with a single way out gains an alternative sub-chain that
  ends in a fresh sink;
* join: the tail of a still-dangling sub-chain is redirected into an existing,
  strictly deeper state that had a single way in;
* loop: a sink gains a back-edge to one of its dominators.

Each edit moves exactly one profile count, so the quotas are met by
construction; the finished model is still measured with ``lts.profile`` and
the build is retried under a derived seed if anything slipped.
"""

from __future__ import annotations

import logging
import math
import random
import warnings
from dataclasses import dataclass

import networkx as nx

from .lts import LtsModel, Transition, profile, validate

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 50


class InfeasibleConfig(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    branches: int = 30
    joins: int = 15
    loops: int = 1
    max_depth: int = 25
    seed: int = 0

    def __post_init__(self):
        if min(self.branches, self.joins, self.loops) < 0:
            raise ValueError("counts must be non-negative")
        if self.joins > self.branches:
            raise ValueError("joins must not exceed branches")
        if self.max_depth < 2:
            raise ValueError("max_depth must be >= 2")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


class _Builder:
    def __init__(self, cfg: SynthConfig, rng: random.Random):
        self.cfg = cfg
        self.rng = rng
        self.n = 0
        self.succ: dict[str, list[str]] = {}
        self.pred: dict[str, list[str]] = {}
        self.loops: list[tuple[str, str]] = []
        self.order: list[tuple[str, str]] = []  # declaration order of forward edges
        self.depth: dict[str, int] = {}
        self.dangling: list[tuple[str, list[str]]] = []

    def new_state(self, depth: int) -> str:
        s = f"q{self.n}"
        self.n += 1
        self.succ[s] = []
        self.pred[s] = []
        self.depth[s] = depth
        return s

    def add_edge(self, a: str, b: str) -> None:
        self.succ[a].append(b)
        self.pred[b].append(a)
        self.order.append((a, b))

    def out_degree(self, s: str) -> int:
        return len(self.succ[s]) + sum(1 for x, _ in self.loops if x == s)

    def in_degree(self, s: str) -> int:
        return len(self.pred[s]) + sum(1 for _, a in self.loops if a == s)

    def height(self, s: str, memo: dict[str, int]) -> int:
        if s not in memo:
            memo[s] = max((1 + self.height(c, memo) for c in self.succ[s]), default=0)
        return memo[s]

    def dominators(self) -> dict[str, str]:
        g = nx.DiGraph(self.order)
        g.add_edges_from(self.loops)
        g.add_node("q0")
        return nx.immediate_dominators(g, "q0")

    def loops_intact(self) -> bool:
        if not self.loops:
            return True
        idom = self.dominators()
        return all(a in _dominator_chain(idom, x) for x, a in self.loops)

    # --- edits

    def branch(self) -> bool:
        md = self.cfg.max_depth
        cands = [s for s in self.succ if self.out_degree(s) == 1 and self.depth[s] < md]
        if not cands:
            return False
        v = self.rng.choice(cands)
        k = self.rng.randint(1, md - self.depth[v])
        chain = []
        prev = v
        for i in range(k):
            s = self.new_state(self.depth[v] + i + 1)
            self.add_edge(prev, s)
            chain.append(s)
            prev = s
        self.dangling.append((v, chain))
        return True

    def join(self) -> bool:
        usable = [
            (v, ch) for v, ch in self.dangling
            if self.out_degree(ch[-1]) == 0 and self.in_degree(ch[-1]) == 1
        ]
        self.rng.shuffle(usable)
        for v, chain in usable:
            tail = chain[-1]
            p = chain[-2] if len(chain) > 1 else v
            targets = [
                w for w in self.succ
                if w != tail and w != "q0"
                and self.depth[w] > self.depth[p]
                and self.in_degree(w) == 1
                and w not in self.succ[p]
            ]
            self.rng.shuffle(targets)
            for w in targets:
                self._redirect(p, tail, w)
                if self.loops_intact():
                    self.dangling.remove((v, chain))
                    self._drop(tail)
                    return True
                self._redirect(p, w, tail)
        return False

    def _redirect(self, p: str, old: str, new: str) -> None:
        i = self.succ[p].index(old)
        self.succ[p][i] = new
        self.pred[old].remove(p)
        self.pred[new].append(p)
        self.order[self.order.index((p, old))] = (p, new)

    def _drop(self, s: str) -> None:
        del self.succ[s], self.pred[s], self.depth[s]

    def loop(self, joins_left: int) -> tuple[bool, bool]:
        """Returns (applied, consumed_a_join)."""
        sinks = [s for s in self.succ if self.out_degree(s) == 0]
        if not sinks:
            return False, False
        idom = self.dominators()
        x = self.rng.choice(sinks)
        doms = [a for a in _dominator_chain(idom, x) if a != x]
        free = [a for a in doms if a == "q0" or self.in_degree(a) >= 2]
        costly = [a for a in doms if a != "q0" and self.in_degree(a) == 1] if joins_left > 0 else []
        a = self.rng.choice(free + costly)
        self.loops.append((x, a))
        self.dangling = [(v, ch) for v, ch in self.dangling if ch[-1] != x]
        return True, a in costly

    # --- output

    def model(self) -> LtsModel:
        branches = {s for s in self.succ if self.out_degree(s) > 1}
        transitions = []
        edges = [(a, b, False) for a, b in self.order] + [(x, a, True) for x, a in self.loops]
        for i, (a, b, _) in enumerate(edges, 1):
            if a in branches:
                label = f"C - Condition {i}"
            elif self.depth[a] % 2 == 0:
                label = f"S - Step {i}"
            else:
                label = f"R - Response {i}"
            transitions.append(Transition(a, label, b))
        return LtsModel.from_transitions("q0", transitions)


def _dominator_chain(idom: dict[str, str], s: str) -> list[str]:
    out = [s]
    while idom[s] != s:
        s = idom[s]
        out.append(s)
    return out


def _build(cfg: SynthConfig, rng: random.Random) -> LtsModel | None:
    b = _Builder(cfg, rng)
    length = rng.randint(math.ceil(cfg.max_depth / 2), cfg.max_depth)
    prev = b.new_state(0)
    for i in range(length):
        s = b.new_state(i + 1)
        b.add_edge(prev, s)
        prev = s

    queue = ["B"] * cfg.branches + ["J"] * cfg.joins + ["L"] * cfg.loops
    rng.shuffle(queue)
    stalled = 0
    while queue:
        op = queue.pop(0)
        if op == "B":
            done = b.branch()
        elif op == "J":
            done = b.join()
        else:
            done, consumed = b.loop(queue.count("J"))
            if consumed:
                queue.remove("J")
        if done:
            stalled = 0
        else:
            queue.append(op)
            stalled += 1
            if stalled > len(queue):
                return None
    return b.model()


def synthesize(config: SynthConfig) -> LtsModel:
    for attempt in range(MAX_ATTEMPTS):
        rng = random.Random(f"{config.seed}:{attempt}")
        model = _build(config, rng)
        if model is None:
            continue
        if not validate(model).ok:
            continue
        p = profile(model)
        if (len(p.branch_states), len(p.join_states), len(p.loop_transitions)) == (
            config.branches, config.joins, config.loops
        ) and p.max_depth <= config.max_depth:
            return model
        log.debug("attempt %d missed quotas: %s", attempt, p.counts)
    raise InfeasibleConfig(f"no model satisfying {config} after {MAX_ATTEMPTS} attempts")


def synthesize_batch(config: SynthConfig, count: int) -> list[LtsModel]:
    if count < 1:
        raise ValueError("count must be >= 1")
    models = [
        synthesize(SynthConfig(config.branches, config.joins, config.loops, config.max_depth,
                               (config.seed + i) % 2**64))
        for i in range(count)
    ]
    for i in range(count):
        for j in range(i + 1, count):
            if models[i] == models[j]:
                warnings.warn(f"synthesized models {i} and {j} are structurally identical")
    return models
