"""APFD, the Vargha-Delaney A12 effect size and the Kruskal-Wallis H test."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.special import gammaincc
from scipy.stats import rankdata

from .faults import FaultReport
from .prioritizers import PrioritizedOrder


class ApfdError(ValueError):
    pass


@dataclass(frozen=True)
class ApfdValue:
    value: float
    n: int
    m: int
    first_reveal_positions: tuple[int, ...]

    def __float__(self) -> float:
        return self.value


def apfd(order: PrioritizedOrder | Sequence[str], faults: FaultReport, n: int | None = None) -> ApfdValue:
    """APFD = 1 - sum(TF_i) / (n m) + 1 / (2n).

    Faults with no revealing test inside the ordered suite are left out of m.
    """
    ids = order.order if isinstance(order, PrioritizedOrder) else tuple(order)
    if n is None:
        n = len(ids)
    if len(ids) != n or len(set(ids)) != n:
        raise ApfdError(f"order is not a permutation of {n} test cases")
    position = {tid: i for i, tid in enumerate(ids, 1)}
    tf = []
    for tests in faults.faults.values():
        hits = [position[t] for t in tests if t in position]
        if hits:
            tf.append(min(hits))
    if not tf:
        raise ApfdError("no fault is revealed by any test in the order")
    m = len(tf)
    value = 1 - sum(tf) / (n * m) + 1 / (2 * n)
    return ApfdValue(value, n, m, tuple(tf))


# ---------------------------------------------------------------- effect size


class EffectCategory(str, Enum):
    LARGE = "Large"
    MEDIUM = "Medium"
    SMALL = "Small"


def effect_category(a: float) -> EffectCategory:
    if a > 0.71 or a < 0.29:
        return EffectCategory.LARGE
    if a > 0.64 or a < 0.36:
        return EffectCategory.MEDIUM
    return EffectCategory.SMALL


@dataclass(frozen=True)
class EffectSize:
    a12: float
    category: EffectCategory


def a12(sample1: Sequence[float], sample2: Sequence[float]) -> EffectSize:
    """Probability that a draw from sample1 exceeds one from sample2, ties
    counting one half.  Computed from mid-ranks of the pooled data, which
    keeps twice the pair count an exact integer."""
    x = np.asarray(sample1, dtype=float)
    y = np.asarray(sample2, dtype=float)
    if not len(x) or not len(y):
        raise ValueError("a12 needs two non-empty samples")
    ranks = rankdata(np.concatenate([x, y]))
    n1, n2 = len(x), len(y)
    twice_u = int(round(2 * ranks[:n1].sum())) - n1 * (n1 + 1)
    value = twice_u / (2 * n1 * n2)
    return EffectSize(value, effect_category(value))


# ---------------------------------------------------------------- Kruskal-Wallis


@dataclass(frozen=True)
class KruskalWallisResult:
    h_statistic: float
    degrees_of_freedom: int
    p_value: float


def kruskal_wallis(samples: Sequence[Sequence[float]]) -> KruskalWallisResult:
    groups = [np.asarray(s, dtype=float) for s in samples]
    if len(groups) < 2:
        raise ValueError("Kruskal-Wallis needs at least two groups")
    if any(len(g) == 0 for g in groups):
        raise ValueError("every group must be non-empty")
    pooled = np.concatenate(groups)
    total = len(pooled)
    ranks = rankdata(pooled)
    h = 0.0
    start = 0
    for g in groups:
        r = ranks[start : start + len(g)]
        h += r.sum() ** 2 / len(g)
        start += len(g)
    h = 12.0 / (total * (total + 1)) * h - 3 * (total + 1)
    _, counts = np.unique(pooled, return_counts=True)
    correction = 1 - (counts**3 - counts).sum() / (total**3 - total)
    df = len(groups) - 1
    if correction == 0:
        # every observation tied: no evidence against equality
        return KruskalWallisResult(0.0, df, 1.0)
    h = max(h / correction, 0.0)
    return KruskalWallisResult(float(h), df, float(gammaincc(df / 2, h / 2)))
