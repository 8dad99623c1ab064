"""Fault reports, single-failure injection by profile, and suite
classification by the size of the failing test cases."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np

from .testgen import TestCaseMetrics, TestSuite


class FaultReportError(ValueError):
    pass


@dataclass(frozen=True)
class FaultReport:
    """Maps each fault id to the ids of the test cases revealing it."""

    faults: Mapping[str, frozenset[str]]

    def __post_init__(self):
        frozen = {}
        for fid, tests in self.faults.items():
            tests = frozenset(tests)
            if not tests:
                raise FaultReportError(f"fault {fid!r} has no revealing test")
            frozen[str(fid)] = tests
        object.__setattr__(self, "faults", dict(sorted(frozen.items())))

    def __len__(self) -> int:
        return len(self.faults)

    @property
    def failing_tests(self) -> frozenset[str]:
        return frozenset().union(*self.faults.values()) if self.faults else frozenset()

    def check_against(self, suite: TestSuite) -> None:
        unknown = self.failing_tests - set(suite.ids)
        if unknown:
            raise FaultReportError(f"fault report references unknown tests: {sorted(unknown)}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fault_id", "test_id"])
        for fid, tests in self.faults.items():
            for tid in sorted(tests):
                w.writerow([fid, tid])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FaultReport":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["fault_id", "test_id"]:
            raise FaultReportError("fault report must start with header 'fault_id,test_id'")
        faults: dict[str, set[str]] = {}
        for lineno, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise FaultReportError(f"line {lineno}: expected 2 columns, got {len(row)}")
            faults.setdefault(row[0].strip(), set()).add(row[1].strip())
        return cls({k: frozenset(v) for k, v in faults.items()})


def load_faults(path: str | Path) -> FaultReport:
    return FaultReport.from_csv(Path(path).read_text(encoding="utf-8"))


def save_faults(report: FaultReport, path: str | Path) -> None:
    Path(path).write_text(report.to_csv(), encoding="utf-8", newline="\n")


class FailureProfile(str, Enum):
    LONG_TC = "LongTC"
    SHORT_TC = "ShortTC"
    MANY_BR = "ManyBR"
    FEW_BR = "FewBR"
    MANY_JOIN = "ManyJOIN"
    FEW_JOIN = "FewJOIN"
    ESSENTIAL = "Essential"


class SuiteSizeClass(str, Enum):
    LONG_TC = "LongTC"
    SHORT_TC = "ShortTC"
    CONSTANT_SIZE_TC = "ConstantSizeTC"
    MIXED = "Mixed"


class NoEssentialTest(FaultReportError):
    pass


def extremal_set(suite: TestSuite, metrics: Mapping[str, TestCaseMetrics], profile: FailureProfile) -> list[str]:
    """Test ids sharing the extreme value the profile asks for, in suite order."""
    profile = FailureProfile(profile)
    ids = suite.ids
    if profile is FailureProfile.ESSENTIAL:
        return [i for i in ids if metrics[i].essential]
    attr, pick = {
        FailureProfile.LONG_TC: ("size", max),
        FailureProfile.SHORT_TC: ("size", min),
        FailureProfile.MANY_BR: ("branch_count", max),
        FailureProfile.FEW_BR: ("branch_count", min),
        FailureProfile.MANY_JOIN: ("join_count", max),
        FailureProfile.FEW_JOIN: ("join_count", min),
    }[profile]
    values = {i: getattr(metrics[i], attr) for i in ids}
    target = pick(values.values())
    return [i for i in ids if values[i] == target]


def inject_failure(
    suite: TestSuite,
    metrics: Mapping[str, TestCaseMetrics],
    profile: FailureProfile | str,
    seed: int,
) -> FaultReport:
    missing = set(suite.ids) - set(metrics)
    if missing:
        raise ValueError(f"metrics missing for {sorted(missing)}")
    pool = extremal_set(suite, metrics, FailureProfile(profile))
    if not pool:
        raise NoEssentialTest(f"suite {suite.name!r} has no essential test case")
    rng = np.random.default_rng(seed)
    chosen = pool[int(rng.integers(len(pool)))]
    return FaultReport({"F1": frozenset([chosen])})


def classify_suite(suite: TestSuite, faults: FaultReport) -> SuiteSizeClass:
    if not faults.faults:
        raise FaultReportError("cannot classify a suite with an empty fault report")
    faults.check_against(suite)
    sizes = {tc.id: tc.size for tc in suite}
    if len(set(sizes.values())) == 1:
        return SuiteSizeClass.CONSTANT_SIZE_TC
    # size > mean  <=>  size * n > total, kept in integers
    n = len(sizes)
    total = sum(sizes.values())
    failing = [sizes[t] * n for t in faults.failing_tests]
    if all(s > total for s in failing):
        return SuiteSizeClass.LONG_TC
    if all(s < total for s in failing):
        return SuiteSizeClass.SHORT_TC
    return SuiteSizeClass.MIXED


def is_biased(suite: TestSuite, faults: FaultReport) -> bool:
    """One test that fails, or two tests of which one fails: the ordering
    cannot tell a good technique from luck."""
    failing = len(faults.failing_tests & set(suite.ids))
    return (len(suite) == 1 and failing == 1) or (len(suite) == 2 and failing == 1)
