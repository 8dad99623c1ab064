"""Experiment orchestration for both study designs, plus the analysis of
their long-format results.

Original design: synthetic models, one injected failure per (model, profile,
repetition), every technique run on each.  Replication design: fixed suites
with real fault reports, every technique repeated per suite, rows annotated
with the suite's size class.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from .faults import (
    FailureProfile,
    NoEssentialTest,
    classify_suite,
    inject_failure,
    is_biased,
    load_faults,
)
from .prioritizers import TECHNIQUES, SuiteIndex, prioritize
from .stats import a12, apfd, kruskal_wallis
from .synth import SynthConfig, synthesize_batch
from .testgen import generate, load_suite, metrics

log = logging.getLogger(__name__)

RESULT_HEADER = ["object", "group", "technique", "repetition", "seed", "apfd"]


class ConfigError(ValueError):
    pass


def cell_seed(base_seed: int, object_id: str, technique: str, repetition: int) -> int:
    """Stable 64-bit seed for one experiment cell."""
    key = f"{base_seed}\x1f{object_id}\x1f{technique}\x1f{repetition}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big")


@dataclass(frozen=True)
class ExperimentConfig:
    design: str = "original"  # original | replication
    techniques: tuple[str, ...] = TECHNIQUES
    repetitions: int | None = None  # 30 for original, 1000 for replication
    base_seed: int = 0
    loop_bound: int = 2
    # original design
    synth: SynthConfig = field(default_factory=SynthConfig)
    model_count: int = 10
    profiles: tuple[str, ...] = tuple(p.value for p in FailureProfile)
    # replication design: (suite file, fault report file)
    pairs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "techniques", tuple(self.techniques))
        if self.repetitions is None:
            object.__setattr__(self, "repetitions", 1000 if self.design == "replication" else 30)
        object.__setattr__(self, "profiles", tuple(FailureProfile(p).value for p in self.profiles))
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        if self.design not in ("original", "replication"):
            raise ConfigError(f"design must be 'original' or 'replication', not {self.design!r}")
        if not self.techniques:
            raise ConfigError("at least one technique is required")
        bad = [t for t in self.techniques if t not in TECHNIQUES]
        if bad:
            raise ConfigError(f"unknown techniques {bad}; valid: {', '.join(TECHNIQUES)}")
        if self.repetitions < 1 or self.loop_bound < 1 or self.model_count < 1:
            raise ConfigError("repetitions, loop_bound and model_count must be >= 1")
        if self.design == "replication" and not self.pairs:
            raise ConfigError("replication design needs at least one (suite, faults) pair")

    @classmethod
    def from_mapping(cls, doc: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        doc = dict(doc)
        base_dir = Path(base_dir)
        if "synth" in doc:
            doc["synth"] = SynthConfig(**doc["synth"])
        if "pairs" in doc:
            pairs = []
            for p in doc["pairs"]:
                suite, faults = (p["suite"], p["faults"]) if isinstance(p, dict) else p
                pairs.append((str(base_dir / suite), str(base_dir / faults)))
            doc["pairs"] = pairs
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: expected a mapping at top level")
        return cls.from_mapping(doc, path.parent)


@dataclass(frozen=True)
class ResultRow:
    object: str
    group: str
    technique: str
    repetition: int
    seed: int
    apfd: float


@dataclass
class ExperimentResult:
    rows: list[ResultRow]
    skipped: list[str] = field(default_factory=list)

    def sort(self) -> None:
        rank = {t: i for i, t in enumerate(TECHNIQUES)}
        self.rows.sort(key=lambda r: (r.object, r.group, rank.get(r.technique, len(rank)), r.repetition))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        for r in self.rows:
            w.writerow([r.object, r.group, r.technique, r.repetition, r.seed, f"{r.apfd:.6f}"])
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8", newline="\n")

    @classmethod
    def from_csv(cls, text: str) -> "ExperimentResult":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != RESULT_HEADER:
            raise ConfigError(f"results must have header {','.join(RESULT_HEADER)}")
        rows = [
            ResultRow(r["object"], r["group"], r["technique"], int(r["repetition"]), int(r["seed"]), float(r["apfd"]))
            for r in reader
        ]
        return cls(rows)

    @classmethod
    def read_csv(cls, path: str | Path) -> "ExperimentResult":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------- runners


def _run_techniques(idx, object_id, group, key, techniques, repetitions, base_seed, faults_for):
    rows = []
    for technique in techniques:
        for rep in range(repetitions):
            seed = cell_seed(base_seed, key, technique, rep)
            faults = faults_for(rep)
            order = prioritize(technique, idx, seed, faults=faults)
            rows.append(ResultRow(object_id, group, technique, rep, seed, apfd(order, faults, idx.n).value))
    return rows


def run_replication(config: ExperimentConfig) -> ExperimentResult:
    if config.design != "replication":
        raise ConfigError("run_replication needs a replication config")
    result = ExperimentResult([])
    seen: set[str] = set()
    for suite_path, fault_path in config.pairs:
        suite = load_suite(suite_path)
        faults = load_faults(fault_path)
        faults.check_against(suite)
        object_id = suite.name
        k = 2
        while object_id in seen:
            object_id = f"{suite.name}#{k}"
            k += 1
        seen.add(object_id)
        if is_biased(suite, faults):
            log.warning("skipping %s: too few test cases to tell ordering from luck", object_id)
            result.skipped.append(object_id)
            continue
        group = classify_suite(suite, faults).value
        idx = SuiteIndex(suite)
        result.rows += _run_techniques(
            idx, object_id, group, object_id, config.techniques, config.repetitions,
            config.base_seed, lambda rep: faults,
        )
    result.sort()
    return result


def _original_object(args) -> tuple[list[ResultRow], list[str]]:
    config, object_id, model = args
    suite = generate(model, config.loop_bound, name=object_id)
    per_test = metrics(suite, model)
    idx = SuiteIndex(suite, model)
    rows: list[ResultRow] = []
    skipped: list[str] = []
    for prof in config.profiles:
        key = f"{object_id}/{prof}"
        try:
            reports = [
                inject_failure(suite, per_test, prof, cell_seed(config.base_seed, key, "inject", rep))
                for rep in range(config.repetitions)
            ]
        except NoEssentialTest:
            log.warning("skipping %s: no essential test case", key)
            skipped.append(key)
            continue
        rows += _run_techniques(
            idx, object_id, prof, key, config.techniques, config.repetitions,
            config.base_seed, reports.__getitem__,
        )
    return rows, skipped


def run_original(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    if config.design != "original":
        raise ConfigError("run_original needs an original-design config")
    models = synthesize_batch(config.synth, config.model_count)
    width = len(str(config.model_count))
    jobs = [(config, f"M{i:0{width}d}", m) for i, m in enumerate(models, 1)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_original_object, jobs))
    else:
        parts = [_original_object(j) for j in jobs]
    result = ExperimentResult([r for rows, _ in parts for r in rows], [s for _, sk in parts for s in sk])
    result.sort()
    return result


def run(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    if config.design == "original":
        return run_original(config, workers)
    return run_replication(config)


# ---------------------------------------------------------------- analysis


@dataclass
class AnalysisBundle:
    summary: list[dict]
    kruskal: list[dict]
    a12_matrix: list[dict]
    a12_short_long: list[dict]
    report: str

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_table(out / "summary.csv", self.summary,
                     ["technique", "scope", "n", "min", "q1", "median", "q3", "max", "mean"])
        _write_table(out / "kruskal.csv", self.kruskal, ["scope", "groups", "h", "df", "p_value"])
        _write_table(out / "a12_matrix.csv", self.a12_matrix, ["tech_a", "tech_b", "a12", "category"])
        _write_table(out / "a12_short_long.csv", self.a12_short_long, ["technique", "a12", "category"])
        (out / "report.txt").write_text(self.report, encoding="utf-8", newline="\n")


def _fmt(v):
    return f"{v:.6f}" if isinstance(v, float) else v


def _write_table(path: Path, rows: list[dict], header: list[str]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r[h]) for h in header])
    path.write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def _five_numbers(values: Sequence[float]) -> dict:
    v = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"n": len(v), "min": float(v.min()), "q1": float(q1), "median": float(med),
            "q3": float(q3), "max": float(v.max()), "mean": float(v.mean())}


def _by(rows: Iterable[ResultRow], *keys: str) -> dict[tuple, list[float]]:
    out: dict[tuple, list[float]] = {}
    for r in rows:
        out.setdefault(tuple(getattr(r, k) for k in keys), []).append(r.apfd)
    return out


def analyze(result: ExperimentResult, exclude: Sequence[str] = ("Opt",)) -> AnalysisBundle:
    """Boxplot numbers, Kruskal-Wallis over techniques, pairwise A12 and the
    per-technique A12 of LongTC against ShortTC rows.

    Techniques in ``exclude`` still get summaries but are left out of the
    hypothesis test and effect-size tables.
    """
    if not result.rows:
        raise ValueError("empty result")
    rank = {t: i for i, t in enumerate(TECHNIQUES)}
    techniques = sorted({r.technique for r in result.rows}, key=lambda t: rank.get(t, len(rank)))
    compared = [t for t in techniques if t not in exclude]

    summary = []
    by_tech = _by(result.rows, "technique")
    by_tech_obj = _by(result.rows, "technique", "object")
    objects = sorted({r.object for r in result.rows})
    for t in techniques:
        summary.append({"technique": t, "scope": "ALL", **_five_numbers(by_tech[(t,)])})
        for o in objects:
            if (t, o) in by_tech_obj:
                summary.append({"technique": t, "scope": o, **_five_numbers(by_tech_obj[(t, o)])})

    kruskal = []
    for scope in ["ALL", *objects]:
        if scope == "ALL":
            groups = [by_tech[(t,)] for t in compared]
        else:
            groups = [by_tech_obj[(t, scope)] for t in compared if (t, scope) in by_tech_obj]
        if len(groups) < 2:
            kruskal.append({"scope": scope, "groups": len(groups), "h": "unavailable", "df": "", "p_value": ""})
            continue
        kw = kruskal_wallis(groups)
        kruskal.append({"scope": scope, "groups": len(groups), "h": kw.h_statistic,
                        "df": kw.degrees_of_freedom, "p_value": kw.p_value})

    matrix = []
    for i, ta in enumerate(compared):
        for tb in compared[i + 1:]:
            es = a12(by_tech[(ta,)], by_tech[(tb,)])
            matrix.append({"tech_a": ta, "tech_b": tb, "a12": es.a12, "category": es.category.value})

    by_tech_group = _by(result.rows, "technique", "group")
    short_long = []
    for t in compared:
        long_ = by_tech_group.get((t, "LongTC"))
        short = by_tech_group.get((t, "ShortTC"))
        if not long_ or not short:
            short_long.append({"technique": t, "a12": "unavailable", "category": "unavailable"})
            continue
        es = a12(long_, short)
        short_long.append({"technique": t, "a12": es.a12, "category": es.category.value})

    lines = [f"rows: {len(result.rows)}; techniques: {', '.join(techniques)}"]
    overall = kruskal[0]
    if overall["h"] == "unavailable":
        lines.append("Kruskal-Wallis over techniques: unavailable (fewer than two techniques compared)")
    else:
        lines.append(f"Kruskal-Wallis over {overall['groups']} techniques: "
                     f"H = {overall['h']:.6f}, df = {overall['df']}, p = {overall['p_value']:.6g}")
    if matrix:
        lines.append("")
        lines.append("Pairwise A12 (row technique vs column technique):")
        lines += [f"  {m['tech_a']} vs {m['tech_b']}: {m['a12']:.6f} {m['category']}" for m in matrix]
    lines.append("")
    lines.append("A12 of LongTC against ShortTC per technique:")
    for s in short_long:
        if s["a12"] == "unavailable":
            lines.append(f"  {s['technique']}: unavailable")
        else:
            lines.append(f"  {s['technique']}: {s['a12']:.6f} {s['category']}")
    return AnalysisBundle(summary, kruskal, matrix, short_long, "\n".join(lines) + "\n")

