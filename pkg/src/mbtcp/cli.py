"""Command-line entry point.

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from . import lts
from .experiment import ConfigError, ExperimentConfig, ExperimentResult, analyze, run
from .faults import FailureProfile, FaultReportError, classify_suite, load_faults
from .prioritizers import TECHNIQUES, prioritize
from .stats import ApfdError, apfd
from .synth import InfeasibleConfig, SynthConfig, synthesize_batch
from .testgen import SuiteError, generate, load_suite, save_suite, suite_to_dict

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _technique(value: str) -> str:
    if value not in TECHNIQUES:
        raise argparse.ArgumentTypeError(f"unknown technique {value!r}; valid: {', '.join(TECHNIQUES)}")
    return value


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mbtcp", description="Model-based test case prioritization toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate random LTS models with a fixed structural profile")
    s.add_argument("--branches", type=int, default=30)
    s.add_argument("--joins", type=int, default=15)
    s.add_argument("--loops", type=int, default=1)
    s.add_argument("--max-depth", type=int, default=25)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=1, help="number of models (seeds seed, seed+1, ...)")
    s.add_argument("--out", help="output directory; model written to stdout when omitted and count is 1")
    s.add_argument("--format", choices=["lts", "json"], default="lts")

    g = sub.add_parser("gen", help="generate a test suite from an LTS file")
    g.add_argument("--lts", required=True, help="model file (.lts text or .json)")
    g.add_argument("--loop-bound", type=int, default=2)
    g.add_argument("--name", help="suite name (defaults to the model file stem)")
    g.add_argument("--out", help="suite JSON file; stdout when omitted")

    pr = sub.add_parser("prioritize", help="print a prioritized order, one test id per line")
    pr.add_argument("--suite", required=True)
    pr.add_argument("--technique", required=True, type=_technique, metavar="T",
                    help=f"one of: {', '.join(TECHNIQUES)}")
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--faults", help="fault report CSV (required for Opt)")
    pr.add_argument("--lts", help="model file used by FW for transition weights")

    a = sub.add_parser("apfd", help="APFD of an order against a fault report")
    a.add_argument("--order", required=True, help="file with one test id per line")
    a.add_argument("--faults", required=True)
    a.add_argument("--n", type=int, help="suite size (defaults to the order length)")

    c = sub.add_parser("classify", help="classify a suite as LongTC, ShortTC, ConstantSizeTC or Mixed")
    c.add_argument("--suite", required=True)
    c.add_argument("--faults", required=True)

    e = sub.add_parser("experiment", help="run an experiment and write results.csv")
    e.add_argument("--config", help="YAML config file; flags below override its values")
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--design", choices=["original", "replication"])
    e.add_argument("--repetitions", type=int)
    e.add_argument("--base-seed", type=int)
    e.add_argument("--models", type=int, dest="model_count")
    e.add_argument("--profiles", nargs="+", choices=[x.value for x in FailureProfile])
    e.add_argument("--techniques", nargs="+", type=_technique, metavar="T")
    e.add_argument("--paper-scale", action="store_true", help="31 models x 31 repetitions")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--analyze", action="store_true", help="also write the analysis tables")

    an = sub.add_parser("analyze", help="summaries, Kruskal-Wallis and A12 tables from a results CSV")
    an.add_argument("--results", required=True)
    an.add_argument("--out", required=True)
    return p


def _cmd_synth(args) -> int:
    try:
        cfg = SynthConfig(args.branches, args.joins, args.loops, args.max_depth, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    models = synthesize_batch(cfg, args.count)
    if args.out is None:
        if args.count != 1:
            raise UsageError("--out is required when --count > 1")
        m = models[0]
        sys.stdout.write(json.dumps(lts.to_dict(m), indent=2) + "\n" if args.format == "json" else lts.to_text(m))
        return EXIT_OK
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = len(str(args.count))
    for i, m in enumerate(models, 1):
        path = out / f"M{i:0{width}d}.{args.format}"
        lts.save(m, path)
        print(path)
    return EXIT_OK


def _cmd_gen(args) -> int:
    if args.loop_bound < 1:
        raise UsageError("--loop-bound must be >= 1")
    model = lts.load(args.lts)
    lts.require_valid(model)
    suite = generate(model, args.loop_bound, name=args.name or Path(args.lts).stem)
    if args.out:
        save_suite(suite, args.out)
    else:
        sys.stdout.write(json.dumps(suite_to_dict(suite), indent=2) + "\n")
    return EXIT_OK


def _cmd_prioritize(args) -> int:
    suite = load_suite(args.suite)
    faults = load_faults(args.faults) if args.faults else None
    if args.technique == "Opt" and faults is None:
        raise UsageError("Opt needs --faults")
    if faults is not None:
        faults.check_against(suite)
    model = lts.load(args.lts) if args.lts else None
    order = prioritize(args.technique, suite, args.seed, faults=faults, model=model)
    sys.stdout.write("".join(f"{t}\n" for t in order.order))
    return EXIT_OK


def _read_order(path: str) -> list[str]:
    return [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


def _cmd_apfd(args) -> int:
    value = apfd(_read_order(args.order), load_faults(args.faults), args.n)
    print(f"{value.value:.6f}")
    return EXIT_OK


def _cmd_classify(args) -> int:
    print(classify_suite(load_suite(args.suite), load_faults(args.faults)).value)
    return EXIT_OK


def _cmd_experiment(args) -> int:
    doc: dict = {}
    base_dir = Path(".")
    if args.config:
        doc = yaml.safe_load(Path(args.config).read_text(encoding="utf-8")) or {}
        if not isinstance(doc, dict):
            raise ConfigError(f"{args.config}: expected a mapping at top level")
        base_dir = Path(args.config).parent
    for key in ("design", "repetitions", "base_seed", "model_count", "profiles", "techniques"):
        value = getattr(args, key)
        if value is not None:
            doc[key] = value
    if args.paper_scale:
        doc["model_count"], doc["repetitions"] = 31, 31
    config = ExperimentConfig.from_mapping(doc, base_dir)
    result = run(config, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.write_csv(out / "results.csv")
    for s in result.skipped:
        print(f"skipped: {s}", file=sys.stderr)
    if args.analyze:
        analyze(result).write(out)
    print(out / "results.csv")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    bundle = analyze(ExperimentResult.read_csv(args.results))
    bundle.write(args.out)
    sys.stdout.write(bundle.report)
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth, "gen": _cmd_gen, "prioritize": _cmd_prioritize, "apfd": _cmd_apfd,
    "classify": _cmd_classify, "experiment": _cmd_experiment, "analyze": _cmd_analyze,
}

_DATA_ERRORS = (
    lts.ModelError, SuiteError, FaultReportError, ApfdError, ConfigError, InfeasibleConfig,
    OSError, yaml.YAMLError, ValueError,
)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"mbtcp {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"mbtcp {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
