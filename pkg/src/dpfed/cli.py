"""``dpfed`` command line: plan, run, bench, gen and ledger show."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .budget import BudgetLedger, InsufficientBudget
from .config import ConfigError, RunConfig
from .federation import catalog_multiplicities, dumps, open_ledger, plan_report, prepare, run_report
from .planner import PlanningError
from .relational import DagError, SchemaError, load_database
from .sensitivity import SensitivityError
from .synthetic import InfeasibleSpec, gen_synthetic, health_spec, write_partitions


def _emit(doc: dict, out: str | None) -> None:
    text = dumps(doc)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load(args) -> tuple[RunConfig, dict]:
    cfg = RunConfig.load(args.config, debug=True if args.debug else None)
    if not args.query:
        raise ConfigError("--query is required")
    return cfg, json.loads(Path(args.query).read_text())


def _prepared(args):
    cfg, query = _load(args)
    if not args.data:
        raise ConfigError("--data is required")
    return prepare(cfg, query, load_database(args.data), catalog_multiplicities(args.data))


def cmd_plan(args) -> int:
    _emit(plan_report(_prepared(args)), args.out)
    return 0


def cmd_run(args) -> int:
    p = _prepared(args)
    report = run_report(p, open_ledger(p.config, args.ledger))
    _emit(report, args.out)
    return 0


def cmd_bench(args) -> int:
    from .bench import bench_report

    cfg = RunConfig.load(args.config, debug=True if args.debug else None)
    queries = None
    if args.query:
        doc = json.loads(Path(args.query).read_text())
        queries = doc["queries"] if "queries" in doc else {Path(args.query).stem: doc}
    db = load_database(args.data) if args.data else None
    _emit(bench_report(cfg, queries, db, catalog_multiplicities(args.data)), args.out)
    return 0


def cmd_gen(args) -> int:
    spec = json.loads(Path(args.config).read_text()) if args.config else health_spec()
    if not args.out:
        raise ConfigError("gen needs --out <dir>")
    db, catalog = gen_synthetic(spec)
    files = write_partitions(db, catalog, args.out)
    _emit({"files": [str(f) for f in files], "multiplicities": catalog["multiplicities"]}, None)
    return 0


def cmd_ledger_show(args) -> int:
    path = args.ledger
    if path is None and args.config:
        path = RunConfig.load(args.config).ledger
    if path is None or not Path(path).exists():
        raise ConfigError("no ledger file: pass --ledger or set 'ledger' in the config")
    led = BudgetLedger.open(path)
    _emit({
        "remaining": led.snapshot(),
        "charges": [c.to_json() for c in led.log],
        "replay_matches": led.replay() == led.remaining,
    }, args.out)
    return 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run config JSON (for gen: a generation spec)")
    p.add_argument("--query", help="query DAG JSON")
    p.add_argument("--data", help="directory of <table>/owner_<k>.csv partitions")
    p.add_argument("--out", help="output path (gen: output directory)")
    p.add_argument("--ledger", help="ledger JSON-lines file, overriding the config")
    p.add_argument("--debug", action="store_true", help="include true cardinalities in reports")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpfed", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (
        ("plan", cmd_plan, "allocate the performance budget and print modeled costs"),
        ("run", cmd_run, "charge the ledger, execute and report I/O"),
        ("bench", cmd_bench, "compare strategies and profiles against the baseline"),
        ("gen", cmd_gen, "write synthetic CSV partitions"),
    ):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.set_defaults(func=fn)
    led = sub.add_parser("ledger", help="inspect the privacy ledger")
    led_sub = led.add_subparsers(dest="ledger_command", required=True)
    show = led_sub.add_parser("show", help="remaining budgets and the charge log")
    _common(show)
    show.set_defaults(func=cmd_ledger_show)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InsufficientBudget as e:
        print(f"refused: {e}", file=sys.stderr)
        return 3
    except (ConfigError, DagError, SchemaError, SensitivityError, PlanningError, InfeasibleSpec,
            FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
