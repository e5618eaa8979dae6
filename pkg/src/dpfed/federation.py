"""Plan and run workflows shared by the command line and the benchmarks."""

from __future__ import annotations

import hashlib
import json
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .budget import BudgetLedger, BudgetPlan, Strategy
from .config import ConfigError, RunConfig
from .costmodel import CostProfile, PublicInfo, estimate_dag, model_plan_breakdown, realized_model_cost
from .execution import ExecutionResult, Policy, execute_dag
from .oracle import oracle_cardinalities
from .planner import make_plan, plan_baseline
from .relational import Database, QueryDag, build_dag
from .sensitivity import SensitivityConfig, propagate_sensitivity, tables_touched

SIMULATED_NOISE_NOTE = "simulated joint noise: drawn centrally, not by a multiparty protocol"


@dataclass
class Prepared:
    dag: QueryDag
    db: Database
    info: PublicInfo
    config: RunConfig
    query_id: str


def query_digest(query: Mapping) -> str:
    return hashlib.sha256(json.dumps(query, sort_keys=True).encode()).hexdigest()[:12]


def catalog_multiplicities(data_dir: str | Path | None) -> dict[str, int]:
    if data_dir is None:
        return {}
    path = Path(data_dir) / "catalog.json"
    if not path.exists():
        return {}
    return {k: int(v) for k, v in json.loads(path.read_text()).get("multiplicities", {}).items()}


def prepare(
    config: RunConfig, query: Mapping, db: Database, declared: Mapping[str, int] | None = None
) -> Prepared:
    """Bind the query to the database schemas and annotate sensitivities."""
    dag = build_dag(query, db.schemas)
    mult = {**(declared or {}), **config.multiplicities}
    dag = propagate_sensitivity(dag, SensitivityConfig(mult, db.table_sizes))
    info = PublicInfo.from_database(db, config.distinct)
    return Prepared(dag, db, info, config, config.query_id or query_digest(query))


def _plan_for(p: Prepared, strategy: Strategy, profile: CostProfile | None = None) -> BudgetPlan:
    cfg = p.config
    truth = oracle_cardinalities(p.dag, p.db) if strategy is Strategy.ORACLE else None
    return make_plan(
        strategy, p.dag, cfg.epsilon_perf, cfg.delta_perf, profile or cfg.profile, p.info, truth,
        cfg.grid_steps, cfg.epsilon_out, cfg.delta_out,
    )


def _plan_rows(p: Prepared, plan: BudgetPlan, profile: CostProfile) -> tuple[list[dict], float]:
    breakdown = {r.op_id: r for r in model_plan_breakdown(p.dag, plan, profile, p.info)}
    est = estimate_dag(p.dag, p.info)
    rows = []
    for op in p.dag.operators:
        e, d = plan.shares[op.op_id]
        r = breakdown.get(op.op_id)
        rows.append({
            "op_id": op.op_id,
            "kind": op.kind.value,
            "children": [c.op_id for c in op.children],
            "epsilon": e,
            "delta": d,
            "sensitivity": op.sensitivity,
            "estimate": est[op.op_id],
            "padded_size": r.padded if r else float(p.info.table_sizes[op.params["table"]]),
            "modeled_size": r.noisy if r else float(p.info.table_sizes[op.params["table"]]),
            "modeled_cost": r.total if r else 0.0,
        })
    return rows, sum(r.total for r in breakdown.values())


def plan_report(p: Prepared) -> dict:
    cfg = p.config
    plan = _plan_for(p, cfg.strategy)
    rows, total = _plan_rows(p, plan, cfg.profile)
    _, base = _plan_rows(p, plan_baseline(p.dag), cfg.profile)
    return {
        "query_id": p.query_id,
        "config": cfg.to_json(),
        "private": plan.private,
        "operators": rows,
        "totals": {
            "modeled_cost": total,
            "baseline_modeled_cost": base,
            "modeled_speedup": base / total if total else None,
        },
    }


def _execute(p: Prepared, plan: BudgetPlan, policy: Policy) -> ExecutionResult:
    return execute_dag(p.dag, p.db, plan, policy, p.config.seed, p.config.mparty)


def run_report(p: Prepared, ledger: BudgetLedger | None = None) -> dict:
    """Plan, charge the ledger, execute, and compare against the padded baseline.

    The charge happens before execution, so a refused query never runs.
    """
    cfg = p.config
    plan = _plan_for(p, cfg.strategy)
    tables = sorted(tables_touched(p.dag))
    charged: dict[str, list[float]] = {}
    if ledger is not None:
        ledger.charge(p.query_id, tables, cfg.epsilon, cfg.delta)
        charged = {t: [cfg.epsilon, cfg.delta] for t in tables}
    res = _execute(p, plan, cfg.policy)
    base = _execute(p, plan_baseline(p.dag, cfg.epsilon_out, cfg.delta_out), Policy.TRUE_ANSWER)

    rows, modeled_total = _plan_rows(p, plan, cfg.profile)
    traces = {t.op_id: t for t in res.trace.operators}
    for row in rows:
        t = traces.get(row["op_id"])
        if t is None:
            row.update(capacity_out=int(row["padded_size"]), reads=0, writes=0, sort_comparisons=0, realized_cost=0.0)
            continue
        row.update(
            capacity_in=list(t.capacity_in),
            padded_size=t.capacity_padded,
            noisy_size=t.noisy_c,
            capacity_out=t.capacity_out,
            reads=t.reads,
            writes=t.writes,
            sort_comparisons=t.sort_comparisons,
            realized_cost=t.cost(cfg.profile),
        )
        if cfg.debug:
            row["true_c"] = t.true_c
    realized = res.trace.cost(cfg.profile)
    base_cost = base.trace.cost(cfg.profile)
    io = res.trace.reads + res.trace.writes
    base_io = base.trace.reads + base.trace.writes
    report: dict[str, Any] = {
        "query_id": p.query_id,
        "config": cfg.to_json(),
        "private": plan.private,
        "tables": tables,
        "operators": rows,
        "totals": {
            "modeled_cost": modeled_total,
            "realized_cost": realized,
            "realized_model_cost": realized_model_cost(p.dag, res.trace, cfg.profile),
            "reads": res.trace.reads,
            "writes": res.trace.writes,
            "sort_comparisons": res.trace.sort_comparisons,
            "baseline_realized_cost": base_cost,
            "baseline_io": base_io,
            "speedup": base_cost / realized if realized else None,
            "io_speedup": base_io / io if io else None,
        },
        "ledger": {
            "charged": charged,
            "remaining": {t: list(ledger.available(t)) for t in tables} if ledger is not None else {},
        },
    }
    if cfg.policy is Policy.NOISY_ANSWER:
        report["output"] = {
            "columns": list(res.columns),
            "noisy_answer": res.noisy_answer,
            "noise_scale": res.output_scale,
            "note": SIMULATED_NOISE_NOTE,
        }
        if len(res.columns) > 1:
            report["output"]["groups"] = [list(r[:-1]) for r in res.rows]
    else:
        report["output"] = {"columns": list(res.columns), "rows": [list(r) for r in res.rows]}
    if cfg.debug:
        report["noise_draws"] = [
            {"op_id": o.op_id, "noise": o.noise, "noisy_c": o.noisy_c, "clamped": o.clamped}
            for o in res.outcomes
        ]
    return report


def open_ledger(cfg: RunConfig, path: str | Path | None = None) -> BudgetLedger | None:
    path = path or cfg.ledger
    if path is None:
        return None
    if not cfg.table_budgets and cfg.default_budget is None and not Path(path).exists():
        raise ConfigError("a new ledger needs table_budgets or default_budget")
    return BudgetLedger.open(path, cfg.table_budgets, cfg.default_budget)


def dumps(report: Mapping) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
