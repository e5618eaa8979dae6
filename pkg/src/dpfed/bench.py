"""I/O-count comparison of budget strategies against the padded baseline."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from .budget import Strategy
from .config import RunConfig
from .costmodel import CostProfile, model_plan_cost
from .execution import Policy
from .federation import Prepared, _execute, _plan_for, prepare
from .planner import plan_baseline
from .relational import Database, OpKind
from .synthetic import WORKLOAD, chain_count, chain_multiplicities, chain_spec, gen_synthetic, health_spec

DEFAULT_STRATEGIES = ("eager", "uniform", "optimal")
DEFAULT_PROFILES = {
    "ram-log2": {"mode": "ram", "read": "log2", "write": "log2"},
    "circuit": {"mode": "circuit"},
}


def _cell(p: Prepared, strategy: Strategy, profile: CostProfile) -> dict:
    plan = _plan_for(p, strategy, profile)
    res = _execute(p, plan, Policy.TRUE_ANSWER)
    base = _execute(p, plan_baseline(p.dag), Policy.TRUE_ANSWER)
    cost, base_cost = res.trace.cost(profile), base.trace.cost(profile)
    io = res.trace.reads + res.trace.writes
    base_io = base.trace.reads + base.trace.writes
    return {
        "strategy": strategy.value,
        "modeled_cost": model_plan_cost(p.dag, plan, profile, p.info),
        "realized_cost": cost,
        "baseline_cost": base_cost,
        "speedup": base_cost / cost,
        "io": io,
        "baseline_io": base_io,
        "io_speedup": base_io / io,
        "final_capacity": res.trace.operators[-1].capacity_out if res.trace.operators else None,
    }


def bench_matrix(
    config: RunConfig,
    queries: Mapping[str, Mapping],
    db: Database,
    declared: Mapping[str, int] | None = None,
    strategies: Sequence[str] = DEFAULT_STRATEGIES,
    profiles: Mapping[str, Mapping] = DEFAULT_PROFILES,
    workers: int = 1,
) -> list[dict]:
    """One row per (query, strategy, profile)."""
    jobs = []
    for qname, q in sorted(queries.items()):
        p = prepare(config, q, db, declared)
        for pname, pdoc in sorted(profiles.items()):
            prof = CostProfile.from_config(pdoc)
            for s in strategies:
                jobs.append(({"query": qname, "profile": pname}, p, Strategy(s), prof))

    def run(job):
        tag, p, s, prof = job
        return {**tag, **_cell(p, s, prof)}

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(run, jobs))
    return [run(j) for j in jobs]


def join_scaling(
    config: RunConfig,
    tables: Sequence[int] = (1, 2, 3),
    n: int = 64,
    selectivity: float = 0.1,
    m: int = 2,
    strategy: str = "optimal",
) -> list[dict]:
    """Speedup over baseline for ``k``-table join chains, ``k - 1`` joins each."""
    out = []
    for k in tables:
        db, _ = gen_synthetic(chain_spec(k, n, selectivity, m))
        p = prepare(config, chain_count(k), db, chain_multiplicities(k, m))
        row = _cell(p, Strategy(strategy), config.profile)
        base = _execute(p, plan_baseline(p.dag), Policy.TRUE_ANSWER)
        row["tables"] = k
        row["joins"] = k - 1
        # the widest intermediate: the padded output of the last join, or the filter for k = 1
        widest = [t for t in base.trace.operators if p.dag.operators[t.op_id].kind is not OpKind.COUNT]
        row["baseline_max_capacity"] = max(t.capacity_out for t in widest)
        out.append(row)
    return out


def bench_report(
    config: RunConfig,
    queries: Mapping[str, Mapping] | None = None,
    db: Database | None = None,
    declared: Mapping[str, int] | None = None,
) -> dict:
    """Full benchmark: the workload matrix plus the join-scaling series.

    Without data, the health-shaped synthetic tables are generated from the
    ``bench`` section of the config (``n``, ``selectivity``, ``m``).
    """
    b = dict(config.bench)
    if db is None:
        db, catalog = gen_synthetic(
            health_spec(b.get("n", 256), b.get("selectivity", 0.1), b.get("m", 4), b.get("seed", 7))
        )
        declared = catalog["multiplicities"]
    if queries is None:
        queries = {name: f() for name, f in WORKLOAD.items() if name in b.get("queries", WORKLOAD)}
    cfg = replace(config, strategy=Strategy.OPTIMAL)
    matrix = bench_matrix(
        cfg, queries, db, declared, b.get("strategies", DEFAULT_STRATEGIES),
        b.get("profiles", DEFAULT_PROFILES), int(b.get("workers", 1)),
    )
    scaling = join_scaling(
        cfg, b.get("chain_tables", (1, 2, 3)), b.get("chain_n", 64), b.get("selectivity", 0.1),
        b.get("chain_m", 2),
    )
    return {"config": cfg.to_json(), "matrix": matrix, "join_scaling": scaling}
