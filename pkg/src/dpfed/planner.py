"""Splitting the performance budget across operators.

The optimal strategy searches the lattice of epsilon splits with step
``epsilon_perf / grid_steps`` and keeps the split with the lowest modeled
cost.  Every eligible operator gets ``delta_perf / l`` when it resizes.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from . import kernels
from .budget import BudgetPlan, Strategy
from .costmodel import KIND_CODES, CostProfile, PublicInfo, estimate_dag, model_plan_cost
from .noise import tlap_mean, tlap_new
from .relational import OpKind, QueryDag

DEFAULT_GRID_STEPS = 20
MAX_CANDIDATES = 2_000_000


class PlanningError(ValueError):
    pass


def eligible_ops(dag: QueryDag) -> list[int]:
    """Operators whose outputs may be resized: everything except scans."""
    return [op.op_id for op in dag.operators if op.kind is not OpKind.SCAN]


def _plan(dag, eps_by_op, dlt_by_op, epsilon_perf, delta_perf, strategy, epsilon_out, delta_out):
    shares = tuple((float(eps_by_op.get(i, 0.0)), float(dlt_by_op.get(i, 0.0))) for i in range(len(dag)))
    return BudgetPlan(shares, epsilon_perf, delta_perf, epsilon_out, delta_out, strategy)


def plan_baseline(dag: QueryDag, epsilon_out: float = 0.0, delta_out: float = 0.0) -> BudgetPlan:
    return BudgetPlan.zeros(len(dag), epsilon_out, delta_out)


def plan_eager(
    dag: QueryDag, epsilon_perf: float, delta_perf: float, epsilon_out: float = 0.0, delta_out: float = 0.0
) -> BudgetPlan:
    elig = eligible_ops(dag)
    if not elig or epsilon_perf == 0:
        return _plan(dag, {}, {}, epsilon_perf, delta_perf, Strategy.EAGER, epsilon_out, delta_out)
    first = elig[0]
    return _plan(
        dag, {first: epsilon_perf}, {first: delta_perf}, epsilon_perf, delta_perf, Strategy.EAGER,
        epsilon_out, delta_out,
    )


def plan_uniform(
    dag: QueryDag, epsilon_perf: float, delta_perf: float, epsilon_out: float = 0.0, delta_out: float = 0.0
) -> BudgetPlan:
    elig = eligible_ops(dag)
    if not elig or epsilon_perf == 0:
        return _plan(dag, {}, {}, epsilon_perf, delta_perf, Strategy.UNIFORM, epsilon_out, delta_out)
    e, d = epsilon_perf / len(elig), delta_perf / len(elig)
    return _plan(
        dag, dict.fromkeys(elig, e), dict.fromkeys(elig, d), epsilon_perf, delta_perf, Strategy.UNIFORM,
        epsilon_out, delta_out,
    )


@dataclass
class CostProgram:
    """The DAG flattened into the arrays the cost kernels consume."""

    kind: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    param: np.ndarray
    est: np.ndarray
    elig: np.ndarray
    mean_table: np.ndarray
    profile: np.ndarray
    coefs: np.ndarray

    def costs(self, steps: np.ndarray) -> np.ndarray:
        return kernels.plan_costs(
            self.kind, self.c0, self.c1, self.param, self.est, self.elig,
            self.mean_table, self.profile, self.coefs, np.ascontiguousarray(steps, dtype=np.int16),
        )


def compile_program(
    dag: QueryDag,
    profile: CostProfile,
    K: PublicInfo,
    epsilon_perf: float,
    delta_perf: float,
    grid_steps: int,
    estimates: Sequence[float] | None = None,
) -> CostProgram:
    est = np.asarray(estimates if estimates is not None else estimate_dag(dag, K), dtype=np.float64)
    elig_ids = eligible_ops(dag)
    n = len(dag)
    kind = np.array([KIND_CODES[op.kind] for op in dag.operators], dtype=np.int64)
    c0 = np.array([op.children[0].op_id if op.children else -1 for op in dag.operators], dtype=np.int64)
    c1 = np.array([op.children[1].op_id if len(op.children) > 1 else -1 for op in dag.operators], dtype=np.int64)
    param = np.zeros(n, dtype=np.float64)
    for op in dag.operators:
        if op.kind is OpKind.SCAN:
            param[op.op_id] = K.table_sizes[op.params["table"]]
        elif op.kind is OpKind.LIMIT:
            param[op.op_id] = op.params["k"]
    elig = np.full(n, -1, dtype=np.int64)
    elig[elig_ids] = np.arange(len(elig_ids))
    mean_table = np.zeros((len(elig_ids), grid_steps + 1), dtype=np.float64)
    if elig_ids and epsilon_perf > 0:
        d = delta_perf / len(elig_ids)
        for j, i in enumerate(elig_ids):
            sens = dag.operators[i].sensitivity
            if sens < 1:
                raise PlanningError(f"{dag.operators[i]!r} has no sensitivity")
            for s in range(1, grid_steps + 1):
                mean_table[j, s] = tlap_mean(tlap_new(s * epsilon_perf / grid_steps, d, sens))
    return CostProgram(kind, c0, c1, param, est, elig, mean_table, profile.codes, profile.coefs)


def lattice_steps(n_eligible: int, grid_steps: int, max_candidates: int = MAX_CANDIDATES) -> int:
    """Largest step count not above ``grid_steps`` whose lattice fits the cap."""
    k = grid_steps
    while k > 1 and math.comb(k + n_eligible - 1, n_eligible - 1) > max_candidates:
        k -= 1
    return k


def _search(
    dag, epsilon_perf, delta_perf, profile, K, grid_steps, estimates, strategy, epsilon_out, delta_out
) -> BudgetPlan:
    elig = eligible_ops(dag)
    if not elig or epsilon_perf == 0:
        return _plan(dag, {}, {}, epsilon_perf, delta_perf, strategy, epsilon_out, delta_out)
    steps_total = lattice_steps(len(elig), grid_steps)
    prog = compile_program(dag, profile, K, epsilon_perf, delta_perf, steps_total, estimates)
    lattice = kernels.compositions(steps_total, len(elig))
    lattice = np.vstack([np.zeros((1, len(elig)), dtype=np.int16), lattice])
    costs = prog.costs(lattice)
    best = lattice[int(np.argmin(costs))]
    step = epsilon_perf / steps_total
    d = delta_perf / len(elig)
    chosen = _plan(
        dag,
        {i: s * step for i, s in zip(elig, best.tolist()) if s > 0},
        {i: d for i, s in zip(elig, best.tolist()) if s > 0},
        epsilon_perf, delta_perf, strategy, epsilon_out, delta_out,
    )
    best_cost = model_plan_cost(dag, chosen, profile, K, estimates)
    # eager and uniform need not lie on the lattice; include them explicitly
    for alt in (
        plan_eager(dag, epsilon_perf, delta_perf, epsilon_out, delta_out),
        plan_uniform(dag, epsilon_perf, delta_perf, epsilon_out, delta_out),
    ):
        c = model_plan_cost(dag, alt, profile, K, estimates)
        if c < best_cost:
            chosen = BudgetPlan(alt.shares, epsilon_perf, delta_perf, epsilon_out, delta_out, strategy)
            best_cost = c
    return chosen


def plan_optimal(
    dag: QueryDag,
    epsilon_perf: float,
    delta_perf: float,
    profile: CostProfile,
    K: PublicInfo,
    grid_steps: int = DEFAULT_GRID_STEPS,
    epsilon_out: float = 0.0,
    delta_out: float = 0.0,
) -> BudgetPlan:
    return _search(
        dag, epsilon_perf, delta_perf, profile, K, grid_steps, None, Strategy.OPTIMAL, epsilon_out, delta_out
    )


def plan_oracle(
    dag: QueryDag,
    epsilon_perf: float,
    delta_perf: float,
    profile: CostProfile,
    K: PublicInfo,
    true_cardinalities: Sequence[int] | None,
    grid_steps: int = DEFAULT_GRID_STEPS,
    epsilon_out: float = 0.0,
    delta_out: float = 0.0,
) -> BudgetPlan:
    """Same search as :func:`plan_optimal`, fed the true cardinalities. Not private."""
    if true_cardinalities is None:
        raise PlanningError("the oracle strategy needs true cardinalities (debug mode)")
    return _search(
        dag, epsilon_perf, delta_perf, profile, K, grid_steps, [float(c) for c in true_cardinalities],
        Strategy.ORACLE, epsilon_out, delta_out,
    )


def make_plan(
    strategy: Strategy | str,
    dag: QueryDag,
    epsilon_perf: float,
    delta_perf: float,
    profile: CostProfile,
    K: PublicInfo,
    true_cardinalities: Sequence[int] | None = None,
    grid_steps: int = DEFAULT_GRID_STEPS,
    epsilon_out: float = 0.0,
    delta_out: float = 0.0,
) -> BudgetPlan:
    strategy = Strategy(strategy)
    if strategy is Strategy.BASELINE:
        return plan_baseline(dag, epsilon_out, delta_out)
    if strategy is Strategy.EAGER:
        return plan_eager(dag, epsilon_perf, delta_perf, epsilon_out, delta_out)
    if strategy is Strategy.UNIFORM:
        return plan_uniform(dag, epsilon_perf, delta_perf, epsilon_out, delta_out)
    if strategy is Strategy.OPTIMAL:
        return plan_optimal(dag, epsilon_perf, delta_perf, profile, K, grid_steps, epsilon_out, delta_out)
    return plan_oracle(
        dag, epsilon_perf, delta_perf, profile, K, true_cardinalities, grid_steps, epsilon_out, delta_out
    )
