import itertools
import math
import random

import pytest

from dpfed.budget import BudgetPlan, Strategy
from dpfed.costmodel import CostProfile, estimate_dag, model_plan_cost
from dpfed.oracle import oracle_cardinalities
from dpfed.planner import (
    PlanningError,
    eligible_ops,
    lattice_steps,
    make_plan,
    plan_eager,
    plan_optimal,
    plan_oracle,
    plan_uniform,
)
from dpfed.relational import OpKind, build_dag
from dpfed.sensitivity import SensitivityConfig, propagate_sensitivity
from dpfed.synthetic import (
    aspirin_count,
    dosage_study,
    eq,
    filt,
    gen_synthetic,
    join,
    running_example,
    scan,
    three_join,
    unary,
)

from conftest import annotate
from instances import declared_multiplicities, random_database, random_query

PROFILES = [CostProfile(), CostProfile(mode="circuit"), CostProfile(read="constant", write="linear-log2-squared")]


def nonscan_shares(dag, plan):
    return [plan.shares[i][0] for i in eligible_ops(dag)]


def test_eager(health):
    db, mult = health
    dag, _ = annotate(dosage_study(), db, mult)
    p = plan_eager(dag, 0.5, 5e-5)
    assert nonscan_shares(dag, p)[:3] == [0.5, 0, 0]
    assert p.shares[eligible_ops(dag)[0]][1] == 5e-5
    assert set(nonscan_shares(dag, plan_eager(dag, 0.0, 0.0))) == {0.0}


def test_uniform(health):
    db, mult = health
    dag, _ = annotate(running_example(), db, mult)
    assert len(eligible_ops(dag)) == 5
    p = plan_uniform(dag, 0.5, 5e-5)
    assert nonscan_shares(dag, p) == [0.1] * 5
    assert sum(p.epsilons) == pytest.approx(0.5, abs=1e-12)
    assert sum(d for _, d in p.shares) == pytest.approx(5e-5, rel=1e-12)


def test_single_eligible(health):
    db, mult = health
    dag, info = annotate(filt(scan("diagnosis"), eq("diag", "hd")), db, mult)
    e, u = plan_eager(dag, 0.5, 5e-5), plan_uniform(dag, 0.5, 5e-5)
    assert e.shares == u.shares
    o = plan_optimal(dag, 0.5, 5e-5, CostProfile(), info)
    # with nothing downstream to shrink, resizing only adds cost, so the zero split wins
    assert o.shares in (e.shares, tuple((0.0, 0.0) for _ in o.shares))
    assert model_plan_cost(dag, o, CostProfile(), info) <= model_plan_cost(dag, e, CostProfile(), info)


def test_no_eligible(health):
    db, mult = health
    dag, _ = annotate(scan("diagnosis"), db, mult)
    # a bare scan is never resized: every strategy returns the zero split
    for plan in (plan_eager(dag, 0.5, 5e-5), plan_uniform(dag, 0.5, 5e-5)):
        assert plan.shares == ((0.0, 0.0),)


@pytest.mark.parametrize("query", [aspirin_count, three_join, dosage_study])
@pytest.mark.parametrize("profile", PROFILES)
def test_dominance_on_fixtures(health, query, profile):
    db, mult = health
    dag, info = annotate(query(), db, mult)
    costs = {s: model_plan_cost(dag, make_plan(s, dag, 0.5, 5e-5, profile, info), profile, info)
             for s in ("eager", "uniform", "optimal")}
    assert costs["optimal"] <= min(costs["eager"], costs["uniform"])


def brute_force_optimum(dag, eps, delta, profile, info, steps, estimates=None):
    """Reference search: every composition of ``steps`` plus the zero split, costed in plain python."""
    elig = eligible_ops(dag)
    best = math.inf
    candidates = [c for c in itertools.product(range(steps + 1), repeat=len(elig)) if sum(c) in (0, steps)]
    for combo in candidates:
        shares = [(0.0, 0.0)] * len(dag)
        for i, s in zip(elig, combo):
            if s:
                shares[i] = (s * eps / steps, delta / len(elig))
        plan = BudgetPlan(tuple(shares), eps, delta, strategy=Strategy.OPTIMAL)
        best = min(best, model_plan_cost(dag, plan, profile, info, estimates))
    return best


@pytest.mark.parametrize("profile", PROFILES)
def test_lattice_search_matches_brute_force(health, profile):
    db, mult = health
    dag, info = annotate(dosage_study(), db, mult)
    steps = 6
    want = brute_force_optimum(dag, 0.5, 5e-5, profile, info, steps)
    got = model_plan_cost(dag, plan_optimal(dag, 0.5, 5e-5, profile, info, steps), profile, info)
    # eager and uniform are extra candidates, so the planner can only be better
    assert got <= want * (1 + 1e-9)
    assert got == pytest.approx(min(want, *(model_plan_cost(dag, p, profile, info) for p in (
        plan_eager(dag, 0.5, 5e-5), plan_uniform(dag, 0.5, 5e-5)))), rel=1e-9)


def test_later_join_gets_more_than_uniform():
    table = lambda n: {"rows": n, "key": "k", "key_multiplicity": 2,
                       "attributes": [{"name": "a", "values": 10, "target": "x", "selectivity": 0.1}]}
    db, cat = gen_synthetic({"seed": 1, "tables": {"t1": table(64), "t2": table(64), "t3": table(4096)}})
    weak = filt(scan("t1"), {"column": "a", "op": "!=", "value": "x"})
    q = unary("CountAggregate", join(join(weak, scan("t2"), "t1.k", "t2.k"), scan("t3"), "t1.k", "t3.k"))
    dag, info = annotate(q, db, cat["multiplicities"])
    first_join = next(op.op_id for op in dag.operators if op.kind is OpKind.EQUI_JOIN)
    opt = plan_optimal(dag, 0.5, 5e-5, CostProfile(), info)
    uni = plan_uniform(dag, 0.5, 5e-5)
    assert opt.shares[first_join][0] > uni.shares[first_join][0]
    assert opt.shares[first_join][0] > opt.shares[eligible_ops(dag)[0]][0]
    assert model_plan_cost(dag, opt, CostProfile(), info) == pytest.approx(
        brute_force_optimum(dag, 0.5, 5e-5, CostProfile(), info, 20), rel=1e-9)


def test_oracle(health):
    db, mult = health
    dag, info = annotate(aspirin_count(), db, mult)
    prof = CostProfile()
    with pytest.raises(PlanningError):
        plan_oracle(dag, 0.5, 5e-5, prof, info, None)
    est = estimate_dag(dag, info)
    assert plan_oracle(dag, 0.5, 5e-5, prof, info, est).shares == plan_optimal(dag, 0.5, 5e-5, prof, info).shares
    truth = oracle_cardinalities(dag, db)
    orc = plan_oracle(dag, 0.5, 5e-5, prof, info, truth)
    opt = plan_optimal(dag, 0.5, 5e-5, prof, info)
    assert not orc.private and opt.private
    assert model_plan_cost(dag, orc, prof, info, truth) <= model_plan_cost(dag, opt, prof, info, truth)


def test_feasibility_and_dominance_random():
    for seed in range(40):
        rnd = random.Random(seed)
        db = random_database(rnd)
        dag = build_dag(random_query(rnd), db.schemas)
        dag = propagate_sensitivity(dag, SensitivityConfig(declared_multiplicities(db), db.table_sizes))
        from dpfed.costmodel import PublicInfo

        info = PublicInfo.from_database(db)
        if not eligible_ops(dag):
            continue
        prof = PROFILES[seed % 3]
        costs = {}
        for s in ("eager", "uniform", "optimal", "oracle"):
            p = make_plan(s, dag, 0.5, 5e-5, prof, info, oracle_cardinalities(dag, db), grid_steps=8)
            assert sum(p.epsilons) <= 0.5 + 1e-9
            assert sum(d for _, d in p.shares) <= 5e-5 + 1e-15
            assert all(e >= 0 and d >= 0 for e, d in p.shares)
            assert all(p.shares[op.op_id] == (0.0, 0.0) for op in dag.operators if op.kind is OpKind.SCAN)
            costs[s] = model_plan_cost(dag, p, prof, info)
        assert costs["optimal"] <= min(costs["eager"], costs["uniform"]) * (1 + 1e-12)


def test_lattice_cap():
    assert lattice_steps(3, 20) == 20
    k = lattice_steps(12, 20)
    assert k < 20 and math.comb(k + 11, 11) <= 2_000_000
    assert lattice_steps(1, 20) == 20


def test_planning_deterministic(health):
    db, mult = health
    dag, info = annotate(three_join(), db, mult)
    a = plan_optimal(dag, 0.5, 5e-5, CostProfile(), info)
    b = plan_optimal(dag, 0.5, 5e-5, CostProfile(), info)
    assert a == b


def test_budget_plan_validation():
    with pytest.raises(ValueError):
        BudgetPlan(((0.3, 0.0), (0.3, 0.0)), 0.5, 0.0)
    with pytest.raises(ValueError):
        BudgetPlan(((-0.1, 0.0),), 0.5, 0.0)
    with pytest.raises(ValueError):
        BudgetPlan(((0.1, 2e-4),), 0.5, 1e-4)
    BudgetPlan(((0.25 + 1e-10, 0.0), (0.25, 0.0)), 0.5, 0.0)
