import math

import pytest

from dpfed.budget import BudgetPlan, Strategy
from dpfed.costmodel import (
    CostProfile,
    PublicInfo,
    cost_copy,
    cost_sort,
    estimate_dag,
    model_operator_cost,
    model_plan_breakdown,
    model_plan_cost,
    noisy_size,
    unit_cost,
)
from dpfed.noise import tlap_mean, tlap_new
from dpfed.planner import plan_baseline, plan_uniform
from dpfed.relational import Column, ColumnKind, Database, OpKind, Schema, build_dag
from dpfed.sensitivity import SensitivityConfig, propagate_sensitivity
from dpfed.synthetic import aspirin_count, eq, filt, join, running_example, scan

from conftest import annotate

CONST = CostProfile(read="constant", write="constant")


def test_unit_curves():
    assert unit_cost("constant", 10**6) == 1
    assert unit_cost("log2", 8) == 3
    assert unit_cost("log2", 1) == unit_cost("log2", 0) == 1
    assert unit_cost("linear-log2-squared", 8) == 8 * 9
    with pytest.raises(ValueError):
        unit_cost("cubic", 3)
    with pytest.raises(ValueError):
        CostProfile(read="cubic")
    with pytest.raises(ValueError):
        CostProfile(mode="quantum")
    with pytest.raises(ValueError):
        CostProfile(c_g=math.inf)


def test_filter_log2():
    assert model_operator_cost(OpKind.FILTER, [8]) == 8 * 3 + 8 * 3 == 48


def test_join_constant():
    assert model_operator_cost(OpKind.EQUI_JOIN, [4, 4], CONST) == 4 + 16 + 16 == 36


def test_circuit_formula():
    prof = CostProfile(mode="circuit")
    assert prof.circuit(8, 20, 16, depth=5) == 49
    # default depth is ceil(log2 n_out)
    assert prof.circuit(8, 20, 16) == 8 + 20 + 4 + 16


def test_circuit_operator_gates():
    prof = CostProfile(mode="circuit", c_in=2, c_g=3, c_d=5, c_out=7)
    # join 4 x 4: gates = 4 + 2 * 16, depth = ceil(log2 16)
    assert model_operator_cost(OpKind.EQUI_JOIN, [4, 4], prof) == 2 * 8 + 3 * 36 + 5 * 4 + 7 * 16


def test_other_rows():
    r = lambda n: max(1, math.log2(n)) if n > 2 else 1
    assert model_operator_cost(OpKind.COUNT, [16]) == 16 * 4 + 4
    assert model_operator_cost(OpKind.SORT, [16]) == 16 * 16 * (4 + 4)
    assert model_operator_cost(OpKind.LIMIT, [16], k=4) == 16 * 4 + 4 * 2
    assert model_operator_cost(OpKind.SCAN, [16]) == 0
    assert cost_sort(16) == model_operator_cost(OpKind.SORT, [16])
    assert cost_copy(16, 5) == 5 * r(16) + 5 * r(5)


def schema(n_vals):
    return Schema((Column("k", ColumnKind.INT64, n_vals), Column("lab", ColumnKind.STRING, 10)))


def test_selinger_estimates():
    db = Database.from_rows({
        "a": (schema(50), [[(i % 50, "x") for i in range(100)]]),
        "b": (schema(40), [[(i % 40, "y") for i in range(200)]]),
        "c": (Schema.of("k", ("lab", "string")), [[(i, "z") for i in range(500)]]),
    })
    info = PublicInfo.from_database(db)
    dag = build_dag(scan("c"), db.schemas)
    assert estimate_dag(dag, info) == [500]
    dag = build_dag(filt(scan("c"), eq("lab", "z")), db.schemas)
    # no statistics: V = max(10, 500 / 10) = 50
    assert estimate_dag(dag, info)[-1] == pytest.approx(10)
    info10 = PublicInfo.from_database(db, {"c.lab": 10})
    assert estimate_dag(dag, info10)[-1] == pytest.approx(50)
    dag = build_dag(join(scan("a"), scan("b"), "a.k", "b.k"), db.schemas)
    assert estimate_dag(dag, info)[-1] == pytest.approx(400)
    ineq = build_dag(filt(scan("c"), {"column": "k", "op": "<", "value": 3}), db.schemas)
    assert estimate_dag(ineq, info)[-1] == pytest.approx(500 / 3)
    lim = build_dag({"op": "Limit", "params": {"k": 7}, "children": [scan("a")]}, db.schemas)
    assert estimate_dag(lim, info)[-1] == 7
    cnt = build_dag({"op": "CountAggregate", "children": [scan("a")]}, db.schemas)
    assert estimate_dag(cnt, info)[-1] == 1
    dis = build_dag({"op": "Distinct", "params": {"columns": ["a.k"]}, "children": [scan("a")]}, db.schemas)
    assert estimate_dag(dis, info)[-1] == 50
    cross = build_dag({"op": "CrossProduct", "children": [scan("a"), scan("b")]}, db.schemas)
    assert estimate_dag(cross, info)[-1] == 20000


def test_estimates_deterministic(health):
    db, mult = health
    dag, info = annotate(aspirin_count(), db, mult)
    assert estimate_dag(dag, info) == estimate_dag(dag, info)


def test_zero_shares_is_baseline(health):
    db, mult = health
    dag, info = annotate(aspirin_count(), db, mult)
    n = 256
    # Filter, Filter, Join, Filter(time), Join, Distinct, Count on padded sizes
    lg = math.log2
    f = 2 * n * lg(n)
    j1 = n * lg(n) + n * n * lg(n) + n * n * lg(n * n)
    f2 = 2 * n * n * lg(n * n)
    j2 = n * n * lg(n * n) + n**3 * lg(n) + n**3 * lg(n**3)
    d = 2 * n**3 * lg(n**3)
    c = n**3 * lg(n**3) + lg(n**3)
    assert model_plan_cost(dag, plan_baseline(dag), CostProfile(), info) == pytest.approx(2 * f + j1 + f2 + j2 + d + c, rel=1e-12)


def test_running_example_by_hand():
    n, v = 10, 5
    sch = Schema((Column("pid", ColumnKind.INT64, n), Column("diag", ColumnKind.STRING, v)))
    sch_m = Schema((Column("pid", ColumnKind.INT64, n), Column("med", ColumnKind.STRING, v)))
    sch_d = Schema((Column("pid", ColumnKind.INT64, n), Column("gender", ColumnKind.STRING, 2)))
    db = Database.from_rows({
        "diagnosis": (sch, [[(i, "hd") for i in range(n)]]),
        "medication": (sch_m, [[(i, "aspirin") for i in range(n)]]),
        "demographics": (sch_d, [[(i, "f") for i in range(n)]]),
    })
    dag, info = annotate(running_example(), db, {"diagnosis.pid": 1, "medication.pid": 1, "demographics.pid": 1})
    plan = plan_uniform(dag, 0.5, 5e-5)
    mu = tlap_mean(tlap_new(0.1, 1e-5, 1))
    L = lambda x: 1 if x <= 1 else math.ceil(math.log2(x))
    sort = lambda x: x * L(x) ** 2 * 2
    copy = lambda x: 2 * x
    # filters: estimate n / V = 2 rows
    f_out = min(n, 2 + mu)
    filters = 2 * (2 * n + sort(n) + copy(f_out))
    # first join: f x f / max(V) with V capped at the filter estimate of 2 -> 2 rows
    j1_pad = f_out * f_out
    j1_out = min(j1_pad, 2 + mu)
    j1 = f_out + 2 * j1_pad + sort(j1_pad) + copy(j1_out)
    j2_pad = j1_out * n
    j2_est = 2 * n / max(2, n)
    j2_out = min(j2_pad, j2_est + mu)
    j2 = j1_out + 2 * j2_pad + sort(j2_pad) + copy(j2_out)
    dis_out = min(j2_out, j2_est + mu)
    dis = 2 * j2_out + sort(j2_out) + copy(dis_out)
    total = filters + j1 + j2 + dis
    assert model_plan_cost(dag, plan, CONST, info) == pytest.approx(total, rel=1e-9)


def test_one_epsilon_increasing_lowers_cost(health):
    db, mult = health
    dag, info = annotate(aspirin_count(), db, mult)
    prof = CostProfile()
    for target in (3, 5, 7):
        prev = math.inf
        for e in [0.01 * i for i in range(1, 30)]:
            shares = [(0.0, 0.0)] * len(dag)
            shares[target] = (e, 1e-5)
            for other in (4, 6):
                if other != target:
                    shares[other] = (0.05, 1e-5)
            plan = BudgetPlan(tuple(shares), 0.5, 5e-5, strategy=Strategy.OPTIMAL)
            c = model_plan_cost(dag, plan, prof, info)
            assert c <= prev + 1e-6 * prev
            prev = c


def test_noisy_size_rules():
    assert noisy_size(100, 3, 0.0, 0.0, 1) == 100
    assert noisy_size(100, 3, 0.5, 5e-5, 1) == pytest.approx(3 + tlap_mean(tlap_new(0.5, 5e-5, 1)))
    assert noisy_size(10, 3, 0.5, 5e-5, 1) == 10


def test_breakdown_zero_share_has_no_resize(health):
    db, mult = health
    dag, info = annotate(aspirin_count(), db, mult)
    for r in model_plan_breakdown(dag, plan_baseline(dag), CostProfile(), info):
        assert r.sort == r.copy == 0 and r.noisy == r.padded
