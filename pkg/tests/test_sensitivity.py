import random
from collections import Counter

import pytest

from dpfed.oracle import oracle_cardinalities
from dpfed.relational import Database, OpKind, Schema, build_dag
from dpfed.sensitivity import (
    SensitivityConfig,
    SensitivityError,
    operator_stability,
    propagate_sensitivity,
    tables_touched,
)
from dpfed.synthetic import gen_synthetic, health_spec, join_chain, chain_spec, running_example, scan, unary

from instances import LABELS, declared_multiplicities, random_database, random_query


@pytest.fixture(scope="module")
def hdb():
    return gen_synthetic(health_spec(16, 0.25, 2))[0]


def sens(dag):
    return [op.sensitivity for op in dag.operators]


def by_kind(dag, kind):
    return [op.sensitivity for op in dag.operators if op.kind is kind]


@pytest.mark.parametrize("m", [1, 2, 3])
def test_running_example_pattern(hdb, m):
    cfg = SensitivityConfig({"diagnosis.pid": m, "medication.pid": m, "demographics.pid": m})
    dag = propagate_sensitivity(build_dag(running_example(), hdb.schemas), cfg)
    pattern = by_kind(dag, OpKind.FILTER) + by_kind(dag, OpKind.EQUI_JOIN) + by_kind(dag, OpKind.DISTINCT)
    assert pattern == [1, 1, m, m * m, m * m]


def test_stabilities(hdb):
    dag = build_dag(running_example(), hdb.schemas)
    cfg = SensitivityConfig({"diagnosis.pid": 4, "medication.pid": 4, "demographics.pid": 1})
    stab = {op.kind: operator_stability(op, cfg) for op in dag.operators}
    assert stab[OpKind.FILTER] == 1
    assert stab[OpKind.EQUI_JOIN] == 4
    assert stab[OpKind.DISTINCT] == 1


def test_join_without_bound(hdb):
    dag = build_dag(running_example(), hdb.schemas)
    with pytest.raises(SensitivityError):
        propagate_sensitivity(dag, SensitivityConfig({"diagnosis.pid": 2}))


def test_explicit_join_m_param(hdb):
    q = {"op": "EquiJoin", "params": {"left_keys": ["d.pid"], "right_keys": ["m.pid"], "m": 7},
         "children": [scan("diagnosis", "d"), scan("medication", "m")]}
    dag = propagate_sensitivity(build_dag(q, hdb.schemas), SensitivityConfig())
    assert dag.root.sensitivity == 7


def test_scan_count_all_ones(hdb):
    dag = propagate_sensitivity(build_dag(unary("CountAggregate", scan("diagnosis")), hdb.schemas), SensitivityConfig())
    assert sens(dag) == [1, 1]


def test_chain_of_three_joins():
    db, _ = gen_synthetic(chain_spec(4, 8, 0.5, 2))
    dag = build_dag(join_chain(4, filtered=False), db.schemas)
    dag = propagate_sensitivity(dag, SensitivityConfig({f"t{i}.k": 2 for i in range(1, 5)}))
    assert [1] + by_kind(dag, OpKind.EQUI_JOIN) == [1, 2, 4, 8]


def test_cross_product_uses_input_bound(hdb):
    q = {"op": "CrossProduct", "children": [scan("diagnosis"), scan("medication")]}
    dag = propagate_sensitivity(build_dag(q, hdb.schemas), SensitivityConfig({}, hdb.table_sizes))
    assert dag.root.sensitivity == 16
    with pytest.raises(SensitivityError):
        propagate_sensitivity(build_dag(q, hdb.schemas), SensitivityConfig())


def test_guard(hdb):
    cfg = SensitivityConfig({"diagnosis.pid": 2**40, "medication.pid": 2**40, "demographics.pid": 1})
    with pytest.raises(SensitivityError):
        propagate_sensitivity(build_dag(running_example(), hdb.schemas), cfg)


def test_tables_touched(hdb):
    assert tables_touched(build_dag(running_example(), hdb.schemas)) == {"diagnosis", "medication", "demographics"}
    assert tables_touched(build_dag(scan("diagnosis"), hdb.schemas)) == {"diagnosis"}
    q = {"op": "EquiJoin", "params": {"left_keys": ["a.pid"], "right_keys": ["b.pid"]},
         "children": [scan("diagnosis", "a"), scan("diagnosis", "b")]}
    assert tables_touched(build_dag(q, hdb.schemas)) == {"diagnosis"}


def test_self_join_counts_both_sides(hdb):
    q = {"op": "EquiJoin", "params": {"left_keys": ["a.pid"], "right_keys": ["b.pid"]},
         "children": [scan("diagnosis", "a"), scan("diagnosis", "b")]}
    dag = propagate_sensitivity(build_dag(q, hdb.schemas), SensitivityConfig({"diagnosis.pid": 3}))
    # a new row with a key already present 2 times adds 2 + 2 + 1 = 5 pairs
    assert dag.root.sensitivity == 6


def test_sibling_order_independent(hdb):
    cfg = SensitivityConfig({"diagnosis.pid": 3, "medication.pid": 2, "demographics.pid": 1})

    def q(swap):
        kids = [scan("diagnosis", "d"), scan("medication", "m")]
        keys = ["d.pid", "m.pid"]
        if swap:
            kids, keys = kids[::-1], keys[::-1]
        return {"op": "EquiJoin", "params": {"left_keys": [keys[0]], "right_keys": [keys[1]]}, "children": kids}

    a = propagate_sensitivity(build_dag(q(False), hdb.schemas), cfg)
    b = propagate_sensitivity(build_dag(q(True), hdb.schemas), cfg)
    assert a.root.sensitivity == b.root.sensitivity == 3


def test_monotone_in_multiplicity(hdb):
    dag = build_dag(running_example(), hdb.schemas)
    prev = None
    for m in range(1, 6):
        cur = sens(propagate_sensitivity(dag, SensitivityConfig(
            {"diagnosis.pid": m, "medication.pid": 2, "demographics.pid": 1})))
        if prev is not None:
            assert all(c >= p for c, p in zip(cur, prev))
        prev = cur


def test_all_ones_everywhere():
    for i in range(30):
        rnd = random.Random(i)
        db = random_database(rnd, max_rows=8)
        dag = build_dag(random_query(rnd, cross=False, self_join=False), db.schemas)
        dag = propagate_sensitivity(dag, SensitivityConfig({f"{t}.k": 1 for t in db.partitions}))
        assert set(sens(dag)) == {1}


def neighbors(rows, bound, keys=8):
    """Every database one row away that still respects the multiplicity bound."""
    for j in range(len(rows)):
        yield rows[:j] + rows[j + 1:]
    counts = Counter(r[0] for r in rows)
    for k in range(keys):
        if counts[k] + 1 > bound:
            continue
        for lab in LABELS:
            for v in (0, 4, 9):
                yield rows + [(k, lab, v)]


def brute_force_max_change(dag, tables, bounds):
    base = oracle_cardinalities(dag, tables)
    worst = [0] * len(dag)
    for t, rows in tables.items():
        for nb in neighbors(rows, bounds[f"{t}.k"]):
            c = oracle_cardinalities(dag, {**tables, t: nb})
            worst = [max(w, abs(a - b)) for w, a, b in zip(worst, c, base)]
    return worst


def check_instance(seed):
    rnd = random.Random(seed)
    db = random_database(rnd, max_rows=8, owners=1)
    bounds = {k: v + rnd.randint(0, 1) for k, v in declared_multiplicities(db).items()}
    q = random_query(rnd, max_joins=3)
    tables = {t: db.python_rows(t) for t in db.partitions}
    sizes = {t: len(r) + 1 for t, r in tables.items()}
    dag = propagate_sensitivity(build_dag(q, db.schemas), SensitivityConfig(bounds, sizes))
    worst = brute_force_max_change(dag, tables, bounds)
    return [(op, w) for op, w in zip(dag.operators, worst) if w > op.sensitivity]


def test_brute_force_neighbors():
    for seed in range(60):
        assert check_instance(seed) == []
