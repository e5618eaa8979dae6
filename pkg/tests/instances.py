"""Random small federations and query DAGs for the property tests."""

from __future__ import annotations

import random
from collections import Counter

from dpfed.relational import Column, ColumnKind, Database, Schema

TABLES = ("r", "s", "t", "u")
LABELS = ("a", "b", "c")


def schema() -> Schema:
    return Schema((
        Column("k", ColumnKind.INT64),
        Column("lab", ColumnKind.STRING),
        Column("v", ColumnKind.INT64),
    ))


def random_rows(rnd: random.Random, n: int, keys: int = 6) -> list[tuple]:
    return [(rnd.randrange(keys), rnd.choice(LABELS), rnd.randrange(10)) for _ in range(n)]


def random_database(rnd: random.Random, max_rows: int = 32, owners: int = 2, tables=TABLES) -> Database:
    spec = {}
    for name in tables:
        rows = random_rows(rnd, rnd.randint(0, max_rows), keys=rnd.randint(2, 8))
        cuts = sorted(rnd.randint(0, len(rows)) for _ in range(owners - 1))
        bounds = [0, *cuts, len(rows)]
        spec[name] = (schema(), [rows[bounds[i] : bounds[i + 1]] for i in range(owners)])
    return Database.from_rows(spec)


def declared_multiplicities(db: Database) -> dict[str, int]:
    """The tightest bounds the data respects: the largest count of any join key."""
    out = {}
    for name in db.partitions:
        counts = Counter(r[0] for r in db.python_rows(name))
        out[f"{name}.k"] = max(counts.values(), default=1)
    return out


def _pred(rnd: random.Random, alias: str) -> dict:
    if rnd.random() < 0.5:
        return {"column": f"{alias}.lab", "op": rnd.choice(["=", "!="]), "value": rnd.choice(LABELS + ("zz",))}
    return {"column": f"{alias}.v", "op": rnd.choice(["<", "<=", ">", ">=", "=", "!="]), "value": rnd.randrange(10)}


def random_query(rnd: random.Random, max_joins: int = 3, self_join: bool = True, cross: bool = True) -> dict:
    """A left-deep tree of filtered scans joined on ``k``, topped by a random unary head."""
    joins = rnd.randint(0, max_joins)
    pool = list(TABLES)
    aliases = []
    leaves = []
    for i in range(joins + 1):
        table = rnd.choice(TABLES) if self_join else pool.pop(rnd.randrange(len(pool)))
        alias = f"x{i}"
        aliases.append(alias)
        node = {"op": "Scan", "params": {"table": table, "alias": alias}}
        if rnd.random() < 0.6:
            node = {"op": "Filter", "params": {"predicate": [_pred(rnd, alias)]}, "children": [node]}
        leaves.append(node)
    node = leaves[0]
    used_cross = False
    for i in range(1, joins + 1):
        if cross and not used_cross and rnd.random() < 0.1:
            used_cross = True
            node = {"op": "CrossProduct", "params": {}, "children": [node, leaves[i]]}
            continue
        left = rnd.choice(aliases[:i])
        node = {
            "op": "EquiJoin",
            "params": {"left_keys": [f"{left}.k"], "right_keys": [f"{aliases[i]}.k"]},
            "children": [node, leaves[i]],
        }
        if rnd.random() < 0.2:
            node = {
                "op": "Filter",
                "params": {"predicate": [{"column": f"{aliases[0]}.v", "op": "<=", "other": f"{aliases[i]}.v"}]},
                "children": [node],
            }
    cols = [f"{a}.{c}" for a in aliases for c in ("k", "lab", "v")]
    head = rnd.choice(["none", "project", "distinct", "group", "count", "distinct_count", "sort_limit"])
    if head == "project":
        node = {"op": "Project", "params": {"columns": rnd.sample(cols, rnd.randint(1, 3))}, "children": [node]}
    elif head == "distinct":
        node = {"op": "Distinct", "params": {"columns": rnd.sample(cols, rnd.randint(1, 2))}, "children": [node]}
    elif head == "group":
        node = {"op": "GroupByCount", "params": {"columns": rnd.sample(cols, rnd.randint(1, 2))}, "children": [node]}
    elif head == "count":
        node = {"op": "CountAggregate", "params": {}, "children": [node]}
    elif head == "distinct_count":
        d = {"op": "Distinct", "params": {"columns": [f"{aliases[0]}.k"]}, "children": [node]}
        node = {"op": "CountAggregate", "params": {}, "children": [d]}
    elif head == "sort_limit":
        srt = {"op": "Sort", "params": {"keys": [[c, rnd.random() < 0.5] for c in cols]}, "children": [node]}
        node = {"op": "Limit", "params": {"k": rnd.randint(0, 12)}, "children": [srt]}
    return node
