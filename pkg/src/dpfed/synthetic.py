"""Synthetic horizontally partitioned tables and the benchmark query shapes."""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from .relational import Column, ColumnKind, Database, Schema


class InfeasibleSpec(ValueError):
    pass


def _table(name: str, spec: Mapping, rng: np.random.Generator) -> tuple[Schema, list[list], dict]:
    n = int(spec["rows"])
    key = spec.get("key", "pid")
    m = int(spec.get("key_multiplicity", 1))
    d = int(spec.get("key_distinct", math.ceil(n / m) if n else 1))
    if m < 1 or d < 1 or m * d < n:
        raise InfeasibleSpec(f"{name}: {d} keys repeated at most {m} times cannot fill {n} rows")
    # the first n slots of every key repeated m times: multiplicities are m, except one short key
    keys = np.repeat(np.arange(d, dtype=np.int64), m)[:n]
    cols = [Column(key, ColumnKind.INT64, max(1, min(d, math.ceil(n / m))))]
    values: list[np.ndarray] = [keys]
    for attr in spec.get("attributes", []):
        v = int(attr.get("values", 10))
        target = attr["target"]
        hits = int(round(n * float(attr.get("selectivity", 1.0 / v))))
        others = [f"{attr['name']}_{i}" for i in range(v - 1)]
        if hits < n and not others:
            raise InfeasibleSpec(f"{name}.{attr['name']}: one value cannot have selectivity < 1")
        col = np.empty(n, dtype=object)
        perm = rng.permutation(n)
        col[perm[:hits]] = target
        if hits < n:
            col[perm[hits:]] = rng.choice(np.array(others, dtype=object), size=n - hits)
        cols.append(Column(attr["name"], ColumnKind.STRING, v))
        values.append(col)
    if spec.get("time", False):
        cols.append(Column("time", ColumnKind.DATE, int(spec.get("time_range", 3650))))
        values.append(rng.integers(0, int(spec.get("time_range", 3650)), size=n))
    order = rng.permutation(n)
    rows = [[v[i].item() if hasattr(v[i], "item") else v[i] for v in values] for i in order]
    catalog = {"columns": [{"name": c.name, "kind": c.kind.value, "distinct": c.distinct} for c in cols]}
    return Schema(tuple(cols)), rows, catalog


def gen_synthetic(spec: Mapping) -> tuple[Database, dict]:
    """Deterministic tables from a generation spec; returns the database and its catalog.

    Spec: ``{"seed", "owners", "tables": {name: {"rows", "key", "key_multiplicity",
    "key_distinct", "attributes": [{"name", "values", "target", "selectivity"}], "time"}}}``.
    """
    seed = int(spec.get("seed", 0))
    owners = int(spec.get("owners", 2))
    if owners < 1:
        raise InfeasibleSpec("need at least one owner")
    tables, catalog, mult = {}, {}, {}
    for i, (name, tspec) in enumerate(sorted(spec["tables"].items())):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        schema, rows, cat = _table(name, tspec, rng)
        bounds = np.linspace(0, len(rows), owners + 1).round().astype(int)
        tables[name] = (schema, [rows[bounds[k] : bounds[k + 1]] for k in range(owners)])
        catalog[name] = cat
        mult[f"{name}.{tspec.get('key', 'pid')}"] = int(tspec.get("key_multiplicity", 1))
    db = Database.from_rows(tables)
    # the declared bounds the data was generated under, not measured from it
    return db, {"tables": catalog, "multiplicities": mult}


def write_partitions(db: Database, catalog: Mapping, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, parts in sorted(db.partitions.items()):
        (out / name).mkdir(exist_ok=True)
        for p in parts:
            path = out / name / f"owner_{p.owner_id}.csv"
            with path.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(p.schema.names)
                for r in p.data.tolist():
                    w.writerow(db.decode_row(p.schema, r))
            written.append(path)
    (out / "catalog.json").write_text(json.dumps(catalog, indent=2, sort_keys=True) + "\n")
    return written


# --- workload --------------------------------------------------------------------


def scan(table: str, alias: str | None = None) -> dict:
    return {"op": "Scan", "params": {"table": table, "alias": alias or table}}


def filt(child: dict, *preds: dict) -> dict:
    return {"op": "Filter", "params": {"predicate": list(preds)}, "children": [child]}


def eq(col: str, value) -> dict:
    return {"column": col, "op": "=", "value": value}


def join(left: dict, right: dict, lk, rk) -> dict:
    return {"op": "EquiJoin", "params": {"left_keys": [lk], "right_keys": [rk]}, "children": [left, right]}


def unary(op: str, child: dict, **params) -> dict:
    return {"op": op, "params": params, "children": [child]}


def health_spec(n: int = 256, selectivity: float = 0.1, m: int = 4, seed: int = 7, owners: int = 2) -> dict:
    """Diagnosis, medication and demographics tables shaped like the medical workload."""
    return {
        "seed": seed,
        "owners": owners,
        "tables": {
            "diagnosis": {
                "rows": n,
                "key": "pid",
                "key_multiplicity": m,
                "attributes": [{"name": "diag", "values": 10, "target": "hd", "selectivity": selectivity},
                               {"name": "cohort", "values": 2, "target": "cdiff", "selectivity": 0.5}],
                "time": True,
            },
            "medication": {
                "rows": n,
                "key": "pid",
                "key_multiplicity": m,
                "attributes": [{"name": "med", "values": 10, "target": "aspirin", "selectivity": selectivity},
                               {"name": "dosage", "values": 4, "target": "325mg", "selectivity": 0.25}],
                "time": True,
            },
            "demographics": {"rows": n, "key": "pid", "key_multiplicity": 1,
                             "attributes": [{"name": "gender", "values": 2, "target": "f", "selectivity": 0.5}]},
        },
    }


def health_multiplicities(m: int = 4) -> dict[str, int]:
    return {"diagnosis.pid": m, "medication.pid": m, "demographics.pid": 1}


def running_example() -> dict:
    """Two filters, two joins and a DISTINCT over diagnosis, medication, demographics."""
    j1 = join(filt(scan("diagnosis", "d"), eq("diag", "hd")), filt(scan("medication", "m"), eq("med", "aspirin")),
              "d.pid", "m.pid")
    j2 = join(j1, scan("demographics", "demo"), "d.pid", "demo.pid")
    return unary("Distinct", j2, columns=["d.pid"])


def aspirin_count() -> dict:
    j1 = join(filt(scan("diagnosis", "d"), eq("diag", "hd")), filt(scan("medication", "m"), eq("med", "aspirin")),
              "d.pid", "m.pid")
    timed = filt(j1, {"column": "d.time", "op": "<=", "other": "m.time"})
    j2 = join(timed, scan("demographics", "demo"), "d.pid", "demo.pid")
    return unary("CountAggregate", unary("Distinct", j2, columns=["d.pid"]))


def three_join() -> dict:
    j1 = join(filt(scan("diagnosis", "d"), eq("diag", "hd")), filt(scan("medication", "m"), eq("med", "aspirin")),
              "d.pid", "m.pid")
    timed = filt(j1, {"column": "d.time", "op": "<=", "other": "m.time"})
    j2 = join(timed, scan("demographics", "demo"), "d.pid", "demo.pid")
    j3 = join(j2, scan("demographics", "demo2"), "d.pid", "demo2.pid")
    return unary("CountAggregate", unary("Distinct", j3, columns=["d.pid"]))


def dosage_study() -> dict:
    d = filt(scan("diagnosis", "d"), eq("diag", "hd"))
    m = filt(scan("medication", "m"), eq("med", "aspirin"), eq("dosage", "325mg"))
    return unary("Distinct", join(d, m, "d.pid", "m.pid"), columns=["d.pid"])


def comorbidity() -> dict:
    f = filt(scan("diagnosis", "d"), eq("cohort", "cdiff"), {"column": "diag", "op": "!=", "value": "hd"})
    g = unary("GroupByCount", f, columns=["d.diag"])
    return unary("Limit", unary("Sort", g, keys=[["count", True]]), k=10)


WORKLOAD = {
    "aspirin_count": aspirin_count,
    "three_join": three_join,
    "dosage_study": dosage_study,
    "comorbidity": comorbidity,
    "running_example": running_example,
}


def chain_spec(tables: int, n: int, selectivity: float = 0.1, m: int = 2, seed: int = 11, owners: int = 2) -> dict:
    return {
        "seed": seed,
        "owners": owners,
        "tables": {
            f"t{i}": {
                "rows": n,
                "key": "k",
                "key_multiplicity": m,
                "attributes": [{"name": "a", "values": 10, "target": "x", "selectivity": selectivity}],
            }
            for i in range(1, tables + 1)
        },
    }


def chain_multiplicities(tables: int, m: int = 2) -> dict[str, int]:
    return {f"t{i}.k": m for i in range(1, tables + 1)}


def join_chain(tables: int, filtered: bool = True) -> dict:
    """``tables`` filtered scans joined left-deep on ``k``: ``tables - 1`` joins."""

    def leaf(i):
        s = scan(f"t{i}")
        return filt(s, eq("a", "x")) if filtered else s

    node = leaf(1)
    for i in range(2, tables + 1):
        node = join(node, leaf(i), "t1.k", f"t{i}.k")
    return node


def chain_count(tables: int) -> dict:
    return unary("CountAggregate", unary("Distinct", join_chain(tables), columns=["t1.k"]))
