"""Schemas, padded tables, partitions and the query operator tree.

Values of every column are stored as ``int64`` codes.  String columns go
through a :class:`StringPool` whose codes are order preserving, so equality,
ordering and joins on strings reduce to integer comparisons.
"""

from __future__ import annotations

import bisect
import csv
import enum
import json
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

CAPACITY_GUARD = 2**62


class DagError(ValueError):
    """Raised for malformed query descriptions."""


class SchemaError(ValueError):
    """Raised when tables or partitions disagree on their schema."""


class ColumnKind(str, enum.Enum):
    INT64 = "int64"
    STRING = "string"
    DATE = "date"


@dataclass(frozen=True)
class Column:
    name: str
    kind: ColumnKind = ColumnKind.INT64
    distinct: int | None = None
    # "table.column" of the base column this one was derived from
    origin: str | None = None


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate column names in {names}")
        for c in self.columns:
            if c.distinct is not None and c.distinct < 1:
                raise SchemaError(f"distinct estimate for {c.name} must be >= 1")

    @classmethod
    def of(cls, *specs: str | tuple[str, str] | Column) -> Schema:
        cols = []
        for s in specs:
            if isinstance(s, Column):
                cols.append(s)
            elif isinstance(s, str):
                cols.append(Column(s))
            else:
                cols.append(Column(s[0], ColumnKind(s[1])))
        return cls(tuple(cols))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @property
    def arity(self) -> int:
        return len(self.columns)

    def index(self, ref: str) -> int:
        """Resolve a column reference, qualified (``alias.col``) or bare."""
        names = self.names
        if ref in names:
            return names.index(ref)
        hits = [i for i, n in enumerate(names) if n.rsplit(".", 1)[-1] == ref]
        if len(hits) == 1:
            return hits[0]
        if not hits:
            raise DagError(f"unknown column {ref!r}; have {list(names)}")
        raise DagError(f"ambiguous column {ref!r}; matches {[names[i] for i in hits]}")

    def qualified(self, alias: str) -> Schema:
        return Schema(tuple(replace(c, name=f"{alias}.{c.name}") for c in self.columns))

    def compatible(self, other: Schema) -> bool:
        return [(c.name, c.kind) for c in self.columns] == [
            (c.name, c.kind) for c in other.columns
        ]


class StringPool:
    """Order-preserving dictionary encoding shared by one database.

    Known strings map to even codes ``2 * rank``.  Literals that do not occur
    in the data map to the odd code between their neighbours, so they compare
    correctly under ``<``/``>`` and never compare equal.
    """

    def __init__(self, values: Iterable[str] = ()):
        self._sorted = sorted(set(values))
        self._code = {s: 2 * i for i, s in enumerate(self._sorted)}

    def __len__(self):
        return len(self._sorted)

    def encode(self, value: str) -> int:
        code = self._code.get(value)
        if code is not None:
            return code
        return 2 * bisect.bisect_left(self._sorted, value) - 1

    def decode(self, code: int) -> str:
        if code % 2:
            raise KeyError(f"code {code} does not name a stored string")
        return self._sorted[code // 2]


class Tuple(NamedTuple):
    values: tuple
    is_dummy: bool


class PaddedTable:
    """A secure array of ``capacity`` slots, most of which may be dummies.

    Only the real rows are stored: ``data[i]`` lives at slot ``slots[i]``.
    Every other slot holds a dummy with placeholder values.  ``len(table)`` is
    the capacity, matching a dense secure array.
    """

    __slots__ = ("schema", "data", "slots", "capacity")

    def __init__(self, schema: Schema, data: np.ndarray, slots: np.ndarray, capacity: int):
        data = np.asarray(data, dtype=np.int64).reshape(-1, schema.arity)
        slots = np.asarray(slots, dtype=np.int64).reshape(-1)
        capacity = int(capacity)
        if capacity < 0 or capacity > CAPACITY_GUARD:
            raise OverflowError(f"capacity {capacity} outside [0, 2**62]")
        if len(slots) != len(data):
            raise ValueError("slots and data disagree on the number of real rows")
        if len(slots):
            if slots[0] < 0 or slots[-1] >= capacity or np.any(np.diff(slots) <= 0):
                raise ValueError("slots must be strictly increasing within the capacity")
        self.schema = schema
        self.data = data
        self.slots = slots
        self.capacity = capacity

    @classmethod
    def dense(cls, schema: Schema, data: np.ndarray) -> PaddedTable:
        data = np.asarray(data, dtype=np.int64).reshape(-1, schema.arity)
        return cls(schema, data, np.arange(len(data), dtype=np.int64), len(data))

    @property
    def true_cardinality(self) -> int:
        return len(self.data)

    def __len__(self) -> int:
        return self.capacity

    def __repr__(self):
        return (
            f"PaddedTable(columns={list(self.schema.names)}, capacity={self.capacity}, "
            f"real={self.true_cardinality})"
        )

    def rows(self, limit: int = 1 << 20) -> Iterator[Tuple]:
        """Materialize all slots, dummies included; guarded for big capacities."""
        if self.capacity > limit:
            raise OverflowError(f"refusing to materialize {self.capacity} slots")
        placeholder = tuple(0 for _ in self.schema.columns)
        real = dict(zip(self.slots.tolist(), map(tuple, self.data.tolist())))
        for slot in range(self.capacity):
            if slot in real:
                yield Tuple(real[slot], False)
            else:
                yield Tuple(placeholder, True)

    def check(self) -> None:
        """Assert the structural invariants of a secure array."""
        assert self.data.shape == (len(self.slots), self.schema.arity)
        assert self.true_cardinality <= self.capacity
        if len(self.slots):
            assert self.slots[-1] < self.capacity
            assert np.all(np.diff(self.slots) > 0)


@dataclass(frozen=True)
class Partition:
    owner_id: int
    table_name: str
    schema: Schema
    data: np.ndarray

    @property
    def rows(self) -> list[Tuple]:
        return [Tuple(tuple(r), False) for r in self.data.tolist()]


def union_partitions(parts: Sequence[Partition]) -> PaddedTable:
    """Assemble a base table from its horizontal partitions, ordered by owner."""
    if not parts:
        raise SchemaError("need at least one partition")
    first = parts[0]
    owners = set()
    for p in parts:
        if p.table_name != first.table_name:
            raise SchemaError(f"partition of {p.table_name!r} mixed with {first.table_name!r}")
        if not p.schema.compatible(first.schema):
            raise SchemaError(f"schema mismatch in partition of owner {p.owner_id}")
        if p.owner_id in owners:
            raise SchemaError(f"owner {p.owner_id} holds two partitions of {p.table_name!r}")
        owners.add(p.owner_id)
    ordered = sorted(parts, key=lambda p: p.owner_id)
    data = np.concatenate(
        [np.asarray(p.data, dtype=np.int64).reshape(-1, first.schema.arity) for p in ordered]
    )
    return PaddedTable.dense(first.schema, data)


class Database:
    """Horizontally partitioned tables plus the public schema information."""

    def __init__(self, partitions: Mapping[str, Sequence[Partition]], pool: StringPool | None = None):
        self.partitions = {name: sorted(ps, key=lambda p: p.owner_id) for name, ps in partitions.items()}
        self.pool = pool or StringPool()
        self._tables = {name: union_partitions(ps) for name, ps in self.partitions.items()}

    @classmethod
    def from_rows(
        cls,
        tables: Mapping[str, tuple[Schema, Sequence[Sequence[Sequence[Any]]]]],
    ) -> Database:
        """Build from python values: ``{name: (schema, [owner1_rows, owner2_rows, ...])}``."""
        strings = set()
        for schema, owners in tables.values():
            str_cols = [i for i, c in enumerate(schema.columns) if c.kind is ColumnKind.STRING]
            for rows in owners:
                for r in rows:
                    strings.update(str(r[i]) for i in str_cols)
        pool = StringPool(strings)
        parts = {}
        for name, (schema, owners) in tables.items():
            parts[name] = [
                Partition(k + 1, name, schema, encode_rows(schema, rows, pool))
                for k, rows in enumerate(owners)
            ]
        return cls(parts, pool)

    @property
    def schemas(self) -> dict[str, Schema]:
        return {name: t.schema for name, t in self._tables.items()}

    @property
    def table_sizes(self) -> dict[str, int]:
        return {name: t.capacity for name, t in self._tables.items()}

    def table(self, name: str) -> PaddedTable:
        return self._tables[name]

    def decode_row(self, schema: Schema, row: Sequence[int]) -> tuple:
        return tuple(
            self.pool.decode(v) if c.kind is ColumnKind.STRING else int(v)
            for c, v in zip(schema.columns, row)
        )

    def python_rows(self, name: str) -> list[tuple]:
        t = self._tables[name]
        return [self.decode_row(t.schema, r) for r in t.data.tolist()]

    def with_stats(self, distinct: Mapping[str, int]) -> Database:
        """Attach distinct-value estimates keyed by ``table.column``."""
        parts = {}
        for name, ps in self.partitions.items():
            schema = Schema(
                tuple(
                    replace(c, distinct=distinct.get(f"{name}.{c.name}", c.distinct))
                    for c in ps[0].schema.columns
                )
            )
            parts[name] = [replace(p, schema=schema) for p in ps]
        return Database(parts, self.pool)


def encode_rows(schema: Schema, rows: Sequence[Sequence[Any]], pool: StringPool) -> np.ndarray:
    out = np.zeros((len(rows), schema.arity), dtype=np.int64)
    for i, r in enumerate(rows):
        if len(r) != schema.arity:
            raise SchemaError(f"row {r!r} does not match arity {schema.arity}")
        for j, c in enumerate(schema.columns):
            out[i, j] = pool.encode(str(r[j])) if c.kind is ColumnKind.STRING else int(r[j])
    return out


def load_database(data_dir: str | Path) -> Database:
    """Read ``<dir>/<table>/owner_<k>.csv`` files plus an optional ``catalog.json``."""
    root = Path(data_dir)
    catalog = {}
    if (root / "catalog.json").exists():
        catalog = json.loads((root / "catalog.json").read_text())["tables"]
    raw: dict[str, list[tuple[int, list[str], list[list[str]]]]] = {}
    for table_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for f in sorted(table_dir.glob("owner_*.csv")):
            owner = int(f.stem.split("_", 1)[1])
            with f.open(newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader)
                raw.setdefault(table_dir.name, []).append((owner, header, list(reader)))
    if not raw:
        raise FileNotFoundError(f"no owner_*.csv partitions under {root}")

    tables = {}
    for name, owners in raw.items():
        header = owners[0][1]
        for owner, h, _ in owners:
            if h != header:
                raise SchemaError(f"owner {owner} of {name!r} has header {h}, expected {header}")
        declared = {c["name"]: c for c in catalog.get(name, {}).get("columns", [])}
        cols = []
        for j, col in enumerate(header):
            if col in declared:
                kind = ColumnKind(declared[col].get("kind", "int64"))
            else:
                kind = ColumnKind.INT64 if all(
                    _is_int(r[j]) for _, _, rows in owners for r in rows
                ) else ColumnKind.STRING
            cols.append(Column(col, kind, declared.get(col, {}).get("distinct")))
        schema = Schema(tuple(cols))
        tables[name] = (schema, [rows for _, _, rows in sorted(owners)])
    return Database.from_rows(tables)


def _is_int(s: str) -> bool:
    try:
        int(s)
    except ValueError:
        return False
    return True


# --- query operators -------------------------------------------------------


class OpKind(str, enum.Enum):
    SCAN = "Scan"
    FILTER = "Filter"
    PROJECT = "Project"
    EQUI_JOIN = "EquiJoin"
    CROSS_PRODUCT = "CrossProduct"
    DISTINCT = "Distinct"
    SORT = "Sort"
    LIMIT = "Limit"
    COUNT = "CountAggregate"
    GROUP_COUNT = "GroupByCount"


ARITY = {
    OpKind.SCAN: 0,
    OpKind.EQUI_JOIN: 2,
    OpKind.CROSS_PRODUCT: 2,
}

COMPARISONS = ("=", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class Comparison:
    """``column <op> value`` or ``column <op> other``."""

    column: str
    op: str
    value: Any = None
    other: str | None = None
    left_index: int = -1
    other_index: int = -1


@dataclass(eq=False)
class Operator:
    kind: OpKind
    params: dict
    children: tuple[Operator, ...] = ()
    schema: Schema | None = None
    op_id: int = -1
    sensitivity: int = 0
    epsilon_share: float = 0.0
    delta_share: float = 0.0
    padded_size_formula: str = ""

    def __repr__(self):
        return f"{self.kind.value}#{self.op_id}"


@dataclass
class QueryDag:
    root: Operator
    operators: list[Operator]
    referenced_tables: frozenset[str] = field(default_factory=frozenset)

    def __len__(self):
        return len(self.operators)

    def child_ids(self, op: Operator) -> tuple[int, ...]:
        return tuple(c.op_id for c in op.children)

    def annotated(
        self,
        sensitivities: Sequence[int] | None = None,
        shares: Sequence[tuple[float, float]] | None = None,
    ) -> QueryDag:
        """Copy of the DAG with per-operator sensitivities and/or budget shares."""
        new: list[Operator] = []
        for op in self.operators:
            kw = {"children": tuple(new[c.op_id] for c in op.children)}
            if sensitivities is not None:
                kw["sensitivity"] = int(sensitivities[op.op_id])
            if shares is not None:
                kw["epsilon_share"], kw["delta_share"] = map(float, shares[op.op_id])
            new.append(replace(op, **kw))
        return QueryDag(new[-1], new, self.referenced_tables)


def _as_list(x) -> list:
    if x is None:
        return []
    return list(x) if isinstance(x, (list, tuple)) else [x]


def build_dag(plan_spec: Mapping | Operator, schemas: Mapping[str, Schema]) -> QueryDag:
    """Validate a nested ``{op, params, children}`` document into a bottom-up DAG.

    Nodes may carry an ``id``; a node ``{"ref": id}`` points at a node defined
    elsewhere, which makes it shared and is rejected.
    """
    seen_ids: dict[str, Mapping] = {}
    seen_objs: set[int] = set()

    def node(spec) -> Operator:
        if isinstance(spec, Operator):
            if id(spec) in seen_objs:
                raise DagError(f"operator {spec.kind.value} has more than one parent")
            seen_objs.add(id(spec))
            children = tuple(node(c) for c in spec.children)
            return _bind(spec.kind, dict(spec.params), children, schemas)
        if "ref" in spec:
            raise DagError(f"node {spec['ref']!r} is referenced by more than one parent")
        if "id" in spec:
            if spec["id"] in seen_ids:
                raise DagError(f"duplicate node id {spec['id']!r}")
            seen_ids[spec["id"]] = spec
        try:
            kind = OpKind(spec["op"])
        except (KeyError, ValueError):
            raise DagError(f"unsupported operator {spec.get('op')!r}") from None
        children = tuple(node(c) for c in spec.get("children", []))
        return _bind(kind, dict(spec.get("params", {})), children, schemas)

    root = node(plan_spec)

    height: dict[int, int] = {}
    dfs: list[Operator] = []

    def walk(op: Operator) -> int:
        h = 1 + max((walk(c) for c in op.children), default=-1)
        height[id(op)] = h
        dfs.append(op)
        return h

    walk(root)
    order = sorted(range(len(dfs)), key=lambda i: (height[id(dfs[i])], i))
    ops = [dfs[i] for i in order]
    for i, op in enumerate(ops):
        op.op_id = i
    tables = frozenset(op.params["table"] for op in ops if op.kind is OpKind.SCAN)
    return QueryDag(root, ops, tables)


def _bind(kind: OpKind, params: dict, children: tuple[Operator, ...], schemas) -> Operator:
    want = ARITY.get(kind, 1)
    if len(children) != want:
        raise DagError(f"{kind.value} takes {want} children, got {len(children)}")
    ins = [c.schema for c in children]

    if kind is OpKind.SCAN:
        table = params.get("table")
        if table not in schemas:
            raise DagError(f"unknown table {table!r}")
        alias = params.setdefault("alias", table)
        base = schemas[table]
        schema = Schema(
            tuple(replace(c, name=f"{alias}.{c.name}", origin=f"{table}.{c.name}") for c in base.columns)
        )
        formula = f"n({alias})"
    elif kind is OpKind.FILTER:
        preds = [p if isinstance(p, Comparison) else Comparison(**p) for p in _as_list(params.get("predicate"))]
        if not preds:
            raise DagError("Filter needs at least one predicate")
        bound = []
        for p in preds:
            if p.op not in COMPARISONS:
                raise DagError(f"unsupported comparison {p.op!r}")
            oi = ins[0].index(p.other) if p.other is not None else -1
            bound.append(replace(p, left_index=ins[0].index(p.column), other_index=oi))
        params["predicate"] = bound
        schema = ins[0]
        formula = children[0].padded_size_formula
    elif kind in (OpKind.PROJECT, OpKind.DISTINCT, OpKind.GROUP_COUNT):
        cols = _as_list(params.get("columns")) or (
            list(ins[0].names) if kind is OpKind.DISTINCT else []
        )
        if not cols:
            raise DagError(f"{kind.value} needs columns")
        idx = [ins[0].index(c) for c in cols]
        params["columns"] = [ins[0].names[i] for i in idx]
        params["indices"] = idx
        picked = [ins[0].columns[i] for i in idx]
        if kind is OpKind.GROUP_COUNT:
            picked.append(Column("count"))
        schema = Schema(tuple(picked))
        formula = children[0].padded_size_formula
    elif kind is OpKind.EQUI_JOIN:
        lk = _as_list(params.get("left_keys"))
        rk = _as_list(params.get("right_keys"))
        if not lk or len(lk) != len(rk):
            raise DagError("EquiJoin needs matching non-empty left_keys/right_keys")
        params["left_indices"] = [ins[0].index(c) for c in lk]
        params["right_indices"] = [ins[1].index(c) for c in rk]
        params["left_keys"] = [ins[0].names[i] for i in params["left_indices"]]
        params["right_keys"] = [ins[1].names[i] for i in params["right_indices"]]
        schema = Schema(ins[0].columns + ins[1].columns)
        formula = f"({children[0].padded_size_formula})*({children[1].padded_size_formula})"
    elif kind is OpKind.CROSS_PRODUCT:
        schema = Schema(ins[0].columns + ins[1].columns)
        formula = f"({children[0].padded_size_formula})*({children[1].padded_size_formula})"
    elif kind is OpKind.SORT:
        keys = []
        for k in _as_list(params.get("keys")):
            col, desc = (k, False) if isinstance(k, str) else (k[0], bool(k[1]))
            keys.append((ins[0].names[ins[0].index(col)], desc))
        if not keys:
            raise DagError("Sort needs keys")
        params["keys"] = keys
        params["indices"] = [(ins[0].index(c), d) for c, d in keys]
        schema = ins[0]
        formula = children[0].padded_size_formula
    elif kind is OpKind.LIMIT:
        k = params.get("k")
        if not isinstance(k, int) or k < 0:
            raise DagError("Limit needs a non-negative integer k")
        schema = ins[0]
        formula = f"min({k}, {children[0].padded_size_formula})"
    elif kind is OpKind.COUNT:
        schema = Schema((Column("count"),))
        formula = "1"
    else:  # pragma: no cover - OpKind is closed
        raise DagError(f"unsupported operator {kind}")
    return Operator(kind, params, children, schema, padded_size_formula=formula)


def dag_from_json(path: str | Path, schemas: Mapping[str, Schema]) -> QueryDag:
    return build_dag(json.loads(Path(path).read_text()), schemas)
