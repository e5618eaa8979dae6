"""Plain, non-private reference evaluation over python values.

Deliberately naive: nested loops, no numpy, no padding.  Row order follows
the same conventions as the padded engine (left-major joins, first
occurrence for DISTINCT and GROUP BY, stable sorts), so LIMIT agrees too.
"""

from __future__ import annotations

import operator
from collections.abc import Mapping

from .relational import Database, OpKind, QueryDag

_OPS = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


def _eval_all(dag: QueryDag, tables: Mapping[str, list[tuple]]) -> list[list[tuple]]:
    out: list[list[tuple]] = [[] for _ in dag.operators]
    for op in dag.operators:
        kind = op.kind
        ins = [out[c.op_id] for c in op.children]
        if kind is OpKind.SCAN:
            rows = list(tables[op.params["table"]])
        elif kind is OpKind.FILTER:
            rows = []
            for r in ins[0]:
                ok = True
                for p in op.params["predicate"]:
                    rhs = r[p.other_index] if p.other is not None else p.value
                    if isinstance(r[p.left_index], int) and not isinstance(rhs, int):
                        rhs = int(rhs)
                    if not _OPS[p.op](r[p.left_index], rhs):
                        ok = False
                        break
                if ok:
                    rows.append(r)
        elif kind is OpKind.PROJECT:
            rows = [tuple(r[i] for i in op.params["indices"]) for r in ins[0]]
        elif kind is OpKind.EQUI_JOIN:
            li, ri = op.params["left_indices"], op.params["right_indices"]
            rows = [
                a + b
                for a in ins[0]
                for b in ins[1]
                if all(a[i] == b[j] for i, j in zip(li, ri))
            ]
        elif kind is OpKind.CROSS_PRODUCT:
            rows = [a + b for a in ins[0] for b in ins[1]]
        elif kind is OpKind.DISTINCT:
            seen = set()
            rows = []
            for r in ins[0]:
                key = tuple(r[i] for i in op.params["indices"])
                if key not in seen:
                    seen.add(key)
                    rows.append(key)
        elif kind is OpKind.GROUP_COUNT:
            counts: dict[tuple, int] = {}
            for r in ins[0]:
                key = tuple(r[i] for i in op.params["indices"])
                counts[key] = counts.get(key, 0) + 1
            rows = [k + (v,) for k, v in counts.items()]
        elif kind is OpKind.COUNT:
            rows = [(len(ins[0]),)]
        elif kind is OpKind.SORT:
            rows = list(ins[0])
            for i, desc in reversed(op.params["indices"]):
                rows.sort(key=lambda r: r[i], reverse=desc)
        elif kind is OpKind.LIMIT:
            rows = ins[0][: op.params["k"]]
        else:  # pragma: no cover
            raise ValueError(kind)
        out[op.op_id] = rows
    return out


def oracle_eval(dag: QueryDag, tables: Mapping[str, list[tuple]] | Database) -> list[tuple]:
    """Result rows of the query root."""
    return _eval_all(dag, _tables(dag, tables))[dag.root.op_id]


def oracle_cardinalities(dag: QueryDag, tables: Mapping[str, list[tuple]] | Database) -> list[int]:
    """True output size of every operator, indexed by ``op_id``."""
    return [len(rows) for rows in _eval_all(dag, _tables(dag, tables))]


def _tables(dag, tables):
    if isinstance(tables, Database):
        return {name: tables.python_rows(name) for name in dag.referenced_tables}
    return tables
