"""Operator stability and bottom-up sensitivity of intermediate cardinalities."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

from .relational import OpKind, Operator, QueryDag

SENSITIVITY_GUARD = 2**62


class SensitivityError(ValueError):
    pass


@dataclass(frozen=True)
class SensitivityConfig:
    """Public bounds the analysis relies on.

    ``multiplicities`` maps ``table.column`` to the largest number of rows
    sharing one value of that join key.  ``table_sizes`` bounds cross-product
    inputs.
    """

    multiplicities: Mapping[str, int] = field(default_factory=dict)
    table_sizes: Mapping[str, int] = field(default_factory=dict)
    guard: int = SENSITIVITY_GUARD


def _key_multiplicity(op: Operator, side: int, config: SensitivityConfig) -> int | None:
    child = op.children[side]
    cols = op.params["left_indices" if side == 0 else "right_indices"]
    found = []
    for i in cols:
        origin = child.schema.columns[i].origin
        if origin is not None and origin in config.multiplicities:
            found.append(int(config.multiplicities[origin]))
    # a composite key is at most as repeated as its least-repeated part
    return min(found) if found else None


def padded_bound(op: Operator, table_sizes: Mapping[str, int]) -> int:
    """Exhaustive-padding capacity of ``op`` computed from public table sizes."""
    if op.kind is OpKind.SCAN:
        return int(table_sizes[op.params["table"]])
    ins = [padded_bound(c, table_sizes) for c in op.children]
    if op.kind in (OpKind.EQUI_JOIN, OpKind.CROSS_PRODUCT):
        return ins[0] * ins[1]
    if op.kind is OpKind.COUNT:
        return 1
    if op.kind is OpKind.LIMIT:
        return min(op.params["k"], ins[0])
    return ins[0]


def operator_stability(op: Operator, config: SensitivityConfig) -> int:
    if op.kind is OpKind.EQUI_JOIN:
        if "m" in op.params:
            return int(op.params["m"])
        sides = [_key_multiplicity(op, s, config) for s in (0, 1)]
        if None in sides:
            side = op.params["left_keys" if sides[0] is None else "right_keys"]
            raise SensitivityError(f"join key {side} has no declared multiplicity bound")
        return max(*sides, 1)
    if op.kind is OpKind.CROSS_PRODUCT:
        try:
            return max(1, *(padded_bound(c, config.table_sizes) for c in op.children))
        except KeyError as e:
            raise SensitivityError(f"cross product needs the size of table {e}") from None
    return 1


def propagate_sensitivity(dag: QueryDag, config: SensitivityConfig) -> QueryDag:
    sens = [0] * len(dag)
    below: list[frozenset[str]] = [frozenset()] * len(dag)
    for op in dag.operators:
        if op.kind is OpKind.SCAN:
            sens[op.op_id] = 1
            below[op.op_id] = frozenset([op.params["table"]])
            continue
        s = operator_stability(op, config)
        child = [sens[c.op_id] for c in op.children]
        below[op.op_id] = frozenset().union(*(below[c.op_id] for c in op.children))
        if len(op.children) == 2 and below[op.children[0].op_id] & below[op.children[1].op_id]:
            # one added row reaches both inputs (a self-join), so both sides change at once
            sens[op.op_id] = s * sum(child)
        else:
            sens[op.op_id] = s * max(child)
        if sens[op.op_id] > config.guard:
            raise SensitivityError(f"sensitivity of {op!r} exceeds {config.guard}")
    return dag.annotated(sensitivities=sens)


def tables_touched(dag: QueryDag) -> set[str]:
    return {op.params["table"] for op in dag.operators if op.kind is OpKind.SCAN}
