"""Exhaustively padded operator evaluation, DP resizing and access accounting.

Secure arrays are simulated: a :class:`~dpfed.relational.PaddedTable` keeps
only its real rows plus the capacity, and every operator charges the reads
and writes a dense oblivious implementation would perform.  The oblivious
sort in :func:`resize` is a stable partition charged at bitonic-network cost.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .budget import BudgetPlan
from .noise import RngSeed, laplace_output, tlap_new, tlap_sample
from .relational import (
    CAPACITY_GUARD,
    ColumnKind,
    Comparison,
    Database,
    OpKind,
    Operator,
    PaddedTable,
    QueryDag,
    StringPool,
)

OUTPUT_STREAM = 1 << 20


class Policy(str, enum.Enum):
    TRUE_ANSWER = "true"
    NOISY_ANSWER = "noisy"


class ExecutionError(ValueError):
    pass


def sort_passes(n: float) -> int:
    """``ceil(log2 n)``, with arrays of 0 or 1 slots charged one pass."""
    return 1 if n <= 1 else math.ceil(math.log2(n))


@dataclass(frozen=True)
class Access:
    phase: str  # "op", "sort" or "copy"
    mode: str  # "read" or "write"
    count: int
    array_size: int


@dataclass
class OperatorTrace:
    op_id: int
    kind: str
    capacity_in: tuple[int, ...]
    capacity_padded: int = 0
    capacity_out: int = 0
    true_c: int = 0
    noisy_c: int | None = None
    accesses: list[Access] = field(default_factory=list)
    sort_comparisons: int = 0

    def read(self, count: int, array_size: int, phase: str = "op") -> None:
        self.accesses.append(Access(phase, "read", int(count), int(array_size)))

    def write(self, count: int, array_size: int, phase: str = "op") -> None:
        self.accesses.append(Access(phase, "write", int(count), int(array_size)))

    def _total(self, mode: str, phase: str | None = None) -> int:
        return sum(a.count for a in self.accesses if a.mode == mode and phase in (None, a.phase))

    @property
    def reads(self) -> int:
        return self._total("read")

    @property
    def writes(self) -> int:
        return self._total("write")

    def cost(self, profile) -> float:
        """Cost of the recorded accesses under a :class:`~dpfed.costmodel.CostProfile`."""
        if profile.mode == "ram":
            return sum(
                a.count * (profile.c_read if a.mode == "read" else profile.c_write)(a.array_size)
                for a in self.accesses
            )
        total = 0.0
        for phase in ("op", "sort", "copy"):
            gates = self._total("read", phase) + self._total("write", phase)
            if phase == "op":
                n_in, n_out = sum(self.capacity_in), math.prod(self.capacity_in)
            elif self.noisy_c is None:
                continue
            elif phase == "sort":
                n_in = n_out = self.capacity_padded
            else:
                n_in, n_out = self.capacity_padded, self.noisy_c
            total += profile.circuit(n_in, gates, n_out)
        return total

    def report(self, debug: bool = False) -> dict:
        out = {
            "op_id": self.op_id,
            "kind": self.kind,
            "capacity_in": list(self.capacity_in),
            "capacity_padded": self.capacity_padded,
            "capacity_out": self.capacity_out,
            "noisy_c": self.noisy_c,
            "reads": self.reads,
            "writes": self.writes,
            "sort_comparisons": self.sort_comparisons,
        }
        if debug:
            out["true_c"] = self.true_c
        return out


@dataclass
class IoTrace:
    operators: list[OperatorTrace] = field(default_factory=list)

    @property
    def reads(self) -> int:
        return sum(t.reads for t in self.operators)

    @property
    def writes(self) -> int:
        return sum(t.writes for t in self.operators)

    @property
    def sort_comparisons(self) -> int:
        return sum(t.sort_comparisons for t in self.operators)

    def cost(self, profile) -> float:
        return sum(t.cost(profile) for t in self.operators)

    def report(self, debug: bool = False) -> list[dict]:
        return [t.report(debug) for t in self.operators]


@dataclass(frozen=True)
class ResizeOutcome:
    op_id: int
    true_c: int
    noise: int | None
    noisy_c: int
    clamped: bool
    new_capacity: int


# --- operators ---------------------------------------------------------------


def _literal(p: Comparison, table: PaddedTable, pool: StringPool) -> int:
    col = table.schema.columns[p.left_index]
    if col.kind is ColumnKind.STRING:
        return pool.encode(str(p.value))
    return int(p.value)


_COMPARE = {
    "=": np.equal,
    "!=": np.not_equal,
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
}


def _mask(preds: Sequence[Comparison], t: PaddedTable, pool: StringPool) -> np.ndarray:
    keep = np.ones(t.true_cardinality, dtype=bool)
    for p in preds:
        lhs = t.data[:, p.left_index]
        rhs = t.data[:, p.other_index] if p.other is not None else _literal(p, t, pool)
        keep &= _COMPARE[p.op](lhs, rhs)
    return keep


def _first_occurrence(keys: np.ndarray):
    """Unique rows of ``keys`` in order of first appearance, with counts."""
    if len(keys) == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    _, first, counts = np.unique(keys, axis=0, return_index=True, return_counts=True)
    order = np.argsort(first, kind="stable")
    return first[order], counts[order]


def _guard(capacity: int) -> int:
    if capacity > CAPACITY_GUARD:
        raise OverflowError(f"padded capacity {capacity} exceeds 2**62")
    return capacity


def exec_operator(
    op: Operator,
    inputs: Sequence[PaddedTable],
    pool: StringPool | None = None,
    trace: OperatorTrace | None = None,
) -> PaddedTable:
    """Evaluate one operator with exhaustive padding, charging its accesses to ``trace``."""
    pool = pool or StringPool()
    trace = trace if trace is not None else OperatorTrace(op.op_id, op.kind.value, ())
    trace.capacity_in = tuple(t.capacity for t in inputs)
    kind = op.kind
    for child, t in zip(op.children, inputs):
        if child.schema is not None and child.schema.arity != t.schema.arity:
            raise ExecutionError(f"{op!r}: input arity {t.schema.arity}, expected {child.schema.arity}")

    if kind in (OpKind.EQUI_JOIN, OpKind.CROSS_PRODUCT):
        left, right = inputs
        n1, n2 = left.capacity, right.capacity
        cap = _guard(n1 * n2)
        if kind is OpKind.EQUI_JOIN:
            li, ri = kernels.join_pairs(
                np.ascontiguousarray(left.data[:, op.params["left_indices"]]),
                np.ascontiguousarray(right.data[:, op.params["right_indices"]]),
            )
        else:
            li = np.repeat(np.arange(left.true_cardinality), right.true_cardinality)
            ri = np.tile(np.arange(right.true_cardinality), left.true_cardinality)
        data = np.hstack([left.data[li], right.data[ri]])
        out = PaddedTable(op.schema, data, left.slots[li] * n2 + right.slots[ri], cap)
        trace.read(n1, n1)
        trace.read(n1 * n2, n2)
        trace.write(n1 * n2, cap)
    else:
        (src,) = inputs
        n = src.capacity
        if kind is OpKind.FILTER:
            keep = _mask(op.params["predicate"], src, pool)
            out = PaddedTable(op.schema, src.data[keep], src.slots[keep], n)
            trace.read(n, n)
            trace.write(n, n)
        elif kind is OpKind.PROJECT:
            out = PaddedTable(op.schema, src.data[:, op.params["indices"]], src.slots, n)
            trace.read(n, n)
            trace.write(n, n)
        elif kind is OpKind.DISTINCT:
            proj = src.data[:, op.params["indices"]]
            first, _ = _first_occurrence(proj)
            out = PaddedTable(op.schema, proj[first], src.slots[first], n)
            trace.read(n, n)
            trace.write(n, n)
        elif kind is OpKind.GROUP_COUNT:
            proj = src.data[:, op.params["indices"]]
            first, counts = _first_occurrence(proj)
            data = np.hstack([proj[first], counts.reshape(-1, 1)])
            out = PaddedTable(op.schema, data, src.slots[first], n)
            trace.read(n, n)
            trace.write(n, n)
        elif kind is OpKind.COUNT:
            out = PaddedTable(op.schema, np.array([[src.true_cardinality]]), np.array([0]), 1)
            trace.read(n, n)
            trace.write(1, n)
        elif kind is OpKind.SORT:
            keys = []
            for i, desc in reversed(op.params["indices"]):
                col = src.data[:, i]
                keys.append(-col if desc else col)
            order = np.lexsort(keys) if keys else np.arange(src.true_cardinality)
            out = PaddedTable(op.schema, src.data[order], np.arange(src.true_cardinality), n)
            passes = sort_passes(n)
            trace.sort_comparisons += n * passes * passes
            trace.read(n * passes * passes, n)
            trace.write(n * passes * passes, n)
        elif kind is OpKind.LIMIT:
            cap = min(op.params["k"], n)
            t = min(op.params["k"], src.true_cardinality)
            out = PaddedTable(op.schema, src.data[:t], np.arange(t), cap)
            trace.read(n, n)
            trace.write(cap, cap)
        else:
            raise ExecutionError(f"cannot evaluate {kind.value} here")
    trace.capacity_padded = out.capacity
    trace.capacity_out = out.capacity
    trace.true_c = out.true_cardinality
    return out


def resize(
    table: PaddedTable,
    epsilon: float,
    delta: float,
    sensitivity: int,
    rng: RngSeed | np.random.Generator | None = None,
    trace: OperatorTrace | None = None,
    op_id: int = -1,
    noise: int | None = None,
) -> tuple[PaddedTable, ResizeOutcome]:
    """Shrink ``table`` to ``true_c + TLap`` slots (never below the true count).

    ``noise`` overrides the sampled value, for tests.
    """
    c, n = table.true_cardinality, table.capacity
    if epsilon == 0:
        return table, ResizeOutcome(op_id, c, None, n, False, n)
    if epsilon < 0 or delta < 0:
        raise ValueError("negative privacy parameters")
    if delta == 0:
        raise ValueError("resizing with epsilon > 0 needs delta > 0")
    if noise is None:
        if rng is None:
            raise ValueError("resize needs an rng stream")
        noise = tlap_sample(tlap_new(epsilon, delta, sensitivity), rng)
    noise = max(int(noise), 0)
    noisy = min(c + noise, n)
    out = PaddedTable(table.schema, table.data, np.arange(c), noisy)
    if trace is not None:
        passes = sort_passes(n)
        trace.sort_comparisons += n * passes * passes
        trace.read(n * passes * passes, n, "sort")
        trace.write(n * passes * passes, n, "sort")
        trace.read(noisy, n, "copy")
        trace.write(noisy, noisy, "copy")
        trace.noisy_c = noisy
        trace.capacity_out = noisy
    return out, ResizeOutcome(op_id, c, noise, noisy, c + noise > n, noisy)


# --- m-party decomposition ---------------------------------------------------


@dataclass(frozen=True)
class PairwiseTask:
    index: int
    left_owner: int
    right_owner: int


def mparty_join_plan(owners: int, join: Operator | None = None) -> list[PairwiseTask]:
    """The ``owners**2`` two-party joins whose union is the full join."""
    if owners < 2:
        raise ValueError("the m-party decomposition needs at least two owners")
    if join is not None and join.kind is not OpKind.EQUI_JOIN:
        raise ValueError(f"expected an EquiJoin, got {join.kind.value}")
    tasks = [(a, b) for a in range(1, owners + 1) for b in range(1, owners + 1)]
    return [PairwiseTask(i, a, b) for i, (a, b) in enumerate(tasks)]


def union_padded(tables: Sequence[PaddedTable]) -> PaddedTable:
    """Concatenate secure arrays; slot offsets follow the input order."""
    offset = 0
    slots, data = [], []
    for t in tables:
        slots.append(t.slots + offset)
        data.append(t.data)
        offset += t.capacity
    return PaddedTable(tables[0].schema, np.concatenate(data), np.concatenate(slots), _guard(offset))


def execute_mparty_join(
    join: Operator,
    left_parts: Sequence[PaddedTable],
    right_parts: Sequence[PaddedTable],
    pool: StringPool | None = None,
    trace: OperatorTrace | None = None,
) -> PaddedTable:
    """Run the pairwise tasks and union them; per-task accesses merge in task order."""
    if len(left_parts) != len(right_parts):
        raise ValueError("both join inputs must be split across the same owners")
    tasks = mparty_join_plan(len(left_parts), join)
    pieces = []
    merged = trace if trace is not None else OperatorTrace(join.op_id, join.kind.value, ())
    for task in tasks:
        sub = OperatorTrace(join.op_id, join.kind.value, ())
        pieces.append(
            exec_operator(join, [left_parts[task.left_owner - 1], right_parts[task.right_owner - 1]], pool, sub)
        )
        merged.accesses.extend(sub.accesses)
    out = union_padded(pieces)
    merged.capacity_in = (sum(t.capacity for t in left_parts), sum(t.capacity for t in right_parts))
    merged.capacity_padded = merged.capacity_out = out.capacity
    merged.true_c = out.true_cardinality
    return out


# --- whole queries -----------------------------------------------------------


@dataclass
class ExecutionResult:
    rows: list[tuple]
    trace: IoTrace
    outcomes: list[ResizeOutcome]
    columns: tuple[str, ...]
    noisy_answer: list[float] | None = None
    output_scale: float | None = None


def execute_dag(
    dag: QueryDag,
    db: Database,
    plan: BudgetPlan,
    policy: Policy | str = Policy.TRUE_ANSWER,
    rng: RngSeed | int = 0,
    mparty: bool = False,
) -> ExecutionResult:
    """Run the operators bottom-up, resizing each output per its budget share."""
    policy = Policy(policy)
    rng = rng if isinstance(rng, RngSeed) else RngSeed(int(rng))
    if len(plan.shares) != len(dag):
        raise ExecutionError(f"plan has {len(plan.shares)} shares for {len(dag)} operators")
    if policy is Policy.NOISY_ANSWER:
        if dag.root.kind not in (OpKind.COUNT, OpKind.GROUP_COUNT):
            raise ExecutionError("noisy answers need a CountAggregate or GroupByCount root")
        if not plan.epsilon_out > 0:
            raise ExecutionError("noisy answers need a positive output budget")

    trace = IoTrace()
    outcomes: list[ResizeOutcome] = []
    results: list[PaddedTable | list[PaddedTable] | None] = [None] * len(dag)
    for op in dag.operators:
        eps, dlt = plan.shares[op.op_id]
        t = OperatorTrace(op.op_id, op.kind.value, ())
        if op.kind is OpKind.SCAN:
            if eps > 0:
                raise ExecutionError(f"{op!r}: scans are never resized")
            name = op.params["table"]
            if mparty and len(db.partitions[name]) > 1:
                results[op.op_id] = [PaddedTable.dense(op.schema, p.data) for p in db.partitions[name]]
            else:
                base = db.table(name)
                results[op.op_id] = PaddedTable(op.schema, base.data, base.slots, base.capacity)
            continue
        ins = [results[c.op_id] for c in op.children]
        split = [isinstance(x, list) for x in ins]
        if op.kind is OpKind.EQUI_JOIN and all(split) and len(ins[0]) == len(ins[1]):
            out = execute_mparty_join(op, ins[0], ins[1], db.pool, t)
        elif len(ins) == 1 and split[0] and eps == 0 and op.kind in (OpKind.FILTER, OpKind.PROJECT):
            # per-owner evaluation keeps the input split for a later pairwise join
            out = []
            for part in ins[0]:
                sub = OperatorTrace(op.op_id, op.kind.value, ())
                out.append(exec_operator(op, [part], db.pool, sub))
                t.accesses.extend(sub.accesses)
            t.capacity_in = (sum(p.capacity for p in ins[0]),)
            t.capacity_padded = t.capacity_out = sum(p.capacity for p in out)
            t.true_c = sum(p.true_cardinality for p in out)
        else:
            ins = [union_padded(x) if s else x for x, s in zip(ins, split)]
            out = exec_operator(op, ins, db.pool, t)
        if eps > 0:
            if isinstance(out, list):
                out = union_padded(out)
            if op.sensitivity < 1:
                raise ExecutionError(f"{op!r} has no sensitivity; run propagate_sensitivity first")
            out, outcome = resize(out, eps, dlt, op.sensitivity, rng.child(op.op_id), t, op.op_id)
            outcomes.append(outcome)
        trace.operators.append(t)
        results[op.op_id] = out

    final = results[dag.root.op_id]
    if isinstance(final, list):
        final = union_padded(final)
    root_schema = dag.root.schema
    rows = [db.decode_row(root_schema, r) for r in final.data.tolist()]
    result = ExecutionResult(rows, trace, outcomes, root_schema.names)
    if policy is Policy.NOISY_ANSWER:
        sens = max(dag.root.sensitivity, 1)
        out_rng = rng.child(OUTPUT_STREAM).generator()
        counts = [float(r[-1]) for r in rows]
        result.noisy_answer = [laplace_output(v, plan.epsilon_out, sens, out_rng) for v in counts]
        result.output_scale = sens / plan.epsilon_out
    return result
