"""RAM and circuit cost models plus Selinger-style cardinality estimates.

Everything here reads only public information: table sizes, schema
statistics and sensitivities.  :func:`model_plan_cost` is the plain-python
reference for the batched kernels used by the planner.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .budget import BudgetPlan
from .execution import sort_passes
from .kernels import codes
from .noise import tlap_mean, tlap_new
from .relational import Database, OpKind, Operator, QueryDag

CURVES = {
    "constant": codes.CONSTANT,
    "log2": codes.LOG2,
    "linear-log2-squared": codes.LINEAR_LOG2_SQUARED,
}

KIND_CODES = {
    OpKind.SCAN: codes.SCAN,
    OpKind.FILTER: codes.FILTER,
    OpKind.PROJECT: codes.PROJECT,
    OpKind.EQUI_JOIN: codes.JOIN,
    OpKind.CROSS_PRODUCT: codes.CROSS,
    OpKind.DISTINCT: codes.DISTINCT,
    OpKind.SORT: codes.SORT,
    OpKind.LIMIT: codes.LIMIT,
    OpKind.COUNT: codes.COUNT,
    OpKind.GROUP_COUNT: codes.GROUP_COUNT,
}


def _log2_floor1(n: float) -> float:
    return math.log2(n) if n > 2 else 1.0


def unit_cost(curve: str, n: float) -> float:
    if curve == "constant":
        return 1.0
    if curve == "log2":
        return _log2_floor1(n)
    if curve == "linear-log2-squared":
        return max(n, 1.0) * _log2_floor1(n) ** 2
    raise ValueError(f"unknown unit-cost curve {curve!r}")


@dataclass(frozen=True)
class CostProfile:
    """Unit costs of secure-array access (RAM) or circuit coefficients."""

    mode: str = "ram"
    read: str = "log2"
    write: str = "log2"
    c_in: float = 1.0
    c_g: float = 1.0
    c_d: float = 1.0
    c_out: float = 1.0

    def __post_init__(self):
        if self.mode not in ("ram", "circuit"):
            raise ValueError(f"unknown cost mode {self.mode!r}")
        for c in (self.read, self.write):
            if c not in CURVES:
                raise ValueError(f"unknown unit-cost curve {c!r}")
        coefs = (self.c_in, self.c_g, self.c_d, self.c_out)
        if not all(math.isfinite(c) and c >= 0 for c in coefs):
            raise ValueError("circuit coefficients must be finite and non-negative")

    @classmethod
    def from_config(cls, cfg: Mapping | None) -> CostProfile:
        return cls(**(cfg or {}))

    def to_json(self) -> dict:
        return dict(self.__dict__)

    def c_read(self, n: float) -> float:
        return unit_cost(self.read, n)

    def c_write(self, n: float) -> float:
        return unit_cost(self.write, n)

    def circuit(self, n_in: float, gates: float, n_out: float, depth: float | None = None) -> float:
        """Linear circuit cost; depth defaults to ``ceil(log2 n_out)``."""
        if depth is None:
            depth = sort_passes(n_out)
        return self.c_in * n_in + self.c_g * gates + self.c_d * depth + self.c_out * n_out

    @property
    def codes(self) -> np.ndarray:
        mode = codes.CIRCUIT if self.mode == "circuit" else codes.RAM
        return np.array([mode, CURVES[self.read], CURVES[self.write]], dtype=np.int64)

    @property
    def coefs(self) -> np.ndarray:
        return np.array([self.c_in, self.c_g, self.c_d, self.c_out], dtype=np.float64)


DEFAULT_PROFILE = CostProfile()


# --- public information and estimates ----------------------------------------


@dataclass(frozen=True)
class PublicInfo:
    """The public knowledge K: base table sizes and distinct-value estimates."""

    table_sizes: Mapping[str, int]
    distinct: Mapping[str, float] = field(default_factory=dict)

    @classmethod
    def from_database(cls, db: Database, distinct: Mapping[str, float] | None = None) -> PublicInfo:
        stats = {}
        for name, schema in db.schemas.items():
            for c in schema.columns:
                if c.distinct is not None:
                    stats[f"{name}.{c.name}"] = c.distinct
        stats.update(distinct or {})
        return cls(dict(db.table_sizes), stats)

    def distinct_of(self, origin: str | None, table_size: float) -> float:
        if origin is not None and origin in self.distinct:
            return float(self.distinct[origin])
        return max(10.0, table_size / 10)


@dataclass
class _Est:
    size: float
    distinct: dict[str, float]

    def v(self, col: str) -> float:
        return max(1.0, min(self.distinct[col], self.size)) if self.size >= 1 else 1.0


def _capped(distinct: Mapping[str, float], size: float) -> dict[str, float]:
    return {c: max(1.0, min(v, size)) for c, v in distinct.items()}


def estimate_cardinality(op: Operator, child_estimates: Sequence[_Est], K: PublicInfo) -> _Est:
    """Estimated true output size of ``op`` with per-column distinct counts."""
    kind = op.kind
    if kind is OpKind.SCAN:
        n = float(K.table_sizes[op.params["table"]])
        return _Est(n, {c.name: K.distinct_of(c.origin, n) for c in op.schema.columns})
    ch = child_estimates
    if kind is OpKind.FILTER:
        est, dist = ch[0].size, dict(ch[0].distinct)
        factor = 1.0
        for p in op.params["predicate"]:
            col = op.schema.names[p.left_index]
            if p.other is not None:
                other = op.schema.names[p.other_index]
                v = max(ch[0].v(col), ch[0].v(other))
                if p.op == "=":
                    factor /= v
                    dist[col] = dist[other] = min(dist[col], dist[other])
                elif p.op == "!=":
                    factor *= 1 - 1 / v
                else:
                    factor /= 3
            elif p.op == "=":
                factor /= ch[0].v(col)
                dist[col] = 1.0
            elif p.op == "!=":
                factor *= 1 - 1 / ch[0].v(col)
            else:
                factor /= 3
        size = est * factor
        return _Est(size, _capped(dist, size))
    if kind in (OpKind.EQUI_JOIN, OpKind.CROSS_PRODUCT):
        left, right = ch
        size = left.size * right.size
        dist = {**left.distinct, **right.distinct}
        if kind is OpKind.EQUI_JOIN:
            for lk, rk in zip(op.params["left_keys"], op.params["right_keys"]):
                size /= max(left.v(lk), right.v(rk))
                dist[lk] = dist[rk] = min(left.v(lk), right.v(rk))
        return _Est(size, _capped(dist, size))
    if kind is OpKind.PROJECT:
        return _Est(ch[0].size, {c: ch[0].distinct[c] for c in op.params["columns"]})
    if kind in (OpKind.DISTINCT, OpKind.GROUP_COUNT):
        combos = math.prod(ch[0].v(c) for c in op.params["columns"])
        size = min(ch[0].size, combos)
        dist = {c: ch[0].distinct[c] for c in op.params["columns"]}
        if kind is OpKind.GROUP_COUNT:
            dist["count"] = max(1.0, size)
        return _Est(size, _capped(dist, size))
    if kind is OpKind.SORT:
        return _Est(ch[0].size, dict(ch[0].distinct))
    if kind is OpKind.LIMIT:
        size = min(float(op.params["k"]), ch[0].size)
        return _Est(size, _capped(ch[0].distinct, size))
    if kind is OpKind.COUNT:
        return _Est(1.0, {"count": 1.0})
    raise ValueError(f"unknown operator kind {kind}")


def estimate_dag(dag: QueryDag, K: PublicInfo) -> list[float]:
    ests: list[_Est] = []
    for op in dag.operators:
        ests.append(estimate_cardinality(op, [ests[c.op_id] for c in op.children], K))
    return [e.size for e in ests]


# --- costs -------------------------------------------------------------------


def padded_size(kind: OpKind, sizes: Sequence[float], k: int | None = None) -> float:
    """Exhaustive-padding output size for the given input sizes."""
    if kind in (OpKind.EQUI_JOIN, OpKind.CROSS_PRODUCT):
        return sizes[0] * sizes[1]
    if kind is OpKind.COUNT:
        return 1.0
    if kind is OpKind.LIMIT:
        return min(float(k), sizes[0])
    return sizes[0]


def model_operator_cost(
    kind: OpKind, sizes: Sequence[float], profile: CostProfile = DEFAULT_PROFILE, k: int | None = None
) -> float:
    """Secure-computation cost of one operator on inputs of the given sizes."""
    if kind is OpKind.SCAN:
        return 0.0
    r, w = profile.c_read, profile.c_write
    n1 = sizes[0]
    if kind in (OpKind.EQUI_JOIN, OpKind.CROSS_PRODUCT):
        n2 = sizes[1]
        ram = n1 * r(n1) + n1 * n2 * r(n2) + n1 * n2 * w(n1 * n2)
        gates = n1 + 2 * n1 * n2
    elif kind in (OpKind.FILTER, OpKind.PROJECT, OpKind.DISTINCT, OpKind.GROUP_COUNT):
        ram = n1 * r(n1) + n1 * w(n1)
        gates = 2 * n1
    elif kind is OpKind.COUNT:
        ram = n1 * r(n1) + w(n1)
        gates = n1 + 1
    elif kind is OpKind.SORT:
        p = sort_passes(n1)
        ram = n1 * p**2 * (r(n1) + w(n1))
        gates = 2 * n1 * p**2
    elif kind is OpKind.LIMIT:
        kk = min(float(k), n1)
        ram = n1 * r(n1) + kk * w(kk)
        gates = n1 + kk
    else:
        raise ValueError(f"unknown operator kind {kind}")
    if profile.mode == "ram":
        return ram
    return profile.circuit(sum(sizes), gates, math.prod(sizes))


def cost_sort(n: float, profile: CostProfile = DEFAULT_PROFILE) -> float:
    return model_operator_cost(OpKind.SORT, [n], profile)


def cost_copy(n: float, n_new: float, profile: CostProfile = DEFAULT_PROFILE) -> float:
    if profile.mode == "ram":
        return n_new * profile.c_read(n) + n_new * profile.c_write(n_new)
    return profile.circuit(n, 2 * n_new, n_new)


def noisy_size(
    padded: float, estimate: float, epsilon: float, delta: float, sensitivity: int
) -> float:
    """Modeled size after resizing: estimate plus expected noise, capped at the padding."""
    if epsilon <= 0:
        return padded
    return min(padded, estimate + tlap_mean(tlap_new(epsilon, delta, sensitivity)))


@dataclass
class OperatorCost:
    op_id: int
    sizes: tuple[float, ...]
    padded: float
    estimate: float
    noisy: float
    operator: float
    sort: float = 0.0
    copy: float = 0.0

    @property
    def total(self) -> float:
        return self.operator + self.sort + self.copy


def model_plan_breakdown(
    dag: QueryDag,
    plan: BudgetPlan,
    profile: CostProfile,
    K: PublicInfo,
    estimates: Sequence[float] | None = None,
) -> list[OperatorCost]:
    est = list(estimates) if estimates is not None else estimate_dag(dag, K)
    sizes: list[float] = [0.0] * len(dag)
    out = []
    for op in dag.operators:
        if op.kind is OpKind.SCAN:
            sizes[op.op_id] = float(K.table_sizes[op.params["table"]])
            continue
        ins = tuple(sizes[c.op_id] for c in op.children)
        k = op.params.get("k")
        padded = padded_size(op.kind, ins, k)
        eps, dlt = plan.shares[op.op_id]
        rec = OperatorCost(op.op_id, ins, padded, est[op.op_id], padded, model_operator_cost(op.kind, ins, profile, k))
        if eps > 0:
            rec.noisy = noisy_size(padded, est[op.op_id], eps, dlt, op.sensitivity)
            rec.sort = cost_sort(padded, profile)
            rec.copy = cost_copy(padded, rec.noisy, profile)
        sizes[op.op_id] = rec.noisy
        out.append(rec)
    return out


def model_plan_cost(
    dag: QueryDag,
    plan: BudgetPlan,
    profile: CostProfile,
    K: PublicInfo,
    estimates: Sequence[float] | None = None,
) -> float:
    """Modeled cost of running ``dag`` under ``plan``: operators plus resize sort and copy."""
    return sum(r.total for r in model_plan_breakdown(dag, plan, profile, K, estimates))


def realized_model_cost(dag: QueryDag, trace, profile: CostProfile) -> float:
    """Model cost evaluated on the capacities an execution actually produced."""
    total = 0.0
    for t in trace.operators:
        op = dag.operators[t.op_id]
        k = op.params.get("k")
        total += model_operator_cost(op.kind, t.capacity_in, profile, k)
        if t.noisy_c is not None:
            total += cost_sort(t.capacity_padded, profile) + cost_copy(t.capacity_padded, t.noisy_c, profile)
    return total
