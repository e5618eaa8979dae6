"""Budget plans and the per-table privacy ledger."""

from __future__ import annotations

import enum
import json
import threading
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

EPS_SLACK = 1e-9
DELTA_SLACK = 1e-15


class Strategy(str, enum.Enum):
    BASELINE = "baseline"
    EAGER = "eager"
    UNIFORM = "uniform"
    OPTIMAL = "optimal"
    ORACLE = "oracle"


@dataclass(frozen=True)
class BudgetPlan:
    """Per-operator ``(epsilon_i, delta_i)`` shares, indexed by ``op_id``.

    ``epsilon_perf``/``delta_perf`` is the performance budget the shares are
    drawn from; ``epsilon_out``/``delta_out`` is what remains for the output.
    """

    shares: tuple[tuple[float, float], ...]
    epsilon_perf: float
    delta_perf: float
    epsilon_out: float = 0.0
    delta_out: float = 0.0
    strategy: Strategy = Strategy.BASELINE

    def __post_init__(self):
        eps = sum(e for e, _ in self.shares)
        dlt = sum(d for _, d in self.shares)
        if any(e < 0 or d < 0 for e, d in self.shares):
            raise ValueError("negative budget share")
        if eps > self.epsilon_perf + EPS_SLACK or dlt > self.delta_perf + DELTA_SLACK:
            raise ValueError(
                f"shares ({eps}, {dlt}) exceed the performance budget "
                f"({self.epsilon_perf}, {self.delta_perf})"
            )
        if self.epsilon_out < 0 or self.delta_out < 0:
            raise ValueError("negative output budget")

    @property
    def epsilons(self) -> list[float]:
        return [e for e, _ in self.shares]

    @property
    def private(self) -> bool:
        return self.strategy is not Strategy.ORACLE

    @classmethod
    def zeros(cls, n_ops: int, epsilon_out: float = 0.0, delta_out: float = 0.0) -> BudgetPlan:
        return cls(((0.0, 0.0),) * n_ops, 0.0, 0.0, epsilon_out, delta_out, Strategy.BASELINE)


class InsufficientBudget(RuntimeError):
    pass


def _exact(x: float | str | Fraction) -> Fraction:
    # decimal repr of the float, so 0.1 means one tenth rather than its binary value
    return x if isinstance(x, Fraction) else Fraction(repr(float(x)) if not isinstance(x, str) else x)


def _text(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class Charge:
    query_id: str
    table: str
    epsilon: Fraction
    delta: Fraction

    def to_json(self) -> dict:
        return {
            "type": "charge",
            "query_id": self.query_id,
            "table": self.table,
            "epsilon": _text(self.epsilon),
            "delta": _text(self.delta),
        }


class BudgetLedger:
    """Remaining ``(epsilon, delta)`` per table under sequential composition.

    Amounts are kept as exact fractions so that replaying the log reproduces
    the remaining budget bit for bit.  A charge either covers every table of
    the query or none of them.
    """

    def __init__(
        self,
        initial: Mapping[str, tuple[float, float]],
        default: tuple[float, float] | None = None,
        path: str | Path | None = None,
    ):
        self.initial = {t: (_exact(e), _exact(d)) for t, (e, d) in initial.items()}
        self.default = None if default is None else (_exact(default[0]), _exact(default[1]))
        self.remaining = dict(self.initial)
        self.log: list[Charge] = []
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()

    def _ensure(self, table: str) -> None:
        if table not in self.remaining:
            if self.default is None:
                raise InsufficientBudget(f"table {table!r} has no privacy budget")
            self.initial[table] = self.default
            self.remaining[table] = self.default

    def available(self, table: str) -> tuple[float, float]:
        with self._lock:
            self._ensure(table)
            e, d = self.remaining[table]
        return float(e), float(d)

    def can_charge(self, tables: Iterable[str], epsilon: float, delta: float) -> bool:
        e, d = _exact(epsilon), _exact(delta)
        with self._lock:
            try:
                for t in tables:
                    self._ensure(t)
            except InsufficientBudget:
                return False
            return all(self.remaining[t][0] >= e and self.remaining[t][1] >= d for t in tables)

    def charge(self, query_id: str, tables: Iterable[str], epsilon: float, delta: float) -> list[Charge]:
        e, d = _exact(epsilon), _exact(delta)
        if e < 0 or d < 0:
            raise ValueError("negative charge")
        tables = sorted(set(tables))
        with self._lock:
            for t in tables:
                self._ensure(t)
            short = [t for t in tables if self.remaining[t][0] < e or self.remaining[t][1] < d]
            if short:
                raise InsufficientBudget(
                    f"query {query_id!r} needs ({float(e)}, {float(d)}) but "
                    + ", ".join(f"{t} has {tuple(map(float, self.remaining[t]))}" for t in short)
                )
            new = [Charge(query_id, t, e, d) for t in tables]
            for c in new:
                re, rd = self.remaining[c.table]
                self.remaining[c.table] = (re - e, rd - d)
            self.log.extend(new)
            if self.path is not None:
                fresh = not self.path.exists()
                with self.path.open("a") as fh:
                    if fresh:
                        fh.write(json.dumps(self._header(), sort_keys=True) + "\n")
                    for c in new:
                        fh.write(json.dumps(c.to_json(), sort_keys=True) + "\n")
        return new

    def _header(self) -> dict:
        return {
            "type": "header",
            "budgets": {
                t: {"epsilon": _text(e), "delta": _text(d)} for t, (e, d) in sorted(self.initial.items())
            },
            "default": None
            if self.default is None
            else {"epsilon": _text(self.default[0]), "delta": _text(self.default[1])},
        }

    def replay(self) -> dict[str, tuple[Fraction, Fraction]]:
        """Recompute the remaining budgets from the initial ones and the log."""
        state = dict(self.initial)
        for c in self.log:
            e, d = state[c.table]
            state[c.table] = (e - c.epsilon, d - c.delta)
        return state

    def snapshot(self) -> dict:
        return {
            t: {"epsilon": float(e), "delta": float(d)} for t, (e, d) in sorted(self.remaining.items())
        }

    @classmethod
    def open(
        cls,
        path: str | Path,
        initial: Mapping[str, tuple[float, float]] | None = None,
        default: tuple[float, float] | None = None,
    ) -> BudgetLedger:
        """Load a JSON-lines ledger, or start one with the given budgets.

        Budgets in an existing file's header win over the arguments; tables
        first seen later get ``default``.
        """
        path = Path(path)
        if not path.exists():
            return cls(initial or {}, default, path)
        lines = [json.loads(l) for l in path.read_text().splitlines() if l.strip()]
        header, charges = lines[0], lines[1:]
        if header.get("type") != "header":
            raise ValueError(f"{path} does not start with a ledger header")
        budgets = {t: (Fraction(b["epsilon"]), Fraction(b["delta"])) for t, b in header["budgets"].items()}
        hdef = header.get("default")
        ledger = cls(
            budgets,
            (Fraction(hdef["epsilon"]), Fraction(hdef["delta"])) if hdef else default,
            path,
        )
        for c in charges:
            ch = Charge(c["query_id"], c["table"], Fraction(c["epsilon"]), Fraction(c["delta"]))
            ledger._ensure(ch.table)
            ledger.log.append(ch)
        ledger.remaining = ledger.replay()
        if any(e < 0 or d < 0 for e, d in ledger.remaining.values()):
            raise ValueError(f"{path} replays to a negative budget")
        return ledger
