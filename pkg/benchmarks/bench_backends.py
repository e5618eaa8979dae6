"""Time the numba kernels against the numpy fallbacks.

    python benchmarks/bench_backends.py [--repeat 5] [--out results.json]

Both backends are imported directly, so the env flag is not needed here.
Each timing is the best of ``--repeat`` runs after one warm-up call (which
also absorbs numba's compilation).
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from dpfed.costmodel import CostProfile, PublicInfo
from dpfed.kernels import _numpy
from dpfed.planner import compile_program, eligible_ops, lattice_steps
from dpfed.relational import build_dag
from dpfed.sensitivity import SensitivityConfig, propagate_sensitivity
from dpfed.synthetic import WORKLOAD, gen_synthetic, health_spec

try:
    from dpfed.kernels import _numba
except ImportError:
    _numba = None


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(grid_steps):
    db, catalog = gen_synthetic(health_spec(256, 0.1, 4))
    info = PublicInfo.from_database(db)
    for name in ("running_example", "three_join", "dosage_study"):
        dag = propagate_sensitivity(
            build_dag(WORKLOAD[name](), db.schemas),
            SensitivityConfig(catalog["multiplicities"], db.table_sizes),
        )
        for prof_name, prof in (("ram", CostProfile()), ("circuit", CostProfile(mode="circuit"))):
            k = lattice_steps(len(eligible_ops(dag)), grid_steps)
            prog = compile_program(dag, prof, info, 0.5, 5e-5, k)
            yield f"plan_costs/{name}/{prof_name}", prog, k, len(eligible_ops(dag))


def run(repeat, grid_steps):
    backends = {"numpy": _numpy}
    if _numba is not None:
        backends["numba"] = _numba
    rows = []
    for label, prog, k, parts in cases(grid_steps):
        lattice = _numpy.compositions(k, parts)
        args = (prog.kind, prog.c0, prog.c1, prog.param, prog.est, prog.elig,
                prog.mean_table, prog.profile, prog.coefs, lattice)
        row = {"case": label, "candidates": int(len(lattice))}
        for b, mod in backends.items():
            row[b] = best_of(lambda: mod.plan_costs(*args), repeat)
        rows.append(row)

    k, parts = 20, 5
    row = {"case": f"compositions/{k}/{parts}", "candidates": None}
    for b, mod in backends.items():
        row[b] = best_of(lambda: mod.compositions(k, parts), repeat)
    row["candidates"] = int(len(_numpy.compositions(k, parts)))
    rows.append(row)

    rng = np.random.default_rng(0)
    for n in (256, 1024, 4096):
        left = rng.integers(0, n // 4, (n, 1))
        right = rng.integers(0, n // 4, (n, 1))
        row = {"case": f"join_pairs/{n}x{n}", "candidates": None}
        for b, mod in backends.items():
            row[b] = best_of(lambda: mod.join_pairs(left, right), repeat)
        rows.append(row)
    for row in rows:
        if "numba" in row:
            row["speedup"] = row["numpy"] / row["numba"]
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--grid-steps", type=int, default=20)
    ap.add_argument("--out")
    args = ap.parse_args(argv)
    rows = run(args.repeat, args.grid_steps)
    if _numba is None:
        print("numba not importable; timing numpy only", file=sys.stderr)
    print(f"{'case':42s} {'cands':>8s} {'numpy ms':>10s} {'numba ms':>10s} {'x':>7s}")
    for r in rows:
        nb = f"{r['numba'] * 1e3:10.2f}" if "numba" in r else f"{'-':>10s}"
        sp = f"{r['speedup']:7.1f}" if "speedup" in r else f"{'-':>7s}"
        cands = "" if r["candidates"] is None else str(r["candidates"])
        print(f"{r['case']:42s} {cands:>8s} {r['numpy'] * 1e3:10.2f} {nb} {sp}")
    if args.out:
        with open(args.out, "w") as f:
            json.dump(rows, f, indent=2)


if __name__ == "__main__":
    main()
