"""Solver dispatch and the benchmark harness."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from .baselines import exact_config_dp, exact_partition_dp, greedy, itp
from .bounds import lb_edge
from .generators import generate
from .model import BudgetExceeded, Instance, instance_from_dict, instance_to_dict, read_instance, verify
from .ptas_dp import PtasParams, run_ptas
from .splittable import solve_splittable
from .transforms import solve_banded

ALGOS = ("exact", "exact_config", "itp", "greedy", "ptas")


class InfeasibleOutput(RuntimeError):
    pass


def _unit_solver(algo: str, params: PtasParams | None, meta: dict):
    if algo == "exact":
        return exact_partition_dp
    if algo == "exact_config":
        return exact_config_dp
    if algo == "greedy":
        return greedy
    if algo == "itp":
        meta["itp_offsets"] = "best_of_k"
        return itp
    if algo == "ptas":

        def solver(inst: Instance):
            p = params
            if p is None:
                p = PtasParams.from_epsilon(Fraction(1, 2), inst.capacity)
            res = run_ptas(inst, p)
            meta.setdefault("ptas", []).append(res.metadata)
            return res.solution

        return solver
    raise ValueError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGOS)}")


def run_algo(
    instance: Instance,
    algo: str,
    params: PtasParams | None = None,
    splittable: bool = False,
    peel_threshold=math.inf,
    bands: int | None = None,
):
    """Solve with one algorithm; returns (verified solution, metadata)."""
    meta: dict = {"algo": algo}
    solver = _unit_solver(algo, params, meta)
    if bands is not None:
        inner = solver
        meta["bands"] = bands

        def solver(inst):
            return solve_banded(inst, bands, inner)

    if not instance.is_unit_demand and not splittable:
        raise ValueError("instance has non-unit demands; pass --splittable to expand them")
    if splittable:
        sol, smeta = solve_splittable(instance, solver, peel_threshold)
        meta.update(smeta)
    else:
        sol = solver(instance)
    report = verify(instance, sol)
    if not report.feasible:
        raise InfeasibleOutput(f"{algo} produced an infeasible solution: {report.violations[0].detail}")
    if len(meta.get("ptas", [])) == 1:
        meta["ptas"] = meta["ptas"][0]
    return sol, meta


# -- corpus and report ---------------------------------------------------------------


def corpus_from_family(family: str, count: int, seed: int, **kw) -> list[tuple[str, Instance]]:
    return [(f"{family}-{seed + i}", generate(family, seed + i, **kw)) for i in range(count)]


def corpus_from_dir(path) -> list[tuple[str, Instance]]:
    files = sorted(Path(path).glob("*.json"))
    return [(f.stem, read_instance(f.read_text())) for f in files]


def _ratio(cost: Fraction, lb: Fraction) -> str:
    if lb == 0:
        return "1.000000" if cost == 0 else "inf"
    return f"{float(cost / lb):.6f}"


def _bench_one(task):
    name, doc, algo, params = task
    inst = instance_from_dict(doc)
    lb = lb_edge(inst, "ceiling")
    start = time.perf_counter()
    try:
        sol, meta = run_algo(inst, algo, params, splittable=not inst.is_unit_demand)
    except BudgetExceeded as exc:
        row = {"instance": name, "algo": algo, "status": "budget", "detail": str(exc)}
        return row, time.perf_counter() - start
    elapsed = time.perf_counter() - start
    row = {
        "instance": name,
        "algo": algo,
        "status": "ok",
        "cost": str(sol.cost),
        "lb_edge": str(lb),
        "ratio": _ratio(sol.cost, lb),
        "tours": len(sol.tours),
        "metadata": meta,
    }
    return row, elapsed


def bench(corpus, algos, out=None, params: PtasParams | None = None, jobs: int = 1, seed=None) -> dict:
    """Run every algorithm on every instance, verifying each output.

    ``report.json`` and ``report.txt`` hold only deterministic fields; wall
    times go to ``timings.json``.
    """
    tasks = [(name, instance_to_dict(inst), algo, params) for name, inst in corpus for algo in algos]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_bench_one, tasks))
    else:
        results = [_bench_one(t) for t in tasks]
    rows = [r for r, _ in results]
    summary = {}
    for algo in algos:
        ratios = [float(r["ratio"]) for r in rows if r["algo"] == algo and r["status"] == "ok"]
        summary[algo] = {
            "runs": sum(r["algo"] == algo for r in rows),
            "solved": len(ratios),
            "mean_ratio": f"{sum(ratios) / len(ratios):.6f}" if ratios else None,
            "max_ratio": f"{max(ratios):.6f}" if ratios else None,
        }
    report = {
        "seed": seed,
        "algos": list(algos),
        "params": params.as_dict() if params else None,
        "rows": rows,
        "summary": summary,
    }
    timings = [
        {"instance": r["instance"], "algo": r["algo"], "seconds": round(t, 6)} for r, t in results
    ]
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        (out / "report.txt").write_text(render_table(report))
        (out / "timings.json").write_text(json.dumps(timings, indent=2) + "\n")
    return report


def render_table(report: dict) -> str:
    header = ("instance", "algo", "status", "cost", "lb_edge", "ratio", "tours")
    lines = [header]
    for r in report["rows"]:
        lines.append(tuple(str(r.get(h, "-")) for h in header))
    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    out = ["  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in lines]
    out.append("")
    for algo, s in report["summary"].items():
        out.append(
            f"{algo}: solved {s['solved']}/{s['runs']}, mean ratio {s['mean_ratio']}, "
            f"max ratio {s['max_ratio']}"
        )
    return "\n".join(out) + "\n"
