"""Splittable demands via expansion into unit-demand leaves."""

from __future__ import annotations

import math
import os
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Callable

from .bounds import tree_tsp_cost
from .model import BudgetExceeded, Instance, Solution, Tour, VertexMap, verify


def _expand_budget() -> int:
    return int(os.environ.get("TREECVRP_EXPAND_MAX_DEMAND", 100_000))


def expand(instance: Instance) -> tuple[Instance, VertexMap]:
    """Hang a complete binary tree of d(v) zero-weight leaves under each terminal v.

    The tree is heap-shaped (left-filled); its leaves carry one unit each.
    A terminal with d(v) = 1 simply gets one leaf child.
    """
    total = instance.total_demand
    if total > _expand_budget():
        raise BudgetExceeded(
            f"expansion would create {total} leaves (budget {_expand_budget()}); "
            "peel full tours first or raise TREECVRP_EXPAND_MAX_DEMAND"
        )
    parent = list(instance.parent)
    weight = list(instance.weight)
    demand = [0] * instance.n
    backward = {v: v for v in range(instance.n)}
    for v in instance.terminals:
        d = instance.demand[v]
        base = len(parent)
        # heap node i lives at base + i; its leaves are nodes d-1 .. 2d-2
        for i in range(2 * d - 1):
            parent.append(v if i == 0 else base + (i - 1) // 2)
            weight.append(Fraction(0))
            is_leaf = i >= d - 1
            demand.append(1 if is_leaf else 0)
            if is_leaf:
                backward[base + i] = v
    out = Instance(tuple(parent), tuple(weight), tuple(demand), instance.capacity, instance.root)
    return out, VertexMap.from_backward(backward)


def contract_solution(
    original: Instance, expanded: Instance, vmap: VertexMap, unit_solution: Solution
) -> Solution:
    """Merge claims on expansion leaves into (vertex, units) claims."""
    report = verify(expanded, unit_solution)
    if not report.feasible:
        raise ValueError(f"cannot contract an infeasible solution: {report.violations[0].detail}")
    return vmap.pull_back(original, unit_solution)


def peel_full_tours(instance: Instance, threshold=math.inf) -> tuple[Instance, list[Tour]]:
    """Send floor(d/k) dedicated full tours to every terminal with d > threshold * k.

    Heuristic preprocessing; optimality is not claimed.
    """
    k = instance.capacity
    demand = list(instance.demand)
    prepaid = []
    for v in instance.terminals:
        if demand[v] > threshold * k:
            q = demand[v] // k
            prepaid.extend(Tour(((v, k),)) for _ in range(q))
            demand[v] -= q * k
    reduced = Instance(instance.parent, instance.weight, tuple(demand), k, instance.root)
    return reduced, prepaid


def solve_splittable(
    instance: Instance, solver: Callable[[Instance], Solution], peel_threshold=math.inf
) -> tuple[Solution, dict]:
    """Peel (optionally), expand, solve as unit demand and contract."""
    reduced, prepaid = peel_full_tours(instance, peel_threshold)
    meta = {"splittable": True, "prepaid_tours": len(prepaid)}
    if prepaid:
        meta["heuristic_preprocessing"] = "peel_full_tours"
    tours = list(prepaid)
    if reduced.terminals:
        expanded, vmap = expand(reduced)
        unit = solver(expanded)
        tours.extend(contract_solution(reduced, expanded, vmap, unit).tours)
    sol = Solution.build(instance, tours)
    if not verify(instance, sol).feasible:
        raise AssertionError("splittable pipeline produced an infeasible solution")
    return sol, meta


def brute_force_splittable(instance: Instance) -> Fraction:
    """Optimal splittable cost by search over remaining-demand vectors (tiny instances)."""
    terms = list(instance.terminals)
    if instance.total_demand > int(os.environ.get("TREECVRP_BRUTE_MAX_DEMAND", 12)):
        raise BudgetExceeded("brute force limited to total demand 12")
    k = instance.capacity

    @lru_cache(maxsize=None)
    def best(rem: tuple) -> Fraction:
        first = next((i for i, r in enumerate(rem) if r), None)
        if first is None:
            return Fraction(0)
        out = None
        ranges = [range(1, min(rem[first], k) + 1)] + [
            range(0, min(r, k) + 1) for r in rem[first + 1 :]
        ]
        for take in product(*ranges):
            if sum(take) > k:
                continue
            support = [terms[first + j] for j, u in enumerate(take) if u]
            nxt = rem[:first] + tuple(r - u for r, u in zip(rem[first:], take))
            val = tree_tsp_cost(instance, support) + best(nxt)
            if out is None or val < out:
                out = val
        return out

    return best(tuple(instance.demand[v] for v in terms))
