"""Reference solvers: tour partitioning, greedy, and two exact oracles."""

from __future__ import annotations

import os
from fractions import Fraction
from itertools import combinations

from .bounds import tree_tsp_cost
from .model import BudgetExceeded, Instance, Solution, Tour, integer_weights

ITP_OFFSET_LIMIT = 10_000


def _require_unit(instance: Instance, what: str) -> None:
    if not instance.is_unit_demand:
        raise ValueError(f"{what} needs unit demands; expand splittable instances first")


def dfs_terminal_order(instance: Instance) -> list[int]:
    """Terminals in depth-first order, children visited by increasing id."""
    return [v for v in instance.preorder if instance.demand[v]]


def itp_groups(instance: Instance, offset: int = 0) -> list[list[int]]:
    """Cut the depth-first terminal sequence into runs of k, the first run of length ``offset``."""
    order = dfs_terminal_order(instance)
    k = instance.capacity
    groups = [order[:offset]] if offset else []
    groups += [order[i : i + k] for i in range(offset, len(order), k)]
    return [g for g in groups if g]


def itp_bound(instance: Instance, groups) -> Fraction:
    """Tree-TSP cost plus depot connections to the first and last terminal of each run."""
    dist = instance.dist
    return tree_tsp_cost(instance) + sum((dist[g[0]] + dist[g[-1]] for g in groups), Fraction(0))


def itp(instance: Instance, offset: int | str = "best") -> Solution:
    """Iterated tour partitioning along the depth-first tour.

    With ``offset="best"`` every offset in [0, k) is tried while there are at
    most ITP_OFFSET_LIMIT terminals; the cheapest wins, ties going to the
    smaller offset.
    """
    _require_unit(instance, "itp")
    k = instance.capacity
    if offset == "best":
        n_terms = len(instance.terminals)
        offsets = range(min(k, n_terms) if n_terms <= ITP_OFFSET_LIMIT else 1)
    else:
        offsets = [int(offset)]
    best = None
    for o in offsets:
        sol = Solution.build(instance, (Tour.of(g) for g in itp_groups(instance, o)))
        if best is None or sol.cost < best.cost:
            best = sol
    return best if best is not None else Solution((), Fraction(0))


def greedy(instance: Instance) -> Solution:
    """Open a tour, fill it with the deepest unserved terminals, repeat."""
    _require_unit(instance, "greedy")
    dist = instance.dist
    order = sorted(instance.terminals, key=lambda v: (-dist[v], v))
    k = instance.capacity
    return Solution.build(instance, (Tour.of(order[i : i + k]) for i in range(0, len(order), k)))


def _exact_budget() -> int:
    return int(os.environ.get("TREECVRP_EXACT_MAX_TERMINALS", 16))


def exact_partition_dp(instance: Instance, max_terminals: int | None = None) -> Solution:
    """Optimal partition of the terminals into groups of at most k by subset DP.

    Each group costs twice the weight of the subtree spanning the depot and
    the group.  The group containing the lowest remaining terminal is chosen
    at every step so each partition is met once.
    """
    _require_unit(instance, "exact_partition_dp")
    terms = list(instance.terminals)
    t = len(terms)
    if t == 0:
        return Solution((), Fraction(0))
    limit = _exact_budget() if max_terminals is None else max_terminals
    if t > limit:
        raise BudgetExceeded(
            f"exact oracle limited to {limit} terminals (got {t}); "
            "raise TREECVRP_EXACT_MAX_TERMINALS"
        )
    w, denom = integer_weights(instance)
    parent, root = instance.parent, instance.root
    ancestors = []
    for v in terms:
        path = []
        while v != root:
            path.append(v)
            v = parent[v]
        ancestors.append(path)
    full = (1 << t) - 1
    covered = [0] * (full + 1)  # vertex bitmask of the spanning subtree
    weight = [0] * (full + 1)
    for mask in range(1, full + 1):
        low = (mask & -mask).bit_length() - 1
        rest = mask & (mask - 1)
        cov, wt = covered[rest], weight[rest]
        for u in ancestors[low]:
            if cov >> u & 1:
                break
            cov |= 1 << u
            wt += w[u]
        covered[mask], weight[mask] = cov, wt

    k = instance.capacity
    best = [0] * (full + 1)
    choice = [0] * (full + 1)
    for mask in range(1, full + 1):
        low_bit = mask & -mask
        rest = mask ^ low_bit
        bits = [b for b in range(t) if rest >> b & 1]
        top = None
        for size in range(min(k - 1, len(bits)) + 1):
            for combo in combinations(bits, size):
                group = low_bit
                for b in combo:
                    group |= 1 << b
                val = 2 * weight[group] + best[mask ^ group]
                if top is None or val < top:
                    top, choice[mask] = val, group
        best[mask] = top
    tours, mask = [], full
    while mask:
        g = choice[mask]
        tours.append(Tour.of(terms[b] for b in range(t) if g >> b & 1))
        mask ^= g
    sol = Solution.build(instance, tours)
    if sol.cost != Fraction(best[full], denom):
        raise AssertionError("subset DP cost disagrees with its reconstruction")
    return sol


def exact_config_dp(instance: Instance, max_terminals: int | None = None) -> Solution:
    """Second exact oracle: the local configuration DP run on the whole tree as one component."""
    from .ptas_dp import PtasParams, solve_ptas

    _require_unit(instance, "exact_config_dp")
    if max_terminals is None:
        max_terminals = int(os.environ.get("TREECVRP_CONFIG_MAX_TERMINALS", 14))
    limit = max_terminals
    t = len(instance.terminals)
    if t == 0:
        return Solution((), Fraction(0))
    if t > limit:
        raise BudgetExceeded(
            f"configuration oracle limited to {limit} terminals (got {t}); "
            "raise TREECVRP_CONFIG_MAX_TERMINALS"
        )
    return solve_ptas(instance, PtasParams.exhaustive(gamma_k=None))


def exact(instance: Instance) -> Solution:
    return exact_partition_dp(instance)


def grouped_optimum(instance: Instance, groups) -> Solution:
    """Cheapest solution in which every group of terminals rides in a single tour."""
    groups = [list(g) for g in groups]
    if sorted(v for g in groups for v in g) != sorted(instance.terminals):
        raise ValueError("groups must partition the terminals")
    k = instance.capacity
    if any(len(g) > k for g in groups):
        raise ValueError("a group exceeds the capacity")
    t = len(groups)
    full = (1 << t) - 1
    size = [0] * (full + 1)
    for mask in range(1, full + 1):
        low = (mask & -mask).bit_length() - 1
        size[mask] = size[mask & (mask - 1)] + len(groups[low])
    best = {0: (Fraction(0), ())}
    for mask in range(1, full + 1):
        low_bit = mask & -mask
        rest = mask ^ low_bit
        top = None
        sub = rest
        while True:
            g = sub | low_bit
            if size[g] <= k:
                members = [v for i in range(t) if g >> i & 1 for v in groups[i]]
                val = tree_tsp_cost(instance, members) + best[mask ^ g][0]
                if top is None or val < top[0]:
                    top = (val, best[mask ^ g][1] + (tuple(members),))
            if sub == 0:
                break
            sub = (sub - 1) & rest
        best[mask] = top
    return Solution.build(instance, (Tour.of(sorted(g)) for g in best[full][1]))
