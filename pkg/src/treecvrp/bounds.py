"""Edge-load lower bounds and tree-TSP cost."""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable

from .model import Instance, path_weight_union


def edge_loads(instance: Instance) -> dict[int, tuple[int, Fraction]]:
    """Per edge (keyed by its child vertex): (demand strictly below, weight)."""
    sub = instance.subtree_demand
    return {v: (sub[v], instance.weight[v]) for v in range(instance.n) if v != instance.root}


def lb_edge(instance: Instance, mode: str = "ceiling") -> Fraction:
    """Every edge is crossed twice by enough tours to carry the demand below it.

    ``fractional`` uses n_e / k, ``ceiling`` uses ceil(n_e / k).
    """
    k = instance.capacity
    total = Fraction(0)
    for n_e, w in edge_loads(instance).values():
        if mode == "fractional":
            total += 2 * w * Fraction(n_e, k)
        elif mode == "ceiling":
            total += 2 * w * (-(-n_e // k))
        else:
            raise ValueError(f"unknown mode {mode!r}")
    return total


def lb_radial(instance: Instance) -> Fraction:
    """(2/k) * sum of demand-weighted depot distances."""
    dist = instance.dist
    return Fraction(2, instance.capacity) * sum(
        (instance.demand[v] * dist[v] for v in instance.terminals), Fraction(0)
    )


def tree_tsp_cost(instance: Instance, terminals: Iterable[int] | None = None) -> Fraction:
    """Twice the weight of the subtree spanning the depot and ``terminals``."""
    if terminals is None:
        terminals = instance.terminals
    return 2 * path_weight_union(instance, terminals)
