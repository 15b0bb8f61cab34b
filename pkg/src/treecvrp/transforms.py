"""Distance-band splitting, height reduction and lifting solutions back."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator

from .decomposition import Decomposition, check_decomposition
from .model import Instance, Solution, Tour, VertexMap, tour_cost, verify


# -- distance bands -------------------------------------------------------------


def band_index(d: Fraction, base: int) -> int:
    """The integer i with base**i <= d < base**(i+1); d must be positive."""
    if d <= 0:
        raise ValueError("band index needs a positive distance")
    i = 0
    if d >= 1:
        while Fraction(base) ** (i + 1) <= d:
            i += 1
    else:
        while Fraction(base) ** i > d:
            i -= 1
    return i


@dataclass(frozen=True)
class BandSet:
    tag: str  # "Y<j>", "Z<j>" or "depot"
    terminals: tuple[int, ...]
    instance: Instance


@dataclass(frozen=True)
class DistanceBands:
    inv_eps: int
    i0: int
    sets: tuple[BandSet, ...]

    def ratio_ok(self) -> bool:
        """Within each set D_max / D_min stays below base**(base - 1)."""
        limit = Fraction(self.inv_eps) ** (self.inv_eps - 1)
        for s in self.sets:
            if s.tag == "depot":
                continue
            d = [s.instance.dist[v] for v in s.terminals]
            if max(d) >= limit * min(d):
                return False
        return True


def split_by_distance(instance: Instance, inv_eps: int, i0: int) -> DistanceBands:
    """Group terminals into distance bands.

    Band U_i holds terminals with dist in [b^i, b^(i+1)) for b = inv_eps.
    With j indexing blocks of b consecutive bands starting at i0, the band at
    the start of a block forms Y_j and the remaining b-1 bands form Z_j.
    Terminals at distance 0 go into a separate "depot" set.
    Each set keeps the whole tree and only restricts the terminals.
    """
    if inv_eps < 2:
        raise ValueError("inv_eps must be at least 2")
    if not 0 <= i0 < inv_eps:
        raise ValueError(f"i0 must lie in [0, {inv_eps - 1}]")
    dist = instance.dist
    groups: dict[tuple[int, int], list[int]] = {}
    depot: list[int] = []
    for v in instance.terminals:
        if dist[v] == 0:
            depot.append(v)
            continue
        i = band_index(dist[v], inv_eps)
        j, r = divmod(i - i0, inv_eps)
        groups.setdefault((j, 0 if r == 0 else 1), []).append(v)
    sets = []
    if depot:
        sets.append(BandSet("depot", tuple(depot), instance.with_terminals(depot)))
    for (j, z), terms in sorted(groups.items()):
        tag = ("Z" if z else "Y") + str(j)
        sets.append(BandSet(tag, tuple(terms), instance.with_terminals(terms)))
    return DistanceBands(inv_eps, i0, tuple(sets))


def bands_u(instance: Instance, inv_eps: int) -> dict[int, tuple[int, ...]]:
    """Terminals grouped by band index i (distance-0 terminals excluded)."""
    out: dict[int, list[int]] = {}
    for v in instance.terminals:
        if instance.dist[v] > 0:
            out.setdefault(band_index(instance.dist[v], inv_eps), []).append(v)
    return {i: tuple(vs) for i, vs in sorted(out.items())}


def _depot_tours(instance: Instance, terminals) -> list[Tour]:
    k = instance.capacity
    tours = []
    for v in terminals:
        left = instance.demand[v]
        while left > 0:
            take = min(k, left)
            tours.append(Tour(((v, take),)))
            left -= take
    return tours


def banded_solutions(
    instance: Instance, inv_eps: int, sub_solver: Callable[[Instance], Solution], i0s=None
) -> Iterator[tuple[int, Solution]]:
    """Yield (i0, union of per-set solutions) for each offset."""
    for i0 in range(inv_eps) if i0s is None else i0s:
        bands = split_by_distance(instance, inv_eps, i0)
        tours: list[Tour] = []
        for s in bands.sets:
            if s.tag == "depot":
                tours.extend(_depot_tours(instance, s.terminals))
            else:
                tours.extend(sub_solver(s.instance).tours)
        yield i0, Solution.build(instance, tours)


def solve_banded(
    instance: Instance,
    inv_eps: int,
    sub_solver: Callable[[Instance], Solution],
    i0: int | str | None = None,
    seed: int | None = None,
) -> Solution:
    """Solve every band set separately and keep the cheapest offset.

    Pass an integer ``i0`` to use a single fixed offset instead of all of
    them, or ``i0="random"`` to draw one offset from ``seed``.
    """
    if i0 == "random":
        i0 = random.Random(seed).randrange(inv_eps)
    best = None
    for _, sol in banded_solutions(instance, inv_eps, sub_solver, None if i0 is None else [i0]):
        if best is None or sol.cost < best.cost:
            best = sol
    return best


# -- height reduction ---------------------------------------------------------------


def distance_class(d: Fraction, d_tilde: Fraction) -> int:
    """The i with d in [(i-1)*d_tilde, i*d_tilde)."""
    return math.floor(d / d_tilde) + 1


def class_count_bound(epsilon: Fraction) -> Fraction:
    """(1/eps)^(2/eps + 1), valid when 1/eps is an integer."""
    inv = 1 / Fraction(epsilon)
    if inv.denominator != 1:
        raise ValueError("class count bound needs 1/epsilon integral")
    return inv ** (2 * int(inv) + 1)


def exact_d_tilde(instance: Instance, dec: Decomposition) -> Fraction:
    """A class width that never separates equal root distances nor joins distinct ones.

    With it every reattachment edge has weight 0 and the reduced tree has
    the same tour costs as the original.
    """
    ds = sorted({instance.dist[c.root] for c in dec.components})
    gaps = [b - a for a, b in zip(ds, ds[1:])]
    return min(gaps) if gaps else Fraction(1)


@dataclass(frozen=True)
class HatTree:
    base: Instance
    instance: Instance
    vertex_map: VertexMap
    critical: frozenset[int]
    decomposition: Decomposition
    d_tilde: Fraction
    classes: dict[int, int]
    copy_of: dict[int, int]  # component id -> vertex id of its root in the reduced tree
    attachment: dict[int, tuple[int, Fraction]]  # component id -> (critical vertex, weight)

    @property
    def is_identity(self) -> bool:
        return self.instance is self.base


def build_hat_tree(instance: Instance, dec: Decomposition, d_tilde) -> HatTree:
    """Attach each component root directly under the critical vertex of its class set.

    Components are classed by the distance of their roots.  Within each
    maximal connected set of same-class components the shallowest root is
    the critical vertex.  Every component root gets a fresh copy, attached
    to that critical vertex by an edge whose weight is the original
    distance between them; the component's edges hang below the copy.
    """
    d_tilde = Fraction(d_tilde)
    if d_tilde <= 0:
        raise ValueError("d_tilde must be positive")
    comps = dec.components
    dist = instance.dist
    classes = {c.id: distance_class(dist[c.root], d_tilde) for c in comps}
    if len(comps) == 1:
        c = comps[0]
        ident = VertexMap.from_backward({v: v for v in range(instance.n)})
        return HatTree(instance, instance, ident, frozenset(), dec, d_tilde, classes,
                       {c.id: c.root}, {})

    uf = list(range(len(comps)))

    def find(a):
        while uf[a] != a:
            uf[a] = uf[uf[a]]
            a = uf[a]
        return a

    touching: dict[int, list[int]] = {}
    for c in comps:
        touching.setdefault(c.root, []).append(c.id)
        if c.exit is not None:
            touching.setdefault(c.exit, []).append(c.id)
    for ids in touching.values():
        for a in ids:
            for b in ids:
                if a < b and classes[a] == classes[b]:
                    uf[find(a)] = find(b)

    depth = instance.depth
    top: dict[int, int] = {}
    for c in comps:
        s = find(c.id)
        if s not in top or depth[c.root] < depth[top[s]]:
            top[s] = c.root

    parent = list(instance.parent)
    weight = list(instance.weight)
    demand = list(instance.demand)
    backward = {v: v for v in range(instance.n)}
    copy_of, attachment = {}, {}
    for c in comps:
        z = top[find(c.id)]
        cp = len(parent)
        parent.append(z)
        delta = dist[c.root] - dist[z]
        weight.append(delta)
        demand.append(0)
        backward[cp] = c.root
        copy_of[c.id] = cp
        attachment[c.id] = (z, delta)
        for u in c.edges:
            if instance.parent[u] == c.root:
                parent[u] = cp
    hat = Instance(tuple(parent), tuple(weight), tuple(demand), instance.capacity, instance.root)
    return HatTree(
        instance, hat, VertexMap.from_backward(backward), frozenset(top.values()), dec, d_tilde,
        classes, copy_of, attachment,
    )


def hat_components_match(hat: HatTree) -> bool:
    """Components of the reduced tree equal those of the original as weighted edge sets."""
    back = hat.vertex_map.backward
    for c in hat.decomposition.components:
        orig = {(hat.base.parent[u], u, hat.base.weight[u]) for u in c.edges}
        new = {(back[hat.instance.parent[u]], u, hat.instance.weight[u]) for u in c.edges}
        if orig != new:
            return False
    return check_decomposition(hat.base, hat.decomposition, hat.decomposition.gamma_k).checks[
        "partition"
    ]


def lift_solution(hat: HatTree, sol_hat: Solution) -> Solution:
    """Map a solution on the reduced tree back to the original, never raising tour costs."""
    report = verify(hat.instance, sol_hat)
    if not report.feasible:
        raise ValueError(f"cannot lift an infeasible solution: {report.violations[0].detail}")
    lifted = hat.vertex_map.pull_back(hat.base, sol_hat)
    for t_hat, t in zip(sol_hat.tours, lifted.tours):
        if tour_cost(hat.base, t) > tour_cost(hat.instance, t_hat):
            raise AssertionError("lifted tour is more expensive than on the reduced tree")
    return lifted
