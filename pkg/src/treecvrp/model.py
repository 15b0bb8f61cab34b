"""Tree instances, tours, solutions, normalization and JSON I/O.

Weights are exact :class:`fractions.Fraction` values.  Hot loops (the dynamic
programs) rescale them to integers with :func:`integer_weights`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence


class EmptyInstanceError(ValueError):
    """Raised when an operation needs at least one terminal."""


class InstanceFormatError(ValueError):
    """Malformed or invalid instance/solution document."""


class BudgetExceeded(RuntimeError):
    """A configured size budget would be exceeded."""


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean is not a weight")
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class Instance:
    """A rooted, edge-weighted tree with terminal demands and a capacity.

    ``parent[v]`` is the parent of ``v`` (``-1`` for the root) and
    ``weight[v]`` the weight of the edge ``(parent[v], v)``.  ``demand[v]`` is
    zero for non-terminals.
    """

    parent: tuple[int, ...]
    weight: tuple[Fraction, ...]
    demand: tuple[int, ...]
    capacity: int
    root: int = 0

    def __post_init__(self):
        object.__setattr__(self, "parent", tuple(int(p) for p in self.parent))
        object.__setattr__(self, "weight", tuple(as_fraction(w) for w in self.weight))
        object.__setattr__(self, "demand", tuple(int(d) for d in self.demand))
        n = len(self.parent)
        if n == 0:
            raise ValueError("instance needs at least one vertex")
        if len(self.weight) != n or len(self.demand) != n:
            raise ValueError("parent, weight and demand must have equal length")
        if not 0 <= self.root < n:
            raise ValueError(f"root {self.root} out of range")
        if self.parent[self.root] != -1:
            raise ValueError("root must have parent -1")
        if self.weight[self.root] != 0:
            raise ValueError("root carries no edge; its weight must be 0")
        if int(self.capacity) < 1:
            raise ValueError("capacity must be >= 1")
        for v, (p, w, d) in enumerate(zip(self.parent, self.weight, self.demand)):
            if v != self.root and not 0 <= p < n:
                raise ValueError(f"vertex {v} has invalid parent {p}")
            if w < 0:
                raise ValueError(f"edge into vertex {v} has negative weight {w}")
            if d < 0:
                raise ValueError(f"vertex {v} has negative demand {d}")
        # every vertex must reach the root without revisiting
        state = [0] * n
        state[self.root] = 2
        for v in range(n):
            path = []
            u = v
            while state[u] == 0:
                state[u] = 1
                path.append(u)
                u = self.parent[u]
            if state[u] == 1:
                raise ValueError(f"parent pointers contain a cycle through vertex {u}")
            for x in path:
                state[x] = 2

    @property
    def n(self) -> int:
        return len(self.parent)

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in range(self.n)]
        for v, p in enumerate(self.parent):
            if v != self.root:
                kids[p].append(v)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def preorder(self) -> tuple[int, ...]:
        """Depth-first preorder, children visited by increasing id."""
        order = []
        stack = [self.root]
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(reversed(self.children[v]))
        return tuple(order)

    @cached_property
    def terminals(self) -> tuple[int, ...]:
        return tuple(v for v in range(self.n) if self.demand[v] > 0)

    @cached_property
    def dist(self) -> tuple[Fraction, ...]:
        d = [Fraction(0)] * self.n
        for v in self.preorder:
            if v != self.root:
                d[v] = d[self.parent[v]] + self.weight[v]
        return tuple(d)

    @cached_property
    def depth(self) -> tuple[int, ...]:
        d = [0] * self.n
        for v in self.preorder:
            if v != self.root:
                d[v] = d[self.parent[v]] + 1
        return tuple(d)

    @cached_property
    def subtree_demand(self) -> tuple[int, ...]:
        s = list(self.demand)
        for v in reversed(self.preorder):
            if v != self.root:
                s[self.parent[v]] += s[v]
        return tuple(s)

    @property
    def total_demand(self) -> int:
        return sum(self.demand)

    @property
    def is_unit_demand(self) -> bool:
        return all(d <= 1 for d in self.demand)

    def with_terminals(self, terminals: Iterable[int]) -> "Instance":
        """Same tree and capacity, demand restricted to ``terminals``."""
        keep = set(terminals)
        demand = tuple(d if v in keep else 0 for v, d in enumerate(self.demand))
        return Instance(self.parent, self.weight, demand, self.capacity, self.root)

    def with_capacity(self, capacity: int) -> "Instance":
        return Instance(self.parent, self.weight, self.demand, capacity, self.root)


def integer_weights(instance: Instance) -> tuple[list[int], int]:
    """Scale edge weights to integers; returns (weights, denominator)."""
    denom = 1
    for w in instance.weight:
        denom = denom * w.denominator // math.gcd(denom, w.denominator)
    return [int(w * denom) for w in instance.weight], denom


@dataclass(frozen=True)
class Tour:
    """A tour given by the terminal demand it claims, as ``(vertex, units)``."""

    claims: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "claims", tuple((int(v), int(u)) for v, u in self.claims))

    @classmethod
    def of(cls, terminals: Iterable[int]) -> "Tour":
        return cls(tuple((v, 1) for v in terminals))

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.claims)

    @property
    def load(self) -> int:
        return sum(u for _, u in self.claims)


@dataclass(frozen=True)
class Solution:
    tours: tuple[Tour, ...]
    cost: Fraction = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "tours", tuple(self.tours))
        if self.cost is not None:
            object.__setattr__(self, "cost", as_fraction(self.cost))

    @classmethod
    def build(cls, instance: Instance, tours: Iterable[Tour]) -> "Solution":
        tours = tuple(tours)
        return cls(tours, sum((tour_cost(instance, t) for t in tours), Fraction(0)))


def path_weight_union(instance: Instance, vertices: Iterable[int]) -> Fraction:
    """Weight of the minimal subtree spanning the root and ``vertices``."""
    seen = {instance.root}
    total = Fraction(0)
    parent, weight = instance.parent, instance.weight
    for v in vertices:
        while v not in seen:
            seen.add(v)
            total += weight[v]
            v = parent[v]
    return total


def tour_cost(instance: Instance, tour: Tour) -> Fraction:
    """Canonical cost: twice the subtree spanning the depot and claimed vertices."""
    for v, _ in tour.claims:
        if not 0 <= v < instance.n:
            raise ValueError(f"claimed vertex {v} does not exist")
    return 2 * path_weight_union(instance, tour.vertices)


@dataclass
class Violation:
    kind: str
    tour: int | None
    detail: str


@dataclass
class VerifyReport:
    feasible: bool
    violations: list[Violation]
    total_cost: Fraction

    def as_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "violations": [vars(v) for v in self.violations],
            "total_cost": str(self.total_cost),
        }


def verify(instance: Instance, solution: Solution) -> VerifyReport:
    """Check capacities, exact coverage and recompute every tour's cost."""
    violations: list[Violation] = []
    covered = [0] * instance.n
    total = Fraction(0)
    for i, tour in enumerate(solution.tours):
        bad_vertex = False
        for v, units in tour.claims:
            if not 0 <= v < instance.n or instance.demand[v] == 0:
                violations.append(Violation("unknown_terminal", i, f"vertex {v} is not a terminal"))
                bad_vertex = True
                continue
            if units < 1 or units > instance.demand[v]:
                violations.append(Violation("units", i, f"claim of {units} units at vertex {v}"))
            covered[v] += units
        if len(set(tour.vertices)) != len(tour.claims):
            violations.append(Violation("duplicate_claim", i, "a vertex is claimed twice in one tour"))
        if tour.load > instance.capacity:
            violations.append(
                Violation("capacity", i, f"load {tour.load} exceeds capacity {instance.capacity}")
            )
        if not bad_vertex:
            total += tour_cost(instance, tour)
    for v in instance.terminals:
        if covered[v] != instance.demand[v]:
            violations.append(
                Violation("coverage", None, f"terminal {v} covered {covered[v]} of {instance.demand[v]}")
            )
    if solution.cost is not None and solution.cost != total and not violations:
        violations.append(Violation("cost", None, f"stated cost {solution.cost} != recomputed {total}"))
    return VerifyReport(not violations, violations, total)


def distances(instance: Instance) -> tuple[tuple[Fraction, ...], Fraction, Fraction]:
    """Root distances of all vertices plus (D_min, D_max) over terminals."""
    if not instance.terminals:
        raise EmptyInstanceError("empty instance: no terminals")
    d = instance.dist
    term = [d[v] for v in instance.terminals]
    return d, min(term), max(term)


# -- normalization -----------------------------------------------------------


@dataclass(frozen=True)
class VertexMap:
    """Correspondence between a source instance and a derived one.

    ``forward`` maps a source vertex to every target vertex derived from it;
    ``backward`` maps target vertices back (dummy target vertices are absent).
    """

    forward: dict[int, tuple[int, ...]]
    backward: dict[int, int]

    @classmethod
    def from_backward(cls, backward: dict[int, int]) -> "VertexMap":
        fwd: dict[int, list[int]] = {}
        for t, s in sorted(backward.items()):
            fwd.setdefault(s, []).append(t)
        return cls({s: tuple(ts) for s, ts in fwd.items()}, dict(backward))

    def terminal_images(self, target: Instance, v: int) -> tuple[int, ...]:
        return tuple(t for t in self.forward.get(v, ()) if target.demand[t] > 0)

    def compose(self, inner: "VertexMap") -> "VertexMap":
        """``self`` maps A->B and ``inner`` maps B->C; result maps A->C."""
        back = {c: self.backward[b] for c, b in inner.backward.items() if b in self.backward}
        return VertexMap.from_backward(back)

    def pull_back(self, source: Instance, solution: Solution) -> Solution:
        """Translate a target solution to the source, merging claims per vertex."""
        tours = []
        for tour in solution.tours:
            merged: dict[int, int] = {}
            for v, units in tour.claims:
                s = self.backward[v]
                merged[s] = merged.get(s, 0) + units
            tours.append(Tour(tuple(merged.items())))
        return Solution.build(source, tours)


def is_normalized(instance: Instance) -> bool:
    """Unit demands, terminals are exactly the leaves, internal vertices binary.

    The depot may have a single child (it cannot be sliced out).
    """
    if not instance.is_unit_demand:
        return False
    for v in range(instance.n):
        kids = instance.children[v]
        if v == instance.root:
            if not 1 <= len(kids) <= 2 or instance.demand[v]:
                return False
        elif kids:
            if len(kids) != 2 or instance.demand[v]:
                return False
        elif instance.demand[v] != 1:
            return False
    return True


def normalize(instance: Instance) -> tuple[Instance, VertexMap]:
    """Rewrite a unit-demand instance into binary form with terminals at leaves.

    Non-terminal leaves are removed, terminal internal vertices get a
    zero-weight leaf carrying the terminal, high-degree vertices are split
    with zero-weight edges and non-terminal degree-2 vertices are sliced out.
    Optimal cost is unchanged.
    """
    if not instance.is_unit_demand:
        raise ValueError("normalize expects unit demands; expand splittable instances first")
    if not instance.terminals:
        raise EmptyInstanceError("empty instance: no terminals")
    sub = instance.subtree_demand
    kids_of = instance.children

    parent: list[int] = []
    weight: list[Fraction] = []
    demand: list[int] = []
    backward: dict[int, int] = {}

    def new_vertex(p: int, w: Fraction, d: int, source: int | None) -> int:
        parent.append(p)
        weight.append(w)
        demand.append(d)
        if source is not None:
            backward[len(parent) - 1] = source
        return len(parent) - 1

    # Each work item: (new parent id, accumulated weight, original vertex).
    root = new_vertex(-1, Fraction(0), 0, instance.root)
    work: list[tuple[int, Fraction, int | None, int]] = []

    def expand(v: int, new_v: int) -> None:
        items: list[tuple[Fraction, int | None]] = []  # (weight, original child or None=terminal leaf)
        kept = [c for c in kids_of[v] if sub[c] > 0]
        if instance.demand[v]:
            if kept or v == instance.root:
                items.append((Fraction(0), None))
            else:
                demand[new_v] = 1
        items.extend((instance.weight[c], c) for c in kept)
        attach = new_v
        while len(items) > 2:
            w, c = items.pop(0)
            work.append((attach, w, c, v))
            attach = new_vertex(attach, Fraction(0), 0, None)
        for w, c in items:
            work.append((attach, w, c, v))

    expand(instance.root, root)
    while work:
        p, w, c, owner = work.pop(0)
        if c is None:
            new_vertex(p, w, 1, owner)
            continue
        # slice out non-terminal vertices with a single kept child
        while not instance.demand[c]:
            kept = [x for x in kids_of[c] if sub[x] > 0]
            if len(kept) != 1:
                break
            c = kept[0]
            w += instance.weight[c]
        new_c = new_vertex(p, w, 0, c)
        expand(c, new_c)

    out = Instance(tuple(parent), tuple(weight), tuple(demand), instance.capacity, root)
    return out, VertexMap.from_backward(backward)


# -- JSON ----------------------------------------------------------------------


def _field(doc: dict, name: str, where: str):
    if not isinstance(doc, dict):
        raise InstanceFormatError(f"{where}: expected an object")
    if name not in doc:
        raise InstanceFormatError(f"{where}: missing field '{name}'")
    return doc[name]


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstanceFormatError(f"{where}: expected an integer, got {value!r}")
    return value


def _load(text) -> object:
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def instance_from_dict(doc: dict) -> Instance:
    n = _int(_field(doc, "n", "instance"), "field 'n'")
    root = _int(_field(doc, "root", "instance"), "field 'root'")
    capacity = _int(_field(doc, "capacity", "instance"), "field 'capacity'")
    edges = _field(doc, "edges", "instance")
    terminals = _field(doc, "terminals", "instance")
    if n < 1:
        raise InstanceFormatError("field 'n': must be positive")
    parent = [-2] * n
    weight = [Fraction(0)] * n
    parent[root if 0 <= root < n else 0] = -1
    for i, e in enumerate(edges):
        where = f"edges[{i}]"
        c = _int(_field(e, "child", where), f"{where}.child")
        p = _int(_field(e, "parent", where), f"{where}.parent")
        raw = _field(e, "weight", where)
        try:
            w = as_fraction(raw)
        except (ValueError, TypeError, ZeroDivisionError) as exc:
            raise InstanceFormatError(f"{where}.weight: not a rational number: {raw!r}") from exc
        if w < 0:
            raise InstanceFormatError(f"{where}.weight: negative edge weight {raw!r}")
        if not 0 <= c < n or not 0 <= p < n:
            raise InstanceFormatError(f"{where}: vertex out of range")
        if parent[c] != -2:
            raise InstanceFormatError(f"{where}: vertex {c} already has a parent")
        parent[c], weight[c] = p, w
    missing = [v for v in range(n) if parent[v] == -2]
    if missing:
        raise InstanceFormatError(f"edges: vertex {missing[0]} has no parent edge")
    demand = [0] * n
    for i, t in enumerate(terminals):
        where = f"terminals[{i}]"
        v = _int(_field(t, "v", where), f"{where}.v")
        d = _int(t.get("demand", 1), f"{where}.demand")
        if not 0 <= v < n:
            raise InstanceFormatError(f"{where}.v: vertex out of range")
        if d < 1:
            raise InstanceFormatError(f"{where}.demand: must be >= 1")
        if demand[v]:
            raise InstanceFormatError(f"{where}: terminal {v} listed twice")
        demand[v] = d
    if capacity < 1:
        raise InstanceFormatError("field 'capacity': must be >= 1")
    try:
        return Instance(tuple(parent), tuple(weight), tuple(demand), capacity, root)
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from exc


def instance_to_dict(instance: Instance) -> dict:
    return {
        "n": instance.n,
        "root": instance.root,
        "edges": [
            {"child": v, "parent": instance.parent[v], "weight": str(instance.weight[v])}
            for v in range(instance.n)
            if v != instance.root
        ],
        "terminals": [{"v": v, "demand": instance.demand[v]} for v in instance.terminals],
        "capacity": instance.capacity,
    }


def read_instance(text) -> Instance:
    return instance_from_dict(_load(text))


def write_instance(instance: Instance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2) + "\n"


def solution_to_dict(solution: Solution, metadata: dict | None = None) -> dict:
    doc = {
        "tours": [{"claims": [{"v": v, "units": u} for v, u in t.claims]} for t in solution.tours],
        "cost": None if solution.cost is None else str(solution.cost),
    }
    if metadata is not None:
        doc["metadata"] = metadata
    return doc


def solution_from_dict(doc: dict) -> Solution:
    tours = []
    for i, t in enumerate(_field(doc, "tours", "solution")):
        claims = []
        for j, c in enumerate(_field(t, "claims", f"tours[{i}]")):
            where = f"tours[{i}].claims[{j}]"
            claims.append(
                (_int(_field(c, "v", where), f"{where}.v"), _int(_field(c, "units", where), f"{where}.units"))
            )
        tours.append(Tour(tuple(claims)))
    cost = doc.get("cost")
    try:
        cost = None if cost is None else as_fraction(cost)
    except (ValueError, TypeError) as exc:
        raise InstanceFormatError(f"field 'cost': not a rational number: {cost!r}") from exc
    return Solution(tuple(tours), cost)


def read_solution(text) -> Solution:
    return solution_from_dict(_load(text))


def write_solution(solution: Solution, metadata: dict | None = None) -> str:
    return json.dumps(solution_to_dict(solution, metadata), indent=2) + "\n"


def star(weights: Sequence, capacity: int) -> Instance:
    """Depot 0 with one terminal leaf per weight."""
    n = len(weights) + 1
    return Instance(
        (-1,) + (0,) * (n - 1),
        (0,) + tuple(weights),
        (0,) + (1,) * (n - 1),
        capacity,
    )
