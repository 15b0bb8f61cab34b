"""Partition of a normalized tree's edges into leaf and internal components.

Edges are identified by their child endpoint.  A component's vertex set is
its edge set plus its root.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .model import Instance, is_normalized


@dataclass(frozen=True)
class Component:
    id: int
    kind: str  # "leaf" or "internal"
    root: int
    exit: int | None
    edges: frozenset[int]
    demand: int
    spine_weight: Fraction = Fraction(0)

    @property
    def vertices(self) -> frozenset[int]:
        return self.edges | {self.root}

    @property
    def spine_cost(self) -> Fraction:
        """Cost of walking root -> exit -> root."""
        return 2 * self.spine_weight


@dataclass(frozen=True)
class Decomposition:
    gamma_k: int
    components: tuple[Component, ...]
    edge_component: dict[int, int]
    key_vertices: frozenset[int]
    big: tuple[bool, ...]
    big_map: dict[int, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.components)


def _subtree(instance: Instance, v: int) -> list[int]:
    out, stack = [], [v]
    while stack:
        u = stack.pop()
        out.append(u)
        stack.extend(instance.children[u])
    return out


def _component_demand(instance: Instance, edges) -> int:
    return sum(instance.demand[u] for u in edges)


def decompose(instance: Instance, gamma_k: int) -> Decomposition:
    """Split the edges of a normalized tree into components with threshold ``gamma_k``.

    Leaf components are the minimal subtrees holding at least ``gamma_k``
    terminals.  Between consecutive key vertices (leaf-component roots,
    backbone branch points, the depot) internal components are peeled off
    bottom-up, each taking the deepest vertex whose part above the current
    exit still holds ``gamma_k`` terminals.
    """
    if not is_normalized(instance):
        raise ValueError("decompose expects a normalized instance")
    if gamma_k < 2:
        # every terminal leaf would be a leaf root whose component has no edges
        raise ValueError("gamma_k must be at least 2")
    n_v = instance.subtree_demand
    root = instance.root
    kids = instance.children

    leaf_roots = [
        v
        for v in instance.preorder
        if kids[v] and n_v[v] >= gamma_k and all(n_v[c] < gamma_k for c in kids[v])
    ]
    raw: list[tuple[str, int, int | None, frozenset[int]]] = []
    if not leaf_roots or leaf_roots == [root]:
        edges = frozenset(v for v in range(instance.n) if v != root)
        comps = [Component(0, "leaf", root, None, edges, instance.total_demand)]
        return _finish(instance, gamma_k, comps, frozenset({root}))

    on_backbone = [False] * instance.n
    for v in leaf_roots:
        u = v
        while u != -1 and not on_backbone[u]:
            on_backbone[u] = True
            u = instance.parent[u]
    leaf_set = set(leaf_roots)
    branch = {
        v for v in range(instance.n)
        if v not in leaf_set and sum(on_backbone[c] for c in kids[v]) >= 2
    }
    keys = leaf_set | branch | {root}

    for v in leaf_roots:
        raw.append(("leaf", v, None, frozenset(_subtree(instance, v)) - {v}))

    for v2 in sorted(keys - {root}):
        path = [v2]
        u = instance.parent[v2]
        while u not in keys:
            path.append(u)
            u = instance.parent[u]
        path.append(u)
        path.reverse()  # path[0] = v1 ... path[-1] = v2
        v1 = path[0]
        top_takes_all = v1 == root and v1 not in branch
        # terminals at or below path[i] within this segment, before excluding the exit
        count = [n_v[p] for p in path]
        if not top_takes_all:
            count[0] = n_v[path[1]]

        def hanging(i: int) -> list[int]:
            if i == 0 and not top_takes_all:
                return []
            return [c for c in kids[path[i]] if c != path[i + 1]]

        def edges_between(i: int, j: int) -> frozenset[int]:
            out = set(path[i + 1 : j + 1])
            for m in range(i, j):
                for c in hanging(m):
                    out.update(_subtree(instance, c))
            return frozenset(out)

        j = len(path) - 1
        while count[0] - n_v[path[j]] >= gamma_k:
            i = j - 1
            while count[i] - n_v[path[j]] < gamma_k:
                i -= 1
            raw.append(("internal", path[i], path[j], edges_between(i, j)))
            j = i
        if j != 0:
            raw.append(("internal", path[0], path[j], edges_between(0, j)))

    depth = instance.depth
    raw.sort(key=lambda r: (depth[r[1]], r[1], -1 if r[2] is None else r[2]))
    dist = instance.dist
    comps = [
        Component(
            i, kind, r, e, edges, _component_demand(instance, edges),
            Fraction(0) if e is None else dist[e] - dist[r],
        )
        for i, (kind, r, e, edges) in enumerate(raw)
    ]
    return _finish(instance, gamma_k, comps, frozenset(keys))


def _finish(instance, gamma_k, comps, keys) -> Decomposition:
    edge_component = {u: c.id for c in comps for u in c.edges}
    big = tuple(c.demand >= gamma_k for c in comps)
    dec = Decomposition(gamma_k, tuple(comps), edge_component, keys, big)
    object.__setattr__(dec, "big_map", big_component_map(instance, dec.components, gamma_k))
    return dec


def big_component_map(instance: Instance, components, gamma_k: int) -> dict[int, int]:
    """Map each component to a big descendant component.

    Big components map to themselves.  A non-big component containing the
    left child of its root maps to the rightmost leaf component below its
    exit, otherwise to the leftmost one.  Children are ordered by id.
    """
    if len(components) <= 1:
        return {c.id: c.id for c in components}
    leaf_by_root = {c.root: c.id for c in components if c.kind == "leaf"}
    position = {v: i for i, v in enumerate(instance.preorder)}
    result = {}
    for c in components:
        if c.demand >= gamma_k:
            result[c.id] = c.id
            continue
        if c.exit is None:
            continue
        below = sorted(
            (position[v], cid) for v, cid in leaf_by_root.items() if _is_ancestor(instance, c.exit, v)
        )
        if not below:
            continue
        left_child = instance.children[c.root][0]
        result[c.id] = below[-1][1] if left_child in c.edges else below[0][1]
    return result


def _is_ancestor(instance: Instance, a: int, v: int) -> bool:
    while v != -1:
        if v == a:
            return True
        v = instance.parent[v]
    return False


@dataclass
class DecompositionReport:
    checks: dict[str, bool]
    violations: list[str]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def check_decomposition(instance: Instance, dec: Decomposition, gamma_k: int) -> DecompositionReport:
    """Verify every structural property of a decomposition; never raises."""
    violations: dict[str, list[str]] = {
        name: []
        for name in ("partition", "connectivity", "interaction", "demand_bound", "leaf_big",
                     "preimage_map", "count_bound")
    }
    comps = dec.components
    root = instance.root

    seen: dict[int, int] = {}
    for c in comps:
        for u in c.edges:
            if u == root or not 0 <= u < instance.n:
                violations["partition"].append(f"component {c.id} holds invalid edge {u}")
            elif u in seen:
                violations["partition"].append(f"edge {u} in components {seen[u]} and {c.id}")
            else:
                seen[u] = c.id
            if dec.edge_component.get(u) != c.id:
                violations["partition"].append(f"edge {u} index disagrees with component {c.id}")
    missing = [u for u in range(instance.n) if u != root and u not in seen]
    if missing:
        violations["partition"].append(f"edges {missing[:5]} belong to no component")

    owners: dict[int, set[int]] = {}
    for c in comps:
        for u in c.vertices:
            owners.setdefault(u, set()).add(c.id)
        tops = {u for u in c.vertices if u not in c.edges}
        if tops != {c.root} or not c.edges:
            violations["connectivity"].append(f"component {c.id} is not a connected subtree at {c.root}")
    for c in comps:
        allowed = {c.root} if c.kind == "leaf" else {c.root, c.exit}
        if c.kind == "leaf":
            below = set(_subtree(instance, c.root)) - {c.root}
            if below != set(c.edges):
                violations["interaction"].append(f"leaf component {c.id} misses descendants of its root")
        elif c.exit not in c.edges:
            violations["interaction"].append(f"internal component {c.id} does not contain its exit")
        for u in c.vertices:
            if len(owners[u]) > 1 and u not in allowed:
                violations["interaction"].append(f"component {c.id} shares vertex {u}")

    for c in comps:
        demand = _component_demand(instance, c.edges)
        if demand > 2 * gamma_k:
            violations["demand_bound"].append(f"component {c.id} has demand {demand} > {2 * gamma_k}")
        if c.kind == "leaf" and demand < gamma_k and len(comps) > 1:
            violations["leaf_big"].append(f"leaf component {c.id} has demand {demand} < {gamma_k}")

    if len(comps) > 1:
        mapping = big_component_map(instance, comps, gamma_k)
        by_id = {c.id: c for c in comps}
        preimages: dict[int, int] = {}
        for c in comps:
            img = mapping.get(c.id)
            if img is None:
                violations["preimage_map"].append(f"component {c.id} has no big image")
                continue
            target = by_id[img]
            if _component_demand(instance, target.edges) < gamma_k:
                violations["preimage_map"].append(f"image {img} of {c.id} is not big")
            if not _is_ancestor(instance, c.root, target.root) or not target.edges <= set(
                _subtree(instance, c.root)
            ):
                violations["preimage_map"].append(f"image {img} is not below component {c.id}")
            preimages[img] = preimages.get(img, 0) + 1
        for img, count in preimages.items():
            if count > 3:
                violations["preimage_map"].append(f"big component {img} has {count} preimages")
        # |C| <= (3 / Gamma) * total demand with Gamma = gamma_k / k
        if len(comps) * gamma_k > 3 * instance.total_demand * instance.capacity:
            violations["count_bound"].append(
                f"{len(comps)} components exceed 3*{instance.total_demand}*k/{gamma_k}"
            )

    return DecompositionReport(
        {name: not v for name, v in violations.items()},
        [msg for v in violations.values() for msg in v],
    )


def sum_component_root_distances(instance: Instance, dec: Decomposition) -> Fraction:
    dist = instance.dist
    return sum((dist[c.root] for c in dec.components), Fraction(0))


def decomposition_to_dict(instance: Instance, dec: Decomposition) -> dict:
    return {
        "gamma_k": dec.gamma_k,
        "components": [
            {
                "id": c.id,
                "kind": c.kind,
                "root": c.root,
                "exit": c.exit,
                "demand": c.demand,
                "big": dec.big[c.id],
                "spine_cost": str(c.spine_cost),
                "maps_to": dec.big_map.get(c.id),
            }
            for c in dec.components
        ],
        "edge_component": [
            {"child": u, "parent": instance.parent[u], "component": dec.edge_component[u]}
            for u in sorted(dec.edge_component)
        ],
        "key_vertices": sorted(dec.key_vertices),
    }
