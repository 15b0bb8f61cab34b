import random
from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import instances, random_tree
from treecvrp.bounds import lb_edge
from treecvrp.decomposition import (
    check_decomposition,
    decompose,
    decomposition_to_dict,
    sum_component_root_distances,
)
from treecvrp.generators import caterpillar, random_binary
from treecvrp.model import Instance, normalize


def _caterpillar_normalized(length=6, k=2):
    return normalize(caterpillar(length, k, seed=1))[0]


def test_requires_normalized(star114):
    with pytest.raises(ValueError, match="normalized"):
        decompose(star114, 2)


def test_rejects_gamma_one():
    norm = _caterpillar_normalized()
    with pytest.raises(ValueError):
        decompose(norm, 1)


def test_small_total_gives_single_leaf_component():
    norm = _caterpillar_normalized()
    dec = decompose(norm, norm.total_demand + 1)
    assert len(dec) == 1
    c = dec.components[0]
    assert c.kind == "leaf" and c.root == norm.root
    assert c.edges == frozenset(range(1, norm.n))
    assert check_decomposition(norm, dec, norm.total_demand + 1).ok


def test_caterpillar_components_by_hand():
    # spine 0-1-3-5 with legs; normalized it is a chain of binary vertices
    inst = Instance(
        (-1, 0, 1, 1, 3, 3, 5, 5),
        (0, 1, 1, 1, 1, 1, 1, 1),
        (0, 0, 1, 0, 1, 0, 1, 1),
        2,
    )
    norm, _ = normalize(inst)
    assert norm.parent == inst.parent  # already binary
    dec = decompose(norm, 2)
    # leaf root 5; peeling from 5 upward stops at 1; the edge 0-1 is left over
    shape = sorted((c.kind, c.root, c.exit, tuple(sorted(c.edges)), c.demand) for c in dec.components)
    assert shape == [
        ("internal", 0, 1, (1,), 0),
        ("internal", 1, 5, (2, 3, 4, 5), 2),
        ("leaf", 5, None, (6, 7), 2),
    ]
    internal = next(c for c in dec.components if c.root == 1)
    assert internal.spine_weight == 2
    top = next(c for c in dec.components if c.root == 0)
    leaf = next(c for c in dec.components if c.kind == "leaf")
    assert dec.big_map[internal.id] == internal.id
    assert dec.big_map[top.id] == leaf.id
    assert check_decomposition(norm, dec, 2).ok


def test_leaf_components_are_minimal():
    norm = normalize(random_binary(12, 3, seed=2))[0]
    dec = decompose(norm, 4)
    for c in dec.components:
        if c.kind == "leaf":
            assert norm.subtree_demand[c.root] >= 4
            assert all(norm.subtree_demand[x] < 4 for x in norm.children[c.root])


def test_corrupted_decomposition_flags_partition():
    norm = normalize(random_binary(10, 2, seed=3))[0]
    dec = decompose(norm, 3)
    assert len(dec) >= 2
    a, b = dec.components[0], dec.components[1]
    moved = next(iter(a.edges))
    comps = list(dec.components)
    comps[0] = replace(a, edges=a.edges - {moved})
    comps[1] = replace(b, edges=b.edges | {moved})
    bad = replace(dec, components=tuple(comps))
    report = check_decomposition(norm, bad, 3)
    assert not report.checks["partition"]
    assert not report.ok


def test_duplicated_edge_flags_partition():
    norm = normalize(random_binary(10, 2, seed=4))[0]
    dec = decompose(norm, 3)
    a, b = dec.components[0], dec.components[1]
    comps = list(dec.components)
    comps[1] = replace(b, edges=b.edges | {next(iter(a.edges))})
    report = check_decomposition(norm, replace(dec, components=tuple(comps)), 3)
    assert not report.checks["partition"]


def test_demand_bound_violation_detected():
    norm = normalize(random_binary(10, 2, seed=5))[0]
    dec = decompose(norm, 3)
    report = check_decomposition(norm, dec, 1)
    assert not report.checks["demand_bound"]


def test_dict_export_lists_every_edge():
    norm = normalize(random_binary(9, 2, seed=6))[0]
    doc = decomposition_to_dict(norm, decompose(norm, 3))
    assert len(doc["edge_component"]) == norm.n - 1


@settings(max_examples=200, deadline=None)
@given(instances(max_vertices=16, max_terminals=12), st.integers(2, 14))
def test_all_checks_pass(inst, gamma_k):
    norm, _ = normalize(inst)
    dec = decompose(norm, gamma_k)
    report = check_decomposition(norm, dec, gamma_k)
    assert report.ok, report.violations
    every_vertex_but_root = set(range(norm.n)) - {norm.root}
    assert set(dec.edge_component) == every_vertex_but_root


@settings(max_examples=200, deadline=None)
@given(instances(max_vertices=16, max_terminals=12, fractional=True), st.integers(2, 14))
def test_root_distance_sum_bound(inst, gamma_k):
    norm, _ = normalize(inst)
    dec = decompose(norm, gamma_k)
    # sum of root distances <= (3k / (2 gamma_k)) * fractional edge bound
    lhs = 2 * gamma_k * sum_component_root_distances(norm, dec)
    assert lhs <= 3 * norm.capacity * lb_edge(norm, "fractional")


def test_every_non_root_component_root_is_an_exit():
    rng = random.Random(7)
    for _ in range(100):
        norm = normalize(random_tree(rng, rng.randint(4, 30), rng.randint(3, 20), 3))[0]
        for g in (2, 3, 5):
            dec = decompose(norm, g)
            exits = [c.exit for c in dec.components if c.exit is not None]
            assert len(exits) == len(set(exits))
            roots = {c.root for c in dec.components} - {norm.root}
            assert roots <= set(exits)


def test_component_count_bound_on_large_tree():
    norm = normalize(random_binary(200, 4, seed=8))[0]
    for g in (2, 5, 9, 20):
        dec = decompose(norm, g)
        report = check_decomposition(norm, dec, g)
        assert report.ok
        assert len(dec) * g <= 3 * norm.total_demand * norm.capacity
