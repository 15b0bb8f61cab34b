import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import instances, random_tree
from treecvrp.baselines import exact_partition_dp, itp
from treecvrp.decomposition import decompose
from treecvrp.model import Instance, Solution, Tour, normalize, star, tour_cost, verify
from treecvrp.transforms import (
    band_index,
    bands_u,
    build_hat_tree,
    class_count_bound,
    distance_class,
    exact_d_tilde,
    hat_components_match,
    lift_solution,
    solve_banded,
    split_by_distance,
)


def _chain_instance():
    # 0 -1- 1 -1- 3 -1- 5 with legs 2, 4 and leaves 6, 7 (all weight 1)
    return Instance(
        (-1, 0, 1, 1, 3, 3, 5, 5),
        (0, 1, 1, 1, 1, 1, 1, 1),
        (0, 0, 1, 0, 1, 0, 1, 1),
        2,
    )


def test_band_index():
    assert band_index(Fraction(1), 2) == 0
    assert band_index(Fraction(3), 2) == 1
    assert band_index(Fraction(4), 2) == 2
    assert band_index(Fraction(1, 2), 2) == -1
    assert band_index(Fraction(1, 3), 3) == -1
    assert band_index(Fraction(1, 4), 3) == -2
    with pytest.raises(ValueError):
        band_index(Fraction(0), 2)


def test_split_example_three_singletons():
    inst = star([1, 2, 5], 2)
    bands = split_by_distance(inst, 2, 0)
    assert [(s.tag, s.terminals) for s in bands.sets] == [("Y0", (1,)), ("Z0", (2,)), ("Y1", (3,))]
    assert bands_u(inst, 2) == {0: (1,), 1: (2,), 2: (3,)}


def test_split_keeps_whole_tree():
    inst = star([1, 2, 5], 2)
    for s in split_by_distance(inst, 2, 1).sets:
        assert s.instance.parent == inst.parent and s.instance.weight == inst.weight


def test_depot_terminals_get_their_own_set():
    inst = Instance((-1, 0, 0), (0, 0, 3), (0, 1, 1), 2)
    bands = split_by_distance(inst, 2, 0)
    assert bands.sets[0].tag == "depot" and bands.sets[0].terminals == (1,)
    sol = solve_banded(inst, 2, exact_partition_dp)
    assert verify(inst, sol).feasible and sol.cost == 6


def test_split_argument_checks(star114):
    with pytest.raises(ValueError):
        split_by_distance(star114, 1, 0)
    with pytest.raises(ValueError):
        split_by_distance(star114, 3, 3)


def test_single_band_matches_direct_solve():
    inst = star([4, 5, 6, 7], 2)
    assert len(split_by_distance(inst, 2, 0).sets) == 1
    assert solve_banded(inst, 2, exact_partition_dp).cost == exact_partition_dp(inst).cost


@settings(max_examples=150, deadline=None)
@given(instances(fractional=True), st.integers(2, 4), st.data())
def test_bands_partition_terminals_with_bounded_ratio(inst, inv_eps, data):
    i0 = data.draw(st.integers(0, inv_eps - 1))
    bands = split_by_distance(inst, inv_eps, i0)
    seen = [v for s in bands.sets for v in s.terminals]
    assert sorted(seen) == list(inst.terminals)
    assert bands.ratio_ok()


@settings(max_examples=100, deadline=None)
@given(instances(), st.integers(2, 4))
def test_banded_itp_is_feasible(inst, inv_eps):
    sol = solve_banded(inst, inv_eps, itp)
    assert verify(inst, sol).feasible


def test_distance_class_half_open():
    assert distance_class(Fraction(0), Fraction(2)) == 1
    assert distance_class(Fraction(2), Fraction(2)) == 2
    assert distance_class(Fraction(3, 2), Fraction(2)) == 1
    assert class_count_bound(Fraction(1, 2)) == 32


def test_single_component_is_identity():
    norm = normalize(star([1, 2, 3], 3))[0]
    dec = decompose(norm, norm.total_demand + 1)
    hat = build_hat_tree(norm, dec, Fraction(1))
    assert hat.is_identity and hat.critical == frozenset()
    sol = itp(hat.instance)
    assert lift_solution(hat, sol).cost == sol.cost


def test_one_class_hangs_every_root_under_depot():
    norm = normalize(_chain_instance())[0]
    dec = decompose(norm, 2)
    hat = build_hat_tree(norm, dec, Fraction(100))
    assert hat.critical == {norm.root}
    for c in dec.components:
        cp = hat.copy_of[c.id]
        assert hat.instance.parent[cp] == norm.root
        assert hat.instance.weight[cp] == norm.dist[c.root]


def test_chain_two_classes_by_hand():
    norm = normalize(_chain_instance())[0]
    dec = decompose(norm, 2)
    by_root = {c.root: c for c in dec.components}
    hat = build_hat_tree(norm, dec, Fraction(2))
    # roots at distance 0 and 1 share class 1 and are joined at vertex 1; the leaf root 5 is alone
    assert hat.critical == {0, 5}
    assert hat.attachment[by_root[0].id] == (0, 0)
    assert hat.attachment[by_root[1].id] == (0, 1)
    assert hat.attachment[by_root[5].id] == (5, 0)
    T = hat.instance
    assert T.parent[1] == hat.copy_of[by_root[0].id]
    assert T.parent[2] == T.parent[3] == hat.copy_of[by_root[1].id]
    assert T.parent[6] == T.parent[7] == hat.copy_of[by_root[5].id]
    assert hat_components_match(hat)


def test_exact_width_gives_zero_weight_attachments():
    norm = normalize(_chain_instance())[0]
    dec = decompose(norm, 2)
    hat = build_hat_tree(norm, dec, exact_d_tilde(norm, dec))
    assert all(w == 0 for _, w in hat.attachment.values())
    assert exact_partition_dp(hat.instance).cost == exact_partition_dp(norm).cost


def test_single_tour_cost_grows_by_reduction():
    norm = normalize(_chain_instance())[0]
    hat = build_hat_tree(norm, decompose(norm, 2), Fraction(100))
    for v in norm.terminals:
        t = Tour.of([v])
        assert tour_cost(norm, t) <= tour_cost(hat.instance, t)


def test_lift_rejects_infeasible():
    norm = normalize(_chain_instance())[0]
    hat = build_hat_tree(norm, decompose(norm, 2), Fraction(2))
    with pytest.raises(ValueError):
        lift_solution(hat, Solution((Tour.of([6, 7]),), None))


def test_rejects_nonpositive_width():
    norm = normalize(_chain_instance())[0]
    with pytest.raises(ValueError):
        build_hat_tree(norm, decompose(norm, 2), 0)


@settings(max_examples=150, deadline=None)
@given(instances(max_vertices=14, max_terminals=10, fractional=True), st.integers(2, 6),
       st.fractions(min_value=Fraction(1, 4), max_value=20, max_denominator=4))
def test_reduction_contract(inst, gamma_k, d_tilde):
    norm, _ = normalize(inst)
    dec = decompose(norm, gamma_k)
    hat = build_hat_tree(norm, dec, d_tilde)
    assert hat_components_match(hat)
    for v in norm.terminals:
        assert hat.instance.dist[v] >= norm.dist[v]
    for z, w in hat.attachment.values():
        assert z in hat.critical and w >= 0
    for offset in range(min(3, norm.capacity)):
        sol = itp(hat.instance, offset)
        lifted = lift_solution(hat, sol)
        assert verify(norm, lifted).feasible
        assert lifted.cost <= sol.cost


def test_reduction_on_random_corpus():
    rng = random.Random(11)
    for _ in range(60):
        norm = normalize(random_tree(rng, rng.randint(5, 40), rng.randint(4, 25), rng.randint(1, 4)))[0]
        for g in (2, 4):
            dec = decompose(norm, g)
            for width in (Fraction(1, 2), Fraction(3), Fraction(50)):
                hat = build_hat_tree(norm, dec, width)
                assert hat_components_match(hat)
                sol = itp(hat.instance)
                assert lift_solution(hat, sol).cost <= sol.cost


def test_random_offset_is_seeded():
    inst = star([1, 2, 3, 5, 9, 17], 2)
    a = solve_banded(inst, 3, exact_partition_dp, i0="random", seed=4)
    b = solve_banded(inst, 3, exact_partition_dp, i0="random", seed=4)
    assert a == b
    best = solve_banded(inst, 3, exact_partition_dp)
    assert best.cost <= a.cost
    assert best.cost == min(solve_banded(inst, 3, exact_partition_dp, i0=o).cost for o in range(3))
