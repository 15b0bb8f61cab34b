"""Seeded instance families."""

from __future__ import annotations

import random
from fractions import Fraction

from .model import Instance, star

FAMILIES = ("random_binary", "caterpillar", "star", "fig5")


def random_binary(terminals: int, capacity: int, seed: int, max_weight: int = 10) -> Instance:
    """Full binary tree with ``terminals`` leaves, grown by splitting random leaves.

    Edge weights are uniform integers in [0, max_weight].
    """
    if terminals < 1:
        raise ValueError("need at least one terminal")
    rng = random.Random(seed)
    parent = [-1]
    leaves = [0]
    if terminals == 1:
        parent.append(0)
        leaves = [1]
    while len(leaves) < terminals:
        v = leaves.pop(rng.randrange(len(leaves)))
        for _ in range(2):
            parent.append(v)
            leaves.append(len(parent) - 1)
    weight = [Fraction(0)] + [Fraction(rng.randint(0, max_weight)) for _ in parent[1:]]
    leaf_set = set(leaves)
    demand = [1 if v in leaf_set else 0 for v in range(len(parent))]
    return Instance(tuple(parent), tuple(weight), tuple(demand), capacity)


def caterpillar(length: int, capacity: int, seed: int, max_weight: int = 10) -> Instance:
    """A spine of ``length`` edges with one terminal leg at every spine vertex."""
    if length < 1:
        raise ValueError("length must be at least 1")
    rng = random.Random(seed)
    parent, weight, demand = [-1], [Fraction(0)], [0]
    spine = 0
    for i in range(length):
        parent.append(spine)
        weight.append(Fraction(rng.randint(1, max_weight)))
        demand.append(0)
        spine = len(parent) - 1
        parent.append(spine)
        weight.append(Fraction(rng.randint(0, max_weight)))
        demand.append(1)
    demand[spine] = 1
    return Instance(tuple(parent), tuple(weight), tuple(demand), capacity)


def fig5(k: int, m: int) -> Instance:
    """Depot edge of weight 1 to v; v has m zero-weight subtrees of 2k/m terminals each."""
    if k < 1 or m < 1:
        raise ValueError("k and m must be positive")
    if (2 * k) % m:
        raise ValueError(f"2k = {2 * k} is not divisible by m = {m}")
    per = 2 * k // m
    parent, weight, demand = [-1, 0], [Fraction(0), Fraction(1)], [0, 0]
    for _ in range(m):
        parent.append(1)
        weight.append(Fraction(0))
        demand.append(0)
        s = len(parent) - 1
        for _ in range(per):
            parent.append(s)
            weight.append(Fraction(0))
            demand.append(1)
    return Instance(tuple(parent), tuple(weight), tuple(demand), k)


def fig5_groups(instance: Instance) -> list[list[int]]:
    """The terminal sets of the subtrees below v in a fig5 instance."""
    return [list(instance.children[s]) for s in instance.children[1]]


def generate(family: str, seed: int = 0, **kw) -> Instance:
    if family == "random_binary":
        return random_binary(kw["terminals"], kw["k"], seed, kw.get("max_weight", 10))
    if family == "caterpillar":
        return caterpillar(kw["length"], kw["k"], seed, kw.get("max_weight", 10))
    if family == "star":
        return star([Fraction(w) for w in kw["weights"]], kw["k"])
    if family == "fig5":
        return fig5(kw["k"], kw["m"])
    raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
