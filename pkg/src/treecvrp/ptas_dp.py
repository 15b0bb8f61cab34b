"""Dynamic program over the height-reduced tree.

Three table kinds are filled bottom-up:

* ``f`` at vertices inside a component: multisets of subtours, each a
  demand and a passing/ending tag (passing subtours reach the exit vertex);
* ``g`` at component roots: multisets of subtour demands below the root;
* ``g`` at critical vertices: child lists are rounded up to a value set X
  and combined child by child.

Configurations are sorted tuples.  A local entry encodes ``(s, tag)`` as
``2*s + passing`` so sorting and comparison stay on plain ints.  Weights
are scaled to integers so costs are exact.
"""

from __future__ import annotations

import math
import os
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

from .decomposition import decompose
from .model import (
    BudgetExceeded,
    Instance,
    Solution,
    Tour,
    integer_weights,
    normalize,
    tour_cost,
    verify,
)
from .transforms import HatTree, build_hat_tree, exact_d_tilde, lift_solution

INF = math.inf
X_STRATEGIES = ("exhaustive", "from_heuristic", "geometric_grid", "fixed")
_HUGE_DIGITS = 10_000


class NoFeasibleConfiguration(RuntimeError):
    pass


def _env_int(name: str, default: int) -> int:
    return int(os.environ.get(name, default))


def _inv_epsilon(epsilon: Fraction) -> int:
    inv = 1 / Fraction(epsilon)
    if inv.denominator != 1 or inv < 2:
        raise ValueError("epsilon must be 1/m for an integer m >= 2")
    return int(inv)


def _capped_power(base: Fraction, exponent: int):
    """base**exponent, or inf when the result would have too many digits."""
    if exponent * math.log10(base) > _HUGE_DIGITS:
        return INF
    return base**exponent


def theory_constants(epsilon) -> dict:
    """Gamma, alpha, beta and the class-count bound for epsilon = 1/m."""
    eps = Fraction(epsilon)
    m = _inv_epsilon(eps)
    alpha = eps ** (m + 1)
    beta = eps ** (4 * m + 1) / 4
    return {
        "Gamma": 12 * m,
        "alpha": alpha,
        "beta": beta,
        "H": _capped_power(Fraction(m), 2 * m + 1),
    }


@dataclass(frozen=True)
class PtasParams:
    epsilon: Fraction = Fraction(1, 2)
    gamma_k: int | None = None  # None: one component holding the whole tree
    min_subtour_demand: int = 1
    max_tours_per_component: int | float = INF
    x_set_size: int | float = INF
    sum_list_cap: int | float = INF
    x_strategy: str = "exhaustive"
    d_tilde: object = "theory"  # "theory", "exact" or a positive number
    x_values: tuple[int, ...] | None = None  # used by the "fixed" strategy
    x_budget: int = field(default_factory=lambda: _env_int("TREECVRP_X_BUDGET", 20_000))
    state_budget: int = field(
        default_factory=lambda: _env_int("TREECVRP_STATE_BUDGET", 2_000_000)
    )

    def __post_init__(self):
        object.__setattr__(self, "epsilon", Fraction(self.epsilon))
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.x_strategy not in X_STRATEGIES:
            raise ValueError(f"unknown x_strategy {self.x_strategy!r}")
        for name in ("min_subtour_demand", "max_tours_per_component", "x_set_size", "sum_list_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.gamma_k is not None and self.gamma_k < 2:
            raise ValueError("gamma_k must be at least 2")
        if self.x_strategy == "fixed" and not self.x_values:
            raise ValueError("the fixed strategy needs x_values")

    @classmethod
    def from_epsilon(cls, epsilon, k: int, **overrides) -> "PtasParams":
        """Theory constants for epsilon = 1/m.  They are enormous for any useful m."""
        eps = Fraction(epsilon)
        c = theory_constants(eps)
        alpha, beta = c["alpha"], c["beta"]
        inv_alpha = int(1 / alpha)
        values = dict(
            epsilon=eps,
            gamma_k=c["Gamma"] * k,
            min_subtour_demand=max(1, math.ceil(alpha * k)),
            max_tours_per_component=math.floor(2 * c["Gamma"] / alpha) + 1,
            x_set_size=math.floor(1 / beta),
            sum_list_cap=_capped_power(1 / beta, inv_alpha),
            x_strategy="exhaustive",
            d_tilde="theory",
        )
        values.update(overrides)
        return cls(**values)

    @classmethod
    def exhaustive(cls, gamma_k: int | None = None, **overrides) -> "PtasParams":
        """Vacuous caps: the program searches every solution."""
        values = dict(gamma_k=gamma_k, d_tilde="exact")
        values.update(overrides)
        return cls(**values)

    def with_overrides(self, **kw) -> "PtasParams":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        def show(x):
            if x is None or isinstance(x, str):
                return x
            if x == INF:
                return "inf"
            return str(x)

        return {
            "epsilon": str(self.epsilon),
            "gamma_k": self.gamma_k,
            "L": self.min_subtour_demand,
            "M": show(self.max_tours_per_component),
            "x_set_size": show(self.x_set_size),
            "sum_list_cap": show(self.sum_list_cap),
            "x_strategy": self.x_strategy,
            "d_tilde": show(self.d_tilde),
            "x_values": list(self.x_values) if self.x_values else None,
        }


def theory_d_tilde(epsilon, d_min: Fraction) -> Fraction:
    c = theory_constants(epsilon)
    return c["alpha"] * Fraction(epsilon) * d_min


# -- merging ----------------------------------------------------------------------

LOCAL, CRITICAL, ROOT = 0, 1, 2


def _size(e: int, mode: int) -> int:
    return e if mode == CRITICAL else e >> 1


@lru_cache(maxsize=1 << 17)
def _merges(P: tuple, Q: tuple, k: int, mode: int) -> tuple:
    """All ways to pair entries of P with entries of Q, one partner each, sums <= k.

    Returns ``((result, pairs), ...)`` with one entry per distinct result;
    ``pairs`` lists ``(p, q, count)``.  In ROOT mode P holds passing local
    entries which must all be paired and the result holds plain sizes.
    """
    pc = Counter(P)
    qc = Counter(Q)
    pv, qv = sorted(pc), sorted(qc)
    psz = [_size(p, mode) for p in pv]
    qsz = list(qv)
    if mode == LOCAL:
        qsz = [q >> 1 for q in qv]
    rem = [qc[q] for q in qv]
    cur: list[tuple[int, int, int]] = []
    out: dict[tuple, tuple] = {}

    def emit():
        used_p = Counter()
        merged = []
        for p, q, m in cur:
            used_p[p] += m
            s = _size(p, mode) + (q >> 1 if mode == LOCAL else q)
            if mode == LOCAL:
                merged.extend([(s << 1) | ((p | q) & 1)] * m)
            else:
                merged.extend([s] * m)
        rest = []
        if mode != ROOT:
            for p in pv:
                rest.extend([p] * (pc[p] - used_p[p]))
        for q, r in zip(qv, rem):
            rest.extend([q] * r)
        res = tuple(sorted(rest + merged))
        if res not in out:
            out[res] = tuple(cur)

    def rec(i: int, j: int, left: int):
        if i == len(pv):
            emit()
            return
        if j == len(qv) or left == 0:
            if left and mode == ROOT:
                return
            if i + 1 < len(pv):
                rec(i + 1, 0, pc[pv[i + 1]])
            else:
                rec(i + 1, 0, 0)
            return
        top = min(left, rem[j]) if psz[i] + qsz[j] <= k else 0
        for m in range(top + 1):
            if m:
                cur.append((pv[i], qv[j], m))
                rem[j] -= m
            rec(i, j + 1, left - m)
            if m:
                cur.pop()
                rem[j] += m

    rec(0, 0, pc[pv[0]] if pv else 0)
    return tuple(out.items())


def describe_local(config: tuple) -> tuple[tuple[int, str], ...]:
    return tuple((e >> 1, "passing" if e & 1 else "ending") for e in config)


def encode_local(entries) -> tuple:
    return tuple(sorted((s << 1) | (tag == "passing") for s, tag in entries))


# -- engine ----------------------------------------------------------------------------


class PtasDP:
    """Tables and reconstruction for one height-reduced tree."""

    def __init__(self, hat: HatTree, params: PtasParams, warm_start: Solution | None = None):
        self.hat = hat
        self.params = params
        T = hat.instance
        self.tree = T
        self.k = T.capacity
        if params.min_subtour_demand > self.k:
            raise ValueError("min_subtour_demand exceeds the capacity")
        self.w, self.denom = integer_weights(T)
        idist = [0] * T.n
        for v in T.preorder:
            if v != T.root:
                idist[v] = idist[T.parent[v]] + self.w[v]
        self.idist = idist
        self.M = params.max_tours_per_component
        self.cap = params.sum_list_cap
        self.comps = hat.decomposition.components
        self.comp_of_copy = {cp: cid for cid, cp in hat.copy_of.items()}
        self.critical = hat.critical
        self.warm_start = warm_start
        self.f: dict[int, dict[int, dict]] = {}
        self.g_comp: dict[int, dict] = {}
        self.g_crit: dict[int, dict] = {}
        self.chains: dict[int, dict[int, list]] = {}
        self.x_sets: dict[int, list[tuple[int, ...]]] = {}
        self.states = 0
        self._heuristic_counts = None

    # - bookkeeping

    def _charge(self, n: int):
        self.states += n
        if self.states > self.params.state_budget:
            raise BudgetExceeded(
                f"dynamic program exceeded {self.params.state_budget} states; lower "
                "max_tours_per_component / sum_list_cap or raise TREECVRP_STATE_BUDGET"
            )

    def _comp_children(self, c, u) -> list[int]:
        if u == c.exit:
            return []
        return [x for x in self.tree.children[u] if x in c.edges]

    def _distinct_ok(self, config: tuple, cap) -> bool:
        return cap == INF or len(set(config)) <= cap

    # - stage 1: inside a component

    def local_dp(self, cid: int) -> dict:
        """f-tables for every vertex of component ``cid``; returns the one at its root."""
        if cid in self.f:
            return self.f[cid][self.hat.copy_of[cid]]
        c = self.comps[cid]
        top = self.hat.copy_of[cid]
        T, k, M = self.tree, self.k, self.M
        order, stack = [], [top]
        while stack:
            u = stack.pop()
            order.append(u)
            stack.extend(self._comp_children(c, u))
        tables: dict[int, dict] = {}
        for u in reversed(order):
            kids = self._comp_children(c, u)
            table: dict[tuple, tuple] = {}
            if u == c.exit:
                for ell in range(int(min(M, T.subtree_demand[u])) + 1):
                    table[(1,) * ell] = (0, ("exit",))
            elif not kids:
                if T.demand[u] != 1:
                    raise ValueError(f"vertex {u} is a leaf without demand")
                table[(2,)] = (0, ("leaf",))
            elif len(kids) == 1:
                x = kids[0]
                for A, (cost, _) in tables[x].items():
                    table[A] = (cost + 2 * len(A) * self.w[x], ("one", x, A))
            else:
                x, y = kids
                wx, wy = self.w[x], self.w[y]
                for A1, (c1, _) in tables[x].items():
                    b1 = c1 + 2 * len(A1) * wx
                    for A2, (c2, _) in tables[y].items():
                        base = b1 + c2 + 2 * len(A2) * wy
                        for res, pairs in _merges(A1, A2, k, LOCAL):
                            if len(res) > M:
                                continue
                            cur = table.get(res)
                            if cur is None or base < cur[0]:
                                table[res] = (base, ("two", x, A1, y, A2, pairs))
            self._charge(len(table))
            tables[u] = table
        self.f[cid] = tables
        return tables[top]

    def f_table(self, cid: int, vertex: int | None = None) -> dict:
        """Readable f-table: config as ``((s, tag), ...)`` -> cost."""
        self.local_dp(cid)
        v = self.hat.copy_of[cid] if vertex is None else vertex
        return {describe_local(A): Fraction(cost, self.denom) for A, (cost, _) in self.f[cid][v].items()}

    # - stage 2: component roots

    def component_root_dp(self, cid: int) -> dict:
        if cid in self.g_comp:
            return self.g_comp[cid]
        c = self.comps[cid]
        f = self.local_dp(cid)
        k = self.k
        table: dict[tuple, tuple] = {}
        if c.exit is None:
            for A, (cost, _) in f.items():
                S = tuple(sorted(e >> 1 for e in A))
                if not self._distinct_ok(S, self.cap + self.M):
                    continue
                cur = table.get(S)
                if cur is None or cost < cur[0]:
                    table[S] = (cost, ("leaf", A))
        else:
            e = c.exit
            below = self.g_crit[e] if e in self.critical else {(): (0, None)}
            spine = 2 * (self.idist[e] - self.idist[self.hat.copy_of[cid]])
            for A, (fc, _) in f.items():
                passing = tuple(x for x in A if x & 1)
                ending = tuple(x >> 1 for x in A if not x & 1)
                for Ae, (ge, _) in below.items():
                    if len(passing) > len(Ae):
                        continue
                    base = fc + ge + spine * (len(Ae) - len(passing))
                    for res, pairs in _merges(passing, Ae, k, ROOT):
                        S = tuple(sorted(res + ending))
                        if not self._distinct_ok(S, self.cap + self.M):
                            continue
                        cur = table.get(S)
                        if cur is None or base < cur[0]:
                            table[S] = (base, ("root", A, Ae, pairs))
        self._charge(len(table))
        self.g_comp[cid] = table
        return table

    def g_table(self, vertex: int) -> dict:
        """Readable g-table at a critical vertex or a component-root copy."""
        if vertex in self.critical:
            tab = self.g_crit[vertex]
        else:
            tab = self.g_comp[self.comp_of_copy[vertex]]
        return {A: Fraction(v[0], self.denom) for A, v in tab.items()}

    # - stage 3: critical vertices

    def _warm_counts(self) -> dict[int, Counter]:
        if self._heuristic_counts is None:
            from .baselines import itp

            warm = self.warm_start or itp(self.tree)
            L, k = self.params.min_subtour_demand, self.k
            T = self.tree
            counts: dict[int, Counter] = {z: Counter() for z in self.critical}
            anc_copies: dict[int, list[int]] = {}  # terminal -> copies hanging off critical vertices
            for v in T.terminals:
                chain, u = [], v
                while u != -1:
                    if u in self.comp_of_copy and T.parent[u] in self.critical:
                        chain.append(u)
                    u = T.parent[u]
                anc_copies[v] = chain
            for tour in warm.tours:
                per_copy = Counter()
                for v, units in tour.claims:
                    for cp in anc_copies.get(v, ()):
                        per_copy[cp] += units
                for cp, s in per_copy.items():
                    counts[T.parent[cp]][min(max(s, L), k)] += 1
            self._heuristic_counts = counts
        return self._heuristic_counts

    def x_candidates(self, z: int) -> list[tuple[int, ...]]:
        p = self.params
        L, k = p.min_subtour_demand, self.k
        size = int(min(p.x_set_size, k - L + 1))
        if p.x_strategy == "fixed":
            return [tuple(sorted(set(p.x_values)))]
        if p.x_strategy == "exhaustive":
            count = math.comb(k - L + 1, size)
            if count > p.x_budget:
                raise BudgetExceeded(
                    f"exhaustive X enumeration needs {count} sets (budget {p.x_budget}); "
                    "use x_strategy=from_heuristic or geometric_grid, or shrink x_set_size"
                )
            return list(combinations(range(L, k + 1), size))
        if p.x_strategy == "geometric_grid":
            vals, t = set(), 0
            while True:
                v = math.ceil(L * (1 + p.epsilon) ** t)
                if v > k:
                    break
                vals.add(v)
                t += 1
            grid = sorted(vals - {k})[: max(size - 1, 0)]
            return [tuple(sorted(set(grid) | {k}))]
        counts = self._warm_counts()[z]
        ranked = sorted((v for v in counts if v != k), key=lambda v: (-counts[v], v))
        return [tuple(sorted(set(ranked[: max(size - 1, 0)]) | {k}))]

    def critical_dp(self, z: int) -> dict:
        if z in self.g_crit:
            return self.g_crit[z]
        T, k = self.tree, self.k
        kids = list(T.children[z])
        child_tables = [(self.w[cp], self.component_root_dp(self.comp_of_copy[cp])) for cp in kids]
        xs = self.x_candidates(z)
        self.x_sets[z] = xs
        best: dict[tuple, tuple] = {}
        chains: dict[int, list] = {}
        for xi, X in enumerate(xs):
            rounded = []
            for wi, tab in child_tables:
                R: dict[tuple, tuple] = {}
                for A, (cost, _) in tab.items():
                    Q = []
                    for s in A:
                        pos = bisect_left(X, s)
                        if pos == len(X):
                            break
                        Q.append(X[pos])
                    else:
                        Qt = tuple(sorted(Q))
                        val = cost + 2 * len(A) * wi
                        cur = R.get(Qt)
                        if cur is None or val < cur[0]:
                            R[Qt] = (val, A)
                rounded.append(R)
            dp: dict[tuple, tuple] = {(): (0, None)}
            layers = []
            for R in rounded:
                new: dict[tuple, tuple] = {}
                for P, (cp_, _) in dp.items():
                    for Qt, (cq, A) in R.items():
                        base = cp_ + cq
                        for res, pairs in _merges(P, Qt, k, CRITICAL):
                            if not self._distinct_ok(res, self.cap):
                                continue
                            cur = new.get(res)
                            if cur is None or base < cur[0]:
                                new[res] = (base, (P, Qt, A, pairs))
                self._charge(len(new))
                layers.append(new)
                dp = new
                if not dp:
                    break
            if len(layers) == len(rounded):
                for A, (cost, _) in dp.items():
                    cur = best.get(A)
                    if cur is None or cost < cur[0]:
                        best[A] = (cost, xi)
                chains[xi] = layers
            used = {xi for _, xi in best.values()}
            chains = {x: v for x, v in chains.items() if x in used}
        self.chains[z] = chains
        self.g_crit[z] = best
        return best

    # - driver

    def run(self) -> dict:
        """Fill every table bottom-up; returns the table at the depot."""
        T = self.tree
        items = [(T.depth[self.hat.copy_of[c.id]], 0, c.id) for c in self.comps]
        items += [(T.depth[z], 1, z) for z in self.critical]
        # deeper first; at equal depth a critical vertex is never needed by a copy
        for _, kind, ident in sorted(items, key=lambda t: (-t[0], t[1], t[2])):
            if kind == 0:
                self.component_root_dp(ident)
            else:
                self.critical_dp(ident)
        return self.top_table()

    def top_table(self) -> dict:
        root = self.tree.root
        if root in self.critical:
            return self.g_crit[root]
        return self.g_comp[self.comp_of_copy[root]]

    def best_entry(self) -> tuple[tuple, int]:
        table = self.top_table()
        if not table:
            raise NoFeasibleConfiguration(
                "no feasible configuration under these parameters; relax M, sum_list_cap or X"
            )
        A = min(table, key=lambda a: (table[a][0], len(a), a))
        return A, table[A][0]

    # - reconstruction

    def _sub_keys(self, key, chain_steps) -> list:
        kind = key[0]
        if kind == "f":
            _, cid, u, A = key
            back = self.f[cid][u][A][1]
            if back[0] == "one":
                return [("f", cid, back[1], back[2])]
            if back[0] == "two":
                return [("f", cid, back[1], back[2]), ("f", cid, back[3], back[4])]
            return []
        if kind == "gc":
            _, cid, A = key
            back = self.g_comp[cid][A][1]
            top = self.hat.copy_of[cid]
            if back[0] == "leaf":
                return [("f", cid, top, back[1])]
            _, Ac, Ae, _ = back
            out = [("f", cid, top, Ac)]
            if Ae:
                out.append(("gz", self.comps[cid].exit, Ae))
            return out
        _, z, A = key
        xi = self.g_crit[z][A][1]
        layers = self.chains[z][xi]
        steps, cur = [], A
        for i in range(len(layers) - 1, -1, -1):
            P, Qt, Ai, pairs = layers[i][cur][1]
            steps.append((Qt, Ai, pairs))
            cur = P
        if cur != ():
            raise AssertionError("broken back-pointer chain at a critical vertex")
        steps.reverse()
        chain_steps[key] = (self.x_sets[z][xi], steps)
        kids = self.tree.children[z]
        return [("gc", self.comp_of_copy[cp], Ai) for cp, (_, Ai, _) in zip(kids, steps)]

    @staticmethod
    def _combine(left, right, pairs, mode):
        by_l: dict[int, list] = {}
        by_r: dict[int, list] = {}
        for s in left:
            by_l.setdefault(s[0], []).append(s)
        for s in right:
            by_r.setdefault(s[0], []).append(s)
        merged = []
        for p, q, m in pairs:
            for _ in range(m):
                a = by_l[p].pop()
                b = by_r[q].pop()
                if mode == LOCAL:
                    val = (((p >> 1) + (q >> 1)) << 1) | ((p | q) & 1)
                else:
                    val = p + q if mode == CRITICAL else (p >> 1) + q
                merged.append([val, a[1] + b[1], a[2] + b[2]])
        rest_l = [s for v in by_l.values() for s in v]
        if mode == ROOT and rest_l:
            raise AssertionError("unmatched passing subtour")
        return merged + rest_l + [s for v in by_r.values() for s in v]

    def reconstruct(self, entry: tuple | None = None) -> Solution:
        """Concrete tours on the reduced tree for a table entry at the depot."""
        if entry is None:
            entry, _ = self.best_entry()
        root = self.tree.root
        top = ("gz", root, entry) if root in self.critical else ("gc", self.comp_of_copy[root], entry)
        chain_steps: dict = {}
        order, stack = [], [top]
        subs: dict = {}
        while stack:
            key = stack.pop()
            order.append(key)
            subs[key] = self._sub_keys(key, chain_steps)
            stack.extend(subs[key])
        lists: dict = {}
        k = self.k
        for key in reversed(order):
            kind = key[0]
            if kind == "f":
                _, cid, u, A = key
                back = self.f[cid][u][A][1]
                if back[0] == "exit":
                    out = [[1, [], 0] for _ in A]
                elif back[0] == "leaf":
                    out = [[2, [u], 0]]
                elif back[0] == "one":
                    out = lists.pop(subs[key][0])
                else:
                    k1, k2 = subs[key]
                    out = self._combine(lists.pop(k1), lists.pop(k2), back[5], LOCAL)
                for s in out:
                    if (s[0] >> 1) != len(s[1]) or (s[0] >> 1) > k:
                        raise AssertionError("local subtour inconsistent with its configuration")
            elif kind == "gc":
                _, cid, A = key
                back = self.g_comp[cid][A][1]
                local = lists.pop(subs[key][0])
                if back[0] == "leaf":
                    out = [[s[0] >> 1, s[1], s[2]] for s in local]
                else:
                    passing = [s for s in local if s[0] & 1]
                    ending = [[s[0] >> 1, s[1], s[2]] for s in local if not s[0] & 1]
                    below = lists.pop(subs[key][1]) if len(subs[key]) > 1 else []
                    out = self._combine(passing, below, back[3], ROOT) + ending
            else:
                X, steps = chain_steps[key]
                out = []
                for sub_key, (Qt, Ai, pairs) in zip(subs[key], steps):
                    child = lists.pop(sub_key)
                    rounded = []
                    for s in child:
                        xb = X[bisect_left(X, s[0])]
                        rounded.append([xb, s[1], s[2] + xb - s[0]])
                    if sorted(s[0] for s in rounded) != list(Qt):
                        raise AssertionError("rounded child list does not match its table entry")
                    out = self._combine(out, rounded, pairs, CRITICAL)
            got = sorted(s[0] for s in out)
            if got != list(key[-1]):
                raise AssertionError(f"reconstructed profile {got} differs from {list(key[-1])}")
            if kind != "f":
                for s in out:
                    if s[0] > k or s[0] != len(s[1]) + s[2]:
                        raise AssertionError("subtour demand bookkeeping broken")
            lists[key] = out
        tours = [Tour.of(sorted(s[1])) for s in lists[top]]
        sol = Solution.build(self.tree, tours)
        stored = Fraction(self.top_table()[entry][0], self.denom)
        if sol.cost != stored:
            raise AssertionError(f"reconstructed cost {sol.cost} differs from table value {stored}")
        return sol


# -- orchestration --------------------------------------------------------------------


@dataclass
class PtasResult:
    solution: Solution
    hat_solution: Solution
    metadata: dict
    engine: PtasDP | None = None


def resolve_d_tilde(params: PtasParams, instance: Instance, dec) -> Fraction:
    if params.d_tilde == "exact":
        return exact_d_tilde(instance, dec)
    if params.d_tilde == "theory":
        d_min = min(instance.dist[v] for v in instance.terminals)
        if d_min > 0:
            try:
                return theory_d_tilde(params.epsilon, d_min)
            except ValueError:
                pass
        return exact_d_tilde(instance, dec)
    value = Fraction(params.d_tilde)
    if value <= 0:
        raise ValueError("d_tilde must be positive")
    return value


def guarantee_applies(instance: Instance, params: PtasParams, d_tilde: Fraction) -> bool:
    """True only for exhaustive runs at theory constants on a bounded-distance instance."""
    try:
        m = _inv_epsilon(params.epsilon)
    except ValueError:
        return False
    if params.x_strategy != "exhaustive":
        return False
    k = instance.capacity
    ref = PtasParams.from_epsilon(params.epsilon, k)
    d = [instance.dist[v] for v in instance.terminals]
    if min(d) <= 0 or max(d) >= min(d) * Fraction(m) ** (m - 1):
        return False
    return (
        params.gamma_k == ref.gamma_k
        and params.min_subtour_demand <= ref.min_subtour_demand
        and params.max_tours_per_component >= ref.max_tours_per_component
        and params.x_set_size >= ref.x_set_size
        and params.sum_list_cap >= ref.sum_list_cap
        and d_tilde <= theory_d_tilde(params.epsilon, min(d))
    )


def run_ptas(instance: Instance, params: PtasParams) -> PtasResult:
    """Normalize, decompose, reduce height, run the tables, reconstruct and lift."""
    if not instance.is_unit_demand:
        raise ValueError("the dynamic program needs unit demands; expand splittable instances first")
    if not instance.terminals:
        empty = Solution((), Fraction(0))
        return PtasResult(empty, empty, {"algo": "ptas", "params": params.as_dict()})
    norm, nmap = normalize(instance)
    gamma_k = params.gamma_k if params.gamma_k is not None else max(2, norm.total_demand + 1)
    dec = decompose(norm, gamma_k)
    d_tilde = resolve_d_tilde(params, norm, dec)
    hat = build_hat_tree(norm, dec, d_tilde)
    engine = PtasDP(hat, params)
    engine.run()
    sol_hat = engine.reconstruct()
    sol_norm = lift_solution(hat, sol_hat)
    sol = nmap.pull_back(instance, sol_norm)
    report = verify(instance, sol)
    if not report.feasible:
        raise AssertionError(f"dynamic program produced an infeasible solution: {report.violations}")
    meta = {
        "algo": "ptas",
        "params": params.as_dict(),
        "gamma_k": gamma_k,
        "d_tilde": str(d_tilde),
        "components": len(dec.components),
        "critical_vertices": len(hat.critical),
        "states": engine.states,
        "guarantee": guarantee_applies(instance, params, d_tilde),
        "hat_cost": str(sol_hat.cost),
    }
    return PtasResult(sol, sol_hat, meta, engine)


def solve_ptas(instance: Instance, params: PtasParams | None = None) -> Solution:
    return run_ptas(instance, params or PtasParams.exhaustive()).solution


def hat_tour_costs(hat: HatTree, solution: Solution) -> list[Fraction]:
    return [tour_cost(hat.instance, t) for t in solution.tours]
