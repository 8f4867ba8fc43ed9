from fractions import Fraction

import numpy as np
import pytest

from oracles import bisection_fair_index
from cics.amortize import (
    chain_from_distribution,
    fair_index,
    fair_indices,
    optimality_curve,
    surrogate_distribution,
    surrogate_values,
)
from cics.chains import MarkovChainTree, Node, expected_full_walk
from cics.distributions import normalize
from cics.instances import random_dist, random_tree, weitzman_tree


def box(cost, a=2.0, b=0.0):
    return Node("r", None, cost, [(0.5, Node("a", a)), (0.5, Node("b", b))])


def test_optimality_curve_examples():
    leaf = Node("t", 2.0)
    V = optimality_curve(leaf, (-5, 5))
    assert [V(y) for y in (-5, 0, 2, 4)] == [2, 2, 2, 4]
    V = optimality_curve(box(0.5), (-5, 5))
    assert [V(y) for y in (0, 1, 3)] == pytest.approx([0.5, 1, 3])
    free = Node("r", None, 0.0, [(1.0, Node("t", 3.0))])
    V = optimality_curve(free, (-5, 5))
    assert [V(y) for y in (-1, 3, 4)] == pytest.approx([3, 3, 4])


def test_fair_index_examples():
    assert fair_index(box(0.5)) == pytest.approx(1.0)
    assert fair_index(box(0.0, 5.0, 1.0)) == pytest.approx(5.0)
    assert fair_index(box(10.0)) == pytest.approx(-9.0)


def test_surrogate_values_weitzman():
    prof = surrogate_values(weitzman_tree())
    assert prof.w == {"a": 1.0, "b": 0.0}
    assert prof.g["r"] == 1.0
    assert prof.W.atoms == ((1.0, 0.5), (0.0, 0.5))
    assert surrogate_distribution(prof) == prof.W


def test_zero_cost_single_level_keeps_values():
    t = MarkovChainTree(Node("r", None, 0.0, [(0.3, Node("x", 4.0)), (0.7, Node("y", -1.0))]))
    assert surrogate_values(t).w == {"x": 4.0, "y": -1.0}


def test_chain_from_distribution_example():
    t = chain_from_distribution(normalize([(1, 0.5), (3, 0.5)]), eps=0.01)
    r = t.root
    assert r.id == "s2" and r.cost == 0.01
    (p1, t2), (p2, t1) = r.children
    assert (p1, t2.value) == (0.5, pytest.approx(3.02))
    assert (p2, t1.value) == (0.5, 1)
    single = chain_from_distribution(normalize([(7, 1)]))
    assert single.root.is_leaf and single.root.value == 7


def test_chain_from_distribution_errors():
    with pytest.raises(ValueError):
        chain_from_distribution(normalize([(1, 1)]), eps=0)


@pytest.mark.parametrize("seed", range(100))
def test_round_trip_exact(seed):
    d = random_dist(np.random.default_rng(seed), k_max=6, exact=True)
    W = surrogate_values(chain_from_distribution(d, Fraction(1, 10_000), exact=True)).W
    assert [v for v, _ in W.atoms] == [v for v, _ in d.atoms]
    assert max(abs(float(p - q)) for (_, p), (_, q) in zip(W.atoms, d.atoms)) <= 1e-12


@pytest.mark.parametrize("seed", range(30))
def test_round_trip_float_is_close(seed):
    d = random_dist(np.random.default_rng(seed), k_max=6)
    W = surrogate_values(chain_from_distribution(d, 1e-4)).W
    assert len(W.atoms) == len(d.atoms)
    for (v1, p1), (v2, p2) in zip(W.atoms, d.atoms):
        assert v1 == pytest.approx(v2, abs=1e-9)
        assert p1 == pytest.approx(p2, abs=1e-12)


def stopped_walk_utility(node, prof, theta):
    if prof.g[node.id] < theta:
        return 0.0
    if node.is_leaf:
        return node.value if prof.w[node.id] >= theta else 0.0
    return -node.cost + sum(p * stopped_walk_utility(c, prof, theta) for p, c in node.children)


@pytest.mark.parametrize("seed", range(40))
def test_amortization_invariants(seed):
    rng = np.random.default_rng(seed)
    tree = random_tree(rng, depth=4, branching=3, value_range=(0, 5), cost_max=5.0)
    prof = surrogate_values(tree)
    ev, ec = expected_full_walk(tree)
    assert sum(prof.p[t] * prof.w[t] for t in prof.w) == pytest.approx(ev - ec, abs=1e-7)
    for n in tree.nodes():
        if n.is_leaf:
            assert prof.w[n.id] <= n.value
        else:
            assert prof.g[n.id] == max(prof.g[c.id] for _, c in n.children)
            for _, c in n.children:
                assert prof.g[c.id] <= prof.g[n.id]
    for theta in set(prof.w.values()):
        promised = sum(prof.p[t] * w for t, w in prof.w.items() if w >= theta)
        assert stopped_walk_utility(tree.root, prof, theta) == pytest.approx(promised, abs=1e-7)


@pytest.mark.parametrize("seed", range(20))
def test_fair_index_matches_bisection(seed):
    tree = random_tree(np.random.default_rng(seed), depth=3, branching=3)
    taus = fair_indices(tree)
    for n in tree.internal():
        assert taus[n.id] == pytest.approx(bisection_fair_index(n), abs=1e-7)
