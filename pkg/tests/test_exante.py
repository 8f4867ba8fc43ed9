import numpy as np
import pytest

from oracles import local_curve_oracle, local_policy_points
from cics.amortize import surrogate_values
from cics.chains import Action, Internal, Mdp, Terminal, apply_commitment, unroll_to_tree
from cics.constraints import SingleSelection, UniformMatroid
from cics.distributions import normalize, revenue_curve
from cics.exante import (
    committed_tree,
    ex_ante_opt_cics,
    ex_ante_value_bcs,
    extract_commitment,
    local_curve,
    surrogate_revenue_curve,
)
from cics.instances import (
    bernoulli_bcs,
    min_example,
    random_chain,
    random_mdp,
    weitzman_box,
)
from cics.plcurves import clip_monotone_hull
from cics.policies import CicsInstance, optimal_cics_dp


def terminal(v):
    return Mdp("t", {"t": Terminal(v)})


def two_actions():
    """Root chooses a sure 2.2 (cost 0.2) or a coin for 4 or 0 (cost 0.5)."""
    return Mdp("r", {
        "r": Internal((Action(0.2, (("one", 1.0),)),
                       Action(0.5, (("hi", 0.5), ("lo", 0.5))))),
        "one": Terminal(2.2), "hi": Terminal(4.0), "lo": Terminal(0.0)})


def test_local_curve_examples():
    assert local_curve(weitzman_box().mdps[0]).curve.bp == ((0, 0), (0.5, 0.5), (1, 0.5))
    assert local_curve(terminal(3.0)).curve.bp == ((0, 0), (1, 3.0))
    assert local_curve(terminal(-1.0)).curve.bp == ((0, 0), (1, 0))


def test_local_curve_is_concave_nondecreasing():
    for seed in range(20):
        f = local_curve(random_mdp(np.random.default_rng(seed))).curve
        assert f.is_concave() and f(0) == 0
        assert all(s >= -1e-12 for s in f.slopes())


def test_exante_bcs_examples():
    d = normalize([(1, 0.5), (0, 0.5)])
    assert ex_ante_value_bcs(SingleSelection(2), [d, d]).value == pytest.approx(1.0)
    for n in (2, 3, 5):
        b = bernoulli_bcs(n)
        sol = ex_ante_value_bcs(b.constraint, b.dists)
        assert sol.value == pytest.approx(1.0) and sol.q == pytest.approx([1 / n] * n)
    ds = [normalize([(3, 0.2), (-1, 0.8)]), normalize([(2, 1.0)])]
    assert ex_ante_value_bcs(UniformMatroid(2, 2), ds).value == pytest.approx(0.6 + 2)


@pytest.mark.parametrize("N", [2, 3, 10])
def test_min_example_exante(N):
    inst = min_example(N)
    res = ex_ante_opt_cics(inst.constraint, inst.mdps, "min")
    assert res.value == pytest.approx(1 / N, abs=1e-9)
    assert res.commitments[1].per_state["r"] == (0.0, 1.0)
    small = next(k for k in res.accept[1] if k.endswith("small"))
    assert res.accept[1][small] == pytest.approx(1.0)
    one = next(k for k in res.accept[0] if k.endswith("one"))
    assert res.accept[0][one] == pytest.approx((N + 1) / (2 * N * N))


def test_weitzman_exante():
    inst = weitzman_box()
    res = ex_ante_opt_cics(inst.constraint, inst.mdps)
    assert res.value == pytest.approx(0.5) and res.q == pytest.approx([0.5])


def test_all_negative_terminals():
    res = ex_ante_opt_cics(SingleSelection(2), [terminal(-1.0), terminal(-2.0)])
    assert res.value == 0 and res.q == pytest.approx([0, 0])


def test_extract_commitment_interpolates_and_mixes():
    m = two_actions()
    lc = local_curve(m)
    # f: halt, then the coin (acceptance 0.5, utility 1.5), then the sure 2.2
    pol = extract_commitment(lc, 0.5)
    assert pol.commitment.per_state["r"] == (0.0, 1.0)
    assert pol.halt["r"] == 0.0
    pol = extract_commitment(lc, 0.25)
    assert pol.commitment.per_state["r"] == (0.0, 1.0)
    assert pol.halt["r"] == pytest.approx(0.5)
    assert pol.value == pytest.approx(lc.curve(0.25))
    # unclipped curve: f(0.75) mixes both actions half and half
    lcu = local_curve(m, clip=False)
    mix = extract_commitment(lcu, 0.75)
    assert mix.commitment.per_state["r"] == pytest.approx((0.5, 0.5))
    again = local_curve(apply_commitment(lcu.mdp, mix.commitment), clip=False)
    assert again.curve(0.75) == pytest.approx(lcu.curve(0.75))


def test_extract_commitment_domain():
    with pytest.raises(ValueError):
        extract_commitment(local_curve(two_actions()), 1.5)


@pytest.mark.parametrize("seed", range(30))
def test_local_curve_matches_vertex_enumeration(seed):
    m = random_mdp(np.random.default_rng(seed), depth=2, max_actions=2, branching=2)
    lc = local_curve(m)
    for q in np.linspace(0, 1, 11):
        assert lc.curve(q) == pytest.approx(local_curve_oracle(m, q), abs=1e-7)
    assert len(local_policy_points(m)) >= 2


@pytest.mark.parametrize("seed", range(20))
def test_f_at_one_is_single_mdp_optimum(seed):
    m = random_mdp(np.random.default_rng(seed), depth=3)
    f1 = local_curve(m).curve(1)
    assert f1 == pytest.approx(optimal_cics_dp(CicsInstance(SingleSelection(1), [m])), abs=1e-7)


@pytest.mark.parametrize("seed", range(30))
def test_chain_curve_equals_surrogate_revenue_curve(seed):
    m = random_chain(np.random.default_rng(seed), depth=3, branching=3)
    f = local_curve(m).curve
    R = surrogate_revenue_curve(surrogate_values(unroll_to_tree(m)).W)
    for q in np.linspace(0, 1, 21):
        assert f(q) == pytest.approx(R(q), abs=1e-7)


@pytest.mark.parametrize("seed", range(15))
def test_commitment_fixed_point(seed):
    rng = np.random.default_rng(seed)
    mdps = [random_mdp(rng, depth=2, prefix=f"m{i}_") for i in range(3)]
    C = UniformMatroid(3, 1 + seed % 2)
    res = ex_ante_opt_cics(C, mdps)
    chains = [apply_commitment(lc.mdp, c) for lc, c in zip(res.local, res.commitments)]
    again = ex_ante_opt_cics(C, chains)
    assert again.value == pytest.approx(res.value, abs=1e-7)
    for lc, c, q in zip(res.local, res.commitments, res.q):
        tree = committed_tree(lc, c)
        W = surrogate_values(tree).W
        assert clip_monotone_hull(revenue_curve(W))(q) >= lc.curve(q) - 1e-7
