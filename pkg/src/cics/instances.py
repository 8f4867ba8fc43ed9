"""Instance JSON I/O, built-in instances and seeded random generators."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .chains import Action, InstanceError, Internal, MarkovChainTree, Mdp, Node, Terminal
from .constraints import (
    AtLeastK,
    Constraint,
    ConstraintError,
    ExplicitFamily,
    Knapsack,
    KSystem,
    SingleSelection,
    constraint_from_json,
)
from .distributions import DiscreteDist, DistributionError, normalize
from .policies import CicsInstance

# stand-in for an infinite terminal value; finite so curves stay well defined
BIG = 1e6


@dataclass
class BcsInstance:
    constraint: Constraint
    dists: list
    objective: str = "max"
    name: str = ""


def _constraint(doc: dict, n: int) -> Constraint:
    if "constraint" not in doc:
        raise InstanceError("missing 'constraint'", "/constraint")
    try:
        return constraint_from_json(doc["constraint"], n)
    except (ConstraintError, TypeError, ValueError) as exc:
        raise InstanceError(str(exc), "/constraint") from None


def cics_from_json(doc: dict) -> CicsInstance:
    if not isinstance(doc, dict):
        raise InstanceError("instance must be a JSON object", "")
    if "mdps" not in doc or not isinstance(doc["mdps"], list):
        raise InstanceError("missing 'mdps' list", "/mdps")
    mdps = [Mdp.from_json(m, f"/mdps/{i}") for i, m in enumerate(doc["mdps"])]
    C = _constraint(doc, len(mdps))
    return CicsInstance(C, mdps, doc.get("objective", "max"), doc.get("name", ""))


def bcs_from_json(doc: dict) -> BcsInstance:
    if "dists" not in doc or not isinstance(doc["dists"], list):
        raise InstanceError("missing 'dists' list", "/dists")
    dists = []
    for i, d in enumerate(doc["dists"]):
        try:
            dists.append(DiscreteDist.from_json(d))
        except (DistributionError, KeyError, TypeError, ValueError) as exc:
            raise InstanceError(f"bad distribution ({exc})", f"/dists/{i}") from None
    C = _constraint(doc, len(dists))
    objective = doc.get("objective", "max")
    if objective == "min" and not isinstance(C, AtLeastK):
        raise InstanceError("minimisation instances need an 'at_least' constraint", "/constraint")
    return BcsInstance(C, dists, objective, doc.get("name", ""))


def cics_to_json(inst: CicsInstance) -> dict:
    out = {"name": inst.name, "objective": inst.objective,
           "constraint": inst.constraint.to_json(), "mdps": [m.to_json() for m in inst.mdps]}
    if isinstance(inst.constraint, Knapsack):
        out["constraint"]["sizes"] = list(inst.constraint.sizes)
    return out


def bcs_to_json(inst: BcsInstance) -> dict:
    out = {"name": inst.name, "objective": inst.objective,
           "constraint": inst.constraint.to_json(), "dists": [d.to_json() for d in inst.dists]}
    if isinstance(inst.constraint, Knapsack):
        out["constraint"]["sizes"] = list(inst.constraint.sizes)
    return out


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"invalid JSON ({exc.msg} at line {exc.lineno})", "") from None


# --------------------------------------------------------------------------
# built-in instances


def box_mdp(cost, outcomes, name: str = "b") -> Mdp:
    """One costly inspection revealing a value: ``outcomes`` is ``[(v, p)]``."""
    states: dict = {}
    trans = []
    for k, (v, p) in enumerate(outcomes):
        sid = f"{name}{k}"
        states[sid] = Terminal(v)
        trans.append((sid, p))
    states["r"] = Internal((Action(cost, tuple(trans)),))
    return Mdp("r", states)


def weitzman_box() -> CicsInstance:
    """Single box: pay 0.5 to see 2 or 0 with equal odds."""
    return CicsInstance(SingleSelection(1), [box_mdp(0.5, [(2.0, 0.5), (0.0, 0.5)])], "max",
                        "weitzman")


def weitzman_tree() -> MarkovChainTree:
    return MarkovChainTree(Node("r", None, 0.5, [(0.5, Node("a", 2.0)), (0.5, Node("b", 0.0))]))


def min_example(N) -> CicsInstance:
    """Two-MDP covering instance whose commitment gap is ``(N + 1) / 2``."""
    p = 1.0 / (N + 1)
    q = 1.0 / (2 * N)
    m1 = Mdp("r", {"r": Internal((Action(0.0, (("inf", p), ("one", 1 - p))),)),
                   "inf": Terminal(BIG), "one": Terminal(1.0)})
    m2 = Mdp("r", {"r": Internal((Action(0.0, (("a", 1.0),)),
                                  Action(0.0, (("big", q), ("small", 1 - q))))),
                   "a": Terminal(1.0), "big": Terminal(2.0 * N * N - 1),
                   "small": Terminal(1.0 / (2 * N - 1))})
    return CicsInstance(AtLeastK(2, 1), [m1, m2], "min", f"min_example_N{N}")


def min_example_bcs(N) -> BcsInstance:
    """Distributions the ex-ante commitments of :func:`min_example` induce."""
    x1 = normalize([(1.0, 1 - 1.0 / (N + 1)), (BIG, 1.0 / (N + 1))])
    x2 = normalize([(1.0 / (2 * N - 1), 1 - 1.0 / (2 * N)), (2.0 * N * N - 1, 1.0 / (2 * N))])
    return BcsInstance(AtLeastK(2, 1), [x1, x2], "min", f"min_example_bcs_N{N}")


def min_example_chains(N) -> CicsInstance:
    """:func:`min_example` with the second MDP committed to its risky action."""
    inst = min_example(N)
    m2 = inst.mdps[1]
    chain2 = Mdp("r", {"r": Internal((m2.states["r"].actions[1],)),
                       "big": m2.states["big"], "small": m2.states["small"]})
    return CicsInstance(inst.constraint, [inst.mdps[0], chain2], "min", f"min_chains_N{N}")


def bernoulli_bcs(n: int, p: float | None = None, value: float = 1.0) -> BcsInstance:
    p = 1.0 / n if p is None else p
    d = normalize([(value, p), (0.0, 1 - p)])
    return BcsInstance(SingleSelection(n), [d] * n, "max", f"bernoulli_n{n}")


# --------------------------------------------------------------------------
# seeded random generators


def random_dist(rng: np.random.Generator, k_max: int = 6, lo: int = 0, hi: int = 20,
                exact: bool = False) -> DiscreteDist:
    """Up to ``k_max`` distinct integer atoms with random positive weights."""
    k = int(rng.integers(1, k_max + 1))
    vals = rng.choice(np.arange(lo, hi + 1), size=min(k, hi - lo + 1), replace=False)
    wts = rng.integers(1, 10, size=len(vals))
    if exact:
        tot = int(wts.sum())
        return DiscreteDist(tuple(sorted(((Fraction(int(v)), Fraction(int(w), tot))
                                          for v, w in zip(vals, wts)), reverse=True)))
    return normalize([(float(v), float(w)) for v, w in zip(vals, wts)])


def _probs(rng: np.random.Generator, k: int) -> list:
    w = rng.integers(1, 10, size=k).astype(float)
    return list(w / w.sum())


def random_tree(rng: np.random.Generator, depth: int = 4, branching: int = 3,
                value_range: tuple = (0, 20), cost_max: float = 3.0) -> MarkovChainTree:
    counter = itertools.count()

    def build(d: int) -> Node:
        nid = f"n{next(counter)}"
        if d == 0 or (d < depth and rng.random() < 0.3):
            return Node(nid, float(rng.integers(value_range[0], value_range[1] + 1)))
        k = int(rng.integers(1, branching + 1))
        cost = float(np.round(rng.uniform(0, cost_max), 2))
        return Node(nid, None, cost, [(p, build(d - 1)) for p in _probs(rng, k)])

    return MarkovChainTree(build(depth))


def random_mdp(rng: np.random.Generator, depth: int = 3, max_actions: int = 2,
               branching: int = 2, value_range: tuple = (0, 10), cost_max: float = 2.0,
               prefix: str = "s") -> Mdp:
    """Tree-shaped random MDP (every state has a single parent)."""
    states: dict = {}
    counter = itertools.count()

    def build(d: int) -> str:
        sid = f"{prefix}{next(counter)}"
        if d == 0 or (d < depth and rng.random() < 0.25):
            states[sid] = Terminal(float(rng.integers(value_range[0], value_range[1] + 1)))
            return sid
        acts = []
        for _ in range(int(rng.integers(1, max_actions + 1))):
            k = int(rng.integers(1, branching + 1))
            kids = [build(d - 1) for _ in range(k)]
            cost = float(np.round(rng.uniform(0, cost_max), 2))
            acts.append(Action(cost, tuple(zip(kids, _probs(rng, k)))))
        states[sid] = Internal(tuple(acts))
        return sid

    root = build(depth)
    return Mdp(root, states)


def random_chain(rng: np.random.Generator, depth: int = 3, branching: int = 2,
                 value_range: tuple = (0, 10), cost_max: float = 2.0) -> Mdp:
    return random_mdp(rng, depth, 1, branching, value_range, cost_max)


def _graphic_family(rng: np.random.Generator, n: int) -> list:
    """Independent sets of a random multigraph with ``n`` edges (forests)."""
    verts = int(rng.integers(2, max(3, n) + 1))
    edges = [tuple(rng.choice(verts, size=2, replace=True)) for _ in range(n)]

    def acyclic(S) -> bool:
        parent = list(range(verts))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for i in S:
            a, b = find(edges[i][0]), find(edges[i][1])
            if a == b:
                return False
            parent[a] = b
        return True

    return [S for r in range(n + 1) for S in itertools.combinations(range(n), r) if acyclic(S)]


def random_matroid(rng: np.random.Generator, n: int) -> ExplicitFamily:
    """Random graphic matroid, optionally truncated, as an explicit family."""
    fam = _graphic_family(rng, n)
    if rng.random() < 0.5:
        top = max(len(S) for S in fam)
        cap = int(rng.integers(1, max(1, top) + 1))
        fam = [S for S in fam if len(S) <= cap]
    C = ExplicitFamily(n, [list(S) for S in fam])
    if not C.is_matroid:
        raise AssertionError("generator produced a non-matroid")
    return C


def random_k_system(rng: np.random.Generator, n: int, k: int) -> KSystem:
    """Intersection of ``k`` random matroids, which is a ``k``-system."""
    fam = set(frozenset(S) for S in random_matroid(rng, n).feasible_sets())
    for _ in range(k - 1):
        fam &= set(random_matroid(rng, n).feasible_sets())
    return KSystem(n, [sorted(S) for S in fam], k=k)


def random_knapsack(rng: np.random.Generator, n: int) -> Knapsack:
    return Knapsack([float(np.round(rng.uniform(0.05, 1.0), 3)) for _ in range(n)])
