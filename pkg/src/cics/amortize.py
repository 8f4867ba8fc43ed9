"""Surrogate-value amortization of Markov-chain trees.

Each internal node gets a fair index: the smallest outside option ``y`` at
which quitting is as good as continuing, read off the node's optimality
curve ``V_y``. A leaf's surrogate value is its value capped by the smallest
fair index on its root path; the index ``g`` of a node is the largest
surrogate value below it.

Number types pass through: a tree with ``Fraction`` costs, probabilities and
values is amortized exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .chains import MarkovChainTree, Node, reach_probabilities
from .distributions import DiscreteDist, normalize
from .plcurves import (
    PiecewiseLinear,
    linear_combination,
    pointwise_max,
    root_of_curve_minus_identity,
)

DEFAULT_EPS = 1e-4


@dataclass
class SurrogateProfile:
    w: dict  # leaf id -> surrogate value
    g: dict  # node id -> index
    tau: dict  # internal node id -> fair index
    p: dict  # leaf id -> reach probability
    W: DiscreteDist

    def to_json(self) -> dict:
        f = lambda d: {k: float(v) for k, v in d.items()}  # noqa: E731
        return {"tau": f(self.tau), "w": f(self.w), "g": f(self.g), "p": f(self.p),
                "W": self.W.to_json()}


def curve_domain(tree: MarkovChainTree) -> tuple:
    """``[lo, hi]`` containing every fair index of the tree.

    ``lo`` sits below the smallest value minus all costs, so no node is
    indifferent there; above ``hi`` every curve is the identity.
    """
    leaves = [n.value for n in tree.leaves()]
    total_cost = sum(n.cost for n in tree.internal())
    lo = min(leaves) - total_cost - 1
    hi = max(leaves) + 1
    return lo, hi


def optimality_curves(tree: MarkovChainTree, domain: tuple | None = None) -> dict:
    """``V_y(s)`` for every node: ``max(v, y)`` on leaves, otherwise
    ``max(y, -cost + sum p V_y(child))``."""
    return _curves(tree, domain)[0]


def _curves(tree: MarkovChainTree, domain: tuple | None = None) -> tuple:
    lo, hi = domain or curve_domain(tree)
    ident = PiecewiseLinear.line(lo, lo, hi, hi, "convex")
    out: dict = {}
    conts: dict = {}

    def rec(n: Node) -> PiecewiseLinear:
        if n.is_leaf:
            v = n.value
            pts = [(lo, v), (v, v), (hi, hi)] if lo < v < hi else [(lo, v), (hi, hi)]
            c = PiecewiseLinear.from_points(pts, "convex")
        else:
            kids = [(p, rec(ch)) for p, ch in n.children]
            cont = linear_combination(kids, constant=-n.cost)
            conts[n.id] = cont
            c = pointwise_max(ident, cont, "convex")
            for s in c.slopes():
                if s < -1e-9 or s > 1 + 1e-9:
                    raise ArithmeticError(f"optimality curve slope {s} outside [0, 1]")
        out[n.id] = c
        return c

    rec(tree.root)
    return out, conts


def optimality_curve(node: Node, domain: tuple | None = None) -> PiecewiseLinear:
    tree = MarkovChainTree(node)
    return optimality_curves(tree, domain)[node.id]


def fair_index(node: Node, domain: tuple | None = None):
    """Smallest ``y`` with ``V_y(node) = y``."""
    if node.is_leaf:
        return node.value
    return fair_indices(MarkovChainTree(node), domain)[node.id]


def fair_indices(tree: MarkovChainTree, domain: tuple | None = None) -> dict:
    # V_y = max(y, cont) so the first y with cont(y) <= y is the indifference point
    _, conts = _curves(tree, domain)
    return {k: root_of_curve_minus_identity(c) for k, c in conts.items()}


def surrogate_values(tree: MarkovChainTree) -> SurrogateProfile:
    tau = fair_indices(tree)
    w: dict = {}
    g: dict = {}

    def down(n: Node, cap):
        if n.is_leaf:
            w[n.id] = n.value if cap is None or n.value <= cap else cap
            g[n.id] = w[n.id]
            return g[n.id]
        t = tau[n.id]
        cap = t if cap is None or t < cap else cap
        g[n.id] = max(down(c, cap) for _, c in n.children)
        return g[n.id]

    down(tree.root, None)
    p = reach_probabilities(tree)
    W = normalize([(w[k], p[k]) for k in w])
    return SurrogateProfile(w, g, tau, p, W)


def surrogate_distribution(profile: SurrogateProfile) -> DiscreteDist:
    return normalize([(profile.w[k], profile.p[k]) for k in profile.w])


def chain_from_distribution(dist: DiscreteDist, eps=DEFAULT_EPS, exact: bool = False
                            ) -> MarkovChainTree:
    """Markov chain whose surrogate distribution is ``dist``.

    Atoms ``w_1 < ... < w_k``: state ``s_i`` pays ``eps`` and stops at
    ``t_i`` (value ``w_i + eps / q_i``) with ``q_i = p_i / sum_{j<=i} p_j``,
    otherwise moves to ``s_{i-1}``; ``s_1`` is the leaf ``t_1`` of value
    ``w_1``. With ``exact=True`` the tree carries ``Fraction`` numbers.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    num = Fraction if exact else (lambda x: x)
    atoms = sorted(dist.atoms)  # ascending
    if not atoms:
        raise ValueError("empty distribution")
    eps = num(eps)
    ws = [num(v) for v, _ in atoms]
    ps = [num(p) for _, p in atoms]
    node = Node("t1", ws[0], num(0))
    cum = ps[0]
    for i in range(1, len(atoms)):
        cum = cum + ps[i]
        q = ps[i] / cum
        ti = Node(f"t{i + 1}", ws[i] + eps / q, num(0))
        node = Node(f"s{i + 1}", None, eps, [(q, ti), (1 - q, node)])
    return MarkovChainTree(node)
