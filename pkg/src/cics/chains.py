"""MDPs over DAGs, commitments, Markov-chain trees and random walks."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

PROB_TOL = 1e-9
DEFAULT_DEPTH_CAP = 64
DEFAULT_NODE_CAP = 1_000_000


class InstanceError(ValueError):
    """Invalid instance data; ``pointer`` is a JSON pointer into the input."""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer}: {message}" if pointer else message)
        self.pointer = pointer


class GuardExceeded(RuntimeError):
    """A size guard on enumeration or unrolling was exceeded."""


@dataclass(frozen=True)
class Action:
    cost: float
    transitions: tuple  # ((to, p), ...)


@dataclass(frozen=True)
class Terminal:
    value: float


@dataclass(frozen=True)
class Internal:
    actions: tuple  # (Action, ...)


@dataclass(frozen=True)
class Mdp:
    root: str
    states: Mapping[str, Terminal | Internal]

    def is_terminal(self, s: str) -> bool:
        return isinstance(self.states[s], Terminal)

    def value(self, s: str):
        return self.states[s].value

    def actions(self, s: str) -> tuple:
        st = self.states[s]
        return () if isinstance(st, Terminal) else st.actions

    def internal_states(self) -> list:
        return [s for s, st in self.states.items() if isinstance(st, Internal)]

    def is_chain(self) -> bool:
        return all(len(st.actions) == 1 for st in self.states.values()
                   if isinstance(st, Internal))

    def reachable(self) -> list:
        seen = {self.root}
        order = [self.root]
        for s in order:
            for a in self.actions(s):
                for t, _ in a.transitions:
                    if t not in seen:
                        seen.add(t)
                        order.append(t)
        return order

    def negate_values(self) -> "Mdp":
        states = {s: Terminal(-st.value) if isinstance(st, Terminal) else st
                  for s, st in self.states.items()}
        return Mdp(self.root, states)

    def to_json(self) -> dict:
        out = {}
        for s, st in self.states.items():
            if isinstance(st, Terminal):
                out[s] = {"terminal": True, "value": float(st.value)}
            else:
                out[s] = {"actions": [
                    {"cost": float(a.cost),
                     "transitions": [{"to": t, "p": float(p)} for t, p in a.transitions]}
                    for a in st.actions]}
        return {"root": self.root, "states": out}

    @classmethod
    def from_json(cls, obj: dict, pointer: str = "") -> "Mdp":
        if not isinstance(obj, dict) or "root" not in obj or "states" not in obj:
            raise InstanceError("MDP needs 'root' and 'states'", pointer)
        states = {}
        for sid, sd in obj["states"].items():
            sp = f"{pointer}/states/{sid}"
            if sd.get("terminal"):
                if "value" not in sd:
                    raise InstanceError("terminal state needs 'value'", sp)
                states[sid] = Terminal(float(sd["value"]))
                continue
            acts = []
            for k, ad in enumerate(sd.get("actions", [])):
                ap = f"{sp}/actions/{k}"
                try:
                    trans = tuple((str(t["to"]), float(t["p"])) for t in ad["transitions"])
                    acts.append(Action(float(ad.get("cost", 0.0)), trans))
                except (KeyError, TypeError) as exc:
                    raise InstanceError(f"malformed action ({exc})", ap) from None
            states[sid] = Internal(tuple(acts))
        mdp = cls(str(obj["root"]), states)
        validate_mdp(mdp, pointer)
        return mdp


def validate_mdp(mdp: Mdp, pointer: str = "") -> dict:
    """Check normalisation, action costs and acyclicity; return counts."""
    if mdp.root not in mdp.states:
        raise InstanceError(f"root {mdp.root!r} is not a state", f"{pointer}/root")
    n_actions = 0
    for sid, st in mdp.states.items():
        sp = f"{pointer}/states/{sid}"
        if isinstance(st, Terminal):
            if not np.isfinite(st.value):
                raise InstanceError("terminal value must be finite", sp)
            continue
        if not st.actions:
            raise InstanceError("non-terminal state without actions", sp)
        for k, a in enumerate(st.actions):
            ap = f"{sp}/actions/{k}"
            n_actions += 1
            if a.cost < 0:
                raise InstanceError(f"negative action cost {a.cost}", ap)
            if not a.transitions:
                raise InstanceError("action without transitions", ap)
            total = 0.0
            for t, p in a.transitions:
                if t not in mdp.states:
                    raise InstanceError(f"transition to unknown state {t!r}", ap)
                if p < 0:
                    raise InstanceError(f"negative probability {p}", ap)
                total += p
            if abs(total - 1.0) > PROB_TOL:
                raise InstanceError(f"transition probabilities sum to {total}", ap)
    _check_acyclic(mdp, pointer)
    return {"states": len(mdp.states), "internal": len(mdp.internal_states()),
            "actions": n_actions, "chain": mdp.is_chain(), "dag": True}


def _check_acyclic(mdp: Mdp, pointer: str) -> None:
    color: dict = {}
    for start in mdp.states:
        if start in color:
            continue
        stack = [(start, iter(_succ(mdp, start)))]
        color[start] = 1
        while stack:
            s, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[s] = 2
                stack.pop()
                continue
            c = color.get(nxt, 0)
            if c == 1:
                raise InstanceError(f"cycle through state {nxt!r}", f"{pointer}/states/{nxt}")
            if c == 0:
                color[nxt] = 1
                stack.append((nxt, iter(_succ(mdp, nxt))))


def _succ(mdp: Mdp, s: str) -> list:
    return [t for a in mdp.actions(s) for t, _ in a.transitions]


@dataclass(frozen=True)
class Commitment:
    """Per-state distribution over action indices."""

    per_state: Mapping[str, tuple]

    @classmethod
    def deterministic(cls, choice: Mapping[str, int], mdp: Mdp) -> "Commitment":
        out = {}
        for s in mdp.internal_states():
            k = choice.get(s, 0)
            out[s] = tuple(1.0 if j == k else 0.0 for j in range(len(mdp.actions(s))))
        return cls(out)

    def to_json(self) -> dict:
        return {s: [float(x) for x in d] for s, d in self.per_state.items()}


def apply_commitment(mdp: Mdp, commitment: Commitment) -> Mdp:
    """Markov chain whose single action mixes the MDP's actions by ``commitment``."""
    states = {}
    for sid, st in mdp.states.items():
        if isinstance(st, Terminal):
            states[sid] = st
            continue
        if sid not in commitment.per_state:
            raise InstanceError(f"commitment missing state {sid!r}")
        dist = commitment.per_state[sid]
        if len(dist) != len(st.actions):
            raise InstanceError(f"commitment for {sid!r} has wrong arity")
        if any(x < 0 for x in dist) or abs(sum(dist) - 1) > PROB_TOL:
            raise InstanceError(f"commitment for {sid!r} is not a distribution")
        cost = 0
        trans: dict = {}
        for w, a in zip(dist, st.actions):
            if w == 0:
                continue
            cost = cost + w * a.cost
            for t, p in a.transitions:
                trans[t] = trans.get(t, 0) + w * p
        states[sid] = Internal((Action(cost, tuple(trans.items())),))
    return Mdp(mdp.root, states)


# --------------------------------------------------------------------------
# Markov-chain trees


@dataclass(eq=False)
class Node:
    id: str
    value: float | None = None  # set on leaves
    cost: float = 0.0  # cost of the single action at internal nodes
    children: list = field(default_factory=list)  # [(p, Node)]
    state: str | None = None  # originating MDP state

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class MarkovChainTree:
    root: Node

    def nodes(self) -> Iterator[Node]:
        stack = [self.root]
        while stack:
            n = stack.pop()
            yield n
            stack.extend(c for _, c in reversed(n.children))

    def leaves(self) -> list:
        return [n for n in self.nodes() if n.is_leaf]

    def internal(self) -> list:
        return [n for n in self.nodes() if not n.is_leaf]

    def parents(self) -> dict:
        out = {self.root.id: None}
        for n in self.nodes():
            for _, c in n.children:
                out[c.id] = n
        return out

    def path_to(self) -> dict:
        """Map leaf id -> list of nodes from the root to the leaf."""
        out = {}
        stack = [(self.root, [self.root])]
        while stack:
            n, path = stack.pop()
            if n.is_leaf:
                out[n.id] = path
            for _, c in n.children:
                stack.append((c, path + [c]))
        return out

    def depth(self) -> int:
        def d(n):
            return 0 if n.is_leaf else 1 + max(d(c) for _, c in n.children)
        return d(self.root)

    def convert(self, num) -> "MarkovChainTree":
        """Copy with every number passed through ``num`` (e.g. ``Fraction``)."""
        def copy(n):
            m = Node(n.id, None if n.value is None else num(n.value), num(n.cost), [], n.state)
            m.children = [(num(p), copy(c)) for p, c in n.children]
            return m
        return MarkovChainTree(copy(self.root))

    def to_json(self) -> dict:
        def dump(n):
            if n.is_leaf:
                return {"id": n.id, "value": float(n.value)}
            return {"id": n.id, "cost": float(n.cost),
                    "children": [{"p": float(p), "node": dump(c)} for p, c in n.children]}
        return dump(self.root)


def leaf(id: str, value) -> Node:
    return Node(id, value)


def internal(id: str, cost, children) -> Node:
    return Node(id, None, cost, list(children))


def unroll_to_tree(chain: Mdp, depth_cap: int = DEFAULT_DEPTH_CAP,
                   node_cap: int = DEFAULT_NODE_CAP) -> MarkovChainTree:
    """Out-tree of all root paths of a Markov-chain-shaped MDP.

    Node ids are the state ids joined by ``/`` along the path; a DAG state
    reached by several paths is duplicated.
    """
    if not chain.is_chain():
        raise InstanceError("unroll_to_tree needs a Markov chain (one action per state)")
    count = 0

    def build(sid: str, nid: str, depth: int) -> Node:
        nonlocal count
        count += 1
        if count > node_cap:
            raise GuardExceeded(f"unrolled tree exceeds {node_cap} nodes")
        if depth > depth_cap:
            raise GuardExceeded(f"path deeper than depth cap {depth_cap}")
        st = chain.states[sid]
        if isinstance(st, Terminal):
            return Node(nid, st.value, 0.0, [], sid)
        a = st.actions[0]
        kids = [(p, build(t, f"{nid}/{t}", depth + 1)) for t, p in a.transitions if p > 0]
        return Node(nid, None, a.cost, kids, sid)

    return MarkovChainTree(build(chain.root, chain.root, 0))


def unroll_mdp(mdp: Mdp, depth_cap: int = DEFAULT_DEPTH_CAP,
               node_cap: int = DEFAULT_NODE_CAP) -> tuple:
    """Tree-shaped MDP whose states are histories (state, action, state, ...).

    Returns ``(tree_mdp, origin)`` where ``origin`` maps each history id to
    the original state id. Subtrees under different actions are disjoint.
    """
    states: dict = {}
    origin: dict = {}

    def build(sid: str, hid: str, depth: int) -> None:
        if len(states) >= node_cap:
            raise GuardExceeded(f"unrolled MDP exceeds {node_cap} states")
        if depth > depth_cap:
            raise GuardExceeded(f"path deeper than depth cap {depth_cap}")
        origin[hid] = sid
        st = mdp.states[sid]
        if isinstance(st, Terminal):
            states[hid] = st
            return
        acts = []
        for k, a in enumerate(st.actions):
            trans = []
            for t, p in a.transitions:
                if p <= 0:
                    continue
                cid = f"{hid}/{k}:{t}"
                build(t, cid, depth + 1)
                trans.append((cid, p))
            acts.append(Action(a.cost, tuple(trans)))
        states[hid] = Internal(tuple(acts))

    build(mdp.root, mdp.root, 0)
    return Mdp(mdp.root, states), origin


def reach_probabilities(tree: MarkovChainTree) -> dict:
    out = {}
    stack = [(tree.root, 1)]
    while stack:
        n, pr = stack.pop()
        if n.is_leaf:
            out[n.id] = pr
        for p, c in n.children:
            stack.append((c, pr * p))
    return out


def expected_full_walk(tree: MarkovChainTree) -> tuple:
    """``(E[v(leaf)], E[total cost])`` of the walk run to a leaf."""
    ev = 0.0
    ec = 0.0
    stack = [(tree.root, 1.0)]
    while stack:
        n, pr = stack.pop()
        if n.is_leaf:
            ev += pr * n.value
            continue
        ec += pr * n.cost
        for p, c in n.children:
            stack.append((c, pr * p))
    return ev, ec


def sample_walk(tree: MarkovChainTree, rng: np.random.Generator) -> tuple:
    """Random walk to a leaf; returns ``(leaf, total cost)``."""
    n = tree.root
    cost = 0.0
    while not n.is_leaf:
        cost += n.cost
        probs = np.array([p for p, _ in n.children], dtype=float)
        k = rng.choice(len(probs), p=probs / probs.sum())
        n = n.children[k][1]
    return n, cost


def chain_to_mdp(tree: MarkovChainTree) -> Mdp:
    """Inverse of :func:`unroll_to_tree` on trees: node ids become state ids."""
    states = {}
    for n in tree.nodes():
        if n.is_leaf:
            states[n.id] = Terminal(n.value)
        else:
            states[n.id] = Internal((Action(n.cost, tuple((c.id, p) for p, c in n.children)),))
    return Mdp(tree.root.id, states)


def validate_instance(mdps, constraint=None) -> dict:
    """Validate every MDP (and the constraint arity); return a report."""
    report = {"mdps": [], "ok": True}
    for i, m in enumerate(mdps):
        report["mdps"].append(validate_mdp(m, f"/mdps/{i}"))
    if constraint is not None and constraint.n != len(mdps):
        raise InstanceError(f"constraint covers {constraint.n} elements but there are "
                            f"{len(mdps)} MDPs", "/constraint")
    return report


def enumerate_deterministic_commitments(mdp: Mdp, limit: int = 10_000):
    """Yield deterministic commitments that differ on states they can reach.

    States unreachable under a partial choice are fixed to action 0, so each
    yielded commitment is behaviourally distinct.
    """
    count = 0

    def rec(frontier: list, chosen: dict):
        nonlocal count
        frontier = [s for s in frontier if s not in chosen and not mdp.is_terminal(s)]
        if not frontier:
            count += 1
            if count > limit:
                raise GuardExceeded(f"more than {limit} deterministic commitments")
            yield dict(chosen)
            return
        s, rest = frontier[0], frontier[1:]
        for k, a in enumerate(mdp.actions(s)):
            chosen[s] = k
            nxt = rest + [t for t, p in a.transitions if p > 0]
            yield from rec(nxt, chosen)
            del chosen[s]

    for choice in rec([mdp.root], {}):
        yield Commitment.deterministic(choice, mdp)


def product_guard(sizes, limit: int) -> int:
    total = 1
    for s in sizes:
        total *= s
        if total > limit:
            raise GuardExceeded(f"enumeration size exceeds {limit}")
    return total


def iter_product(seqs):
    return itertools.product(*seqs)
