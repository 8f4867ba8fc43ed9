"""Ex-ante relaxation of CICS: per-MDP curves, the joint optimum, and the
commitments it induces.

``f(q)`` is the best expected net reward an MDP can deliver when its
terminal is accepted with probability at most ``q`` (exactly ``q`` for
covering instances). It is built bottom-up on the history-unrolled MDP:
children of an action are merged by budget, the action cost is
subtracted, and the node takes the concave envelope of its actions and of
halting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .chains import (
    Commitment,
    InstanceError,
    Mdp,
    Terminal,
    apply_commitment,
    unroll_mdp,
    unroll_to_tree,
)
from .constraints import AtLeastK, Constraint, ExAnteSolution, maximize_separable_concave
from .distributions import DiscreteDist, revenue_curve
from .plcurves import (
    PiecewiseLinear,
    argmax_left,
    budget_merge,
    budget_split,
    clip_monotone_hull,
    shift_add,
    upper_hull,
)

HALT = -1


@dataclass
class _NodeTrace:
    curve: PiecewiseLinear  # f_s, after clipping
    envelope: PiecewiseLinear | None = None  # before clipping
    hull: list = field(default_factory=list)  # [(x, y, source)], source = action index or HALT
    action_curves: list = field(default_factory=list)  # g_a per action
    children: list = field(default_factory=list)  # per action [(p, child id)]


@dataclass
class LocalCurve:
    curve: PiecewiseLinear
    mdp: Mdp  # history-unrolled tree MDP the trace refers to
    origin: dict  # history id -> original state id
    trace: dict  # history id -> _NodeTrace
    clip: bool = True

    def __call__(self, q):
        return self.curve(q)


@dataclass
class LocalPolicy:
    """Behavioural local policy realising ``f(q)``."""

    commitment: Commitment  # over history states
    halt: dict  # history id -> probability of halting there
    accept: dict  # leaf history id -> acceptance probability
    reach: dict  # history id -> probability the policy visits it
    q: float
    value: float


def leaf_curve(v, clip: bool = True) -> PiecewiseLinear:
    c = PiecewiseLinear.line(0.0, 0.0, 1.0, v, "concave")
    return clip_monotone_hull(c) if clip else c


def local_curve(mdp: Mdp, clip: bool = True) -> LocalCurve:
    tree, origin = unroll_mdp(mdp)
    trace: dict = {}

    def rec(s: str) -> PiecewiseLinear:
        st = tree.states[s]
        if isinstance(st, Terminal):
            c = leaf_curve(st.value, clip)
            trace[s] = _NodeTrace(c, c, [(0.0, 0.0, 0), (1.0, st.value, 0)])
            return c
        node = _NodeTrace(None)  # type: ignore[arg-type]
        pts = []
        for k, a in enumerate(st.actions):
            kids = [(p, t) for t, p in a.transitions]
            merged = budget_merge([(p, rec(t)) for p, t in kids])
            g = shift_add(merged, -a.cost)
            node.action_curves.append(g)
            node.children.append(kids)
            pts.extend((x, y, k) for x, y in g.bp)
        # halting last: at equal points the hull keeps an action, so zero-cost
        # chains randomise acceptance rather than advancement
        pts.append((0.0, 0.0, HALT))
        hull = upper_hull(pts)
        env = PiecewiseLinear.from_points([(x, y) for x, y, _ in hull], "concave")
        node.hull = hull
        node.envelope = env
        node.curve = clip_monotone_hull(env) if clip else env
        trace[s] = node
        return node.curve

    f = rec(tree.root)
    return LocalCurve(f, tree, origin, trace, clip)


def _hull_bracket(hull: list, x) -> tuple:
    """Two hull vertices around ``x`` and the weight on the left one."""
    if x <= hull[0][0]:
        return hull[0], hull[0], 1.0
    for a, b in zip(hull, hull[1:]):
        if x <= b[0]:
            if x == b[0]:
                return b, b, 1.0
            lam = (b[0] - x) / (b[0] - a[0])
            return a, b, lam
    return hull[-1], hull[-1], 1.0


def extract_commitment(lc: LocalCurve, q) -> LocalPolicy:
    """Per-state action mixture, halting and acceptance realising ``f(q)``.

    Concavification mixtures are turned into behavioural randomisation on
    the unrolled tree; states the policy never visits are committed to
    action 0.
    """
    if q < -1e-9 or q > lc.curve.xmax + 1e-9:
        raise ValueError(f"budget {q} outside [0, {lc.curve.xmax}]")
    tree = lc.mdp
    actions: dict = {}
    halt: dict = {}
    accept: dict = {}
    reach: dict = {}

    def effective(tr: _NodeTrace, x):
        if lc.clip:
            peak = argmax_left(tr.envelope)
            if x > peak:
                return peak
        return x

    def rec(s: str, x, pr):
        reach[s] = reach.get(s, 0.0) + pr
        st = tree.states[s]
        tr = lc.trace[s]
        x = effective(tr, x)
        if isinstance(st, Terminal):
            accept[s] = min(max(float(x), 0.0), 1.0)
            return
        a, b, lam = _hull_bracket(tr.hull, x)
        if a[2] == b[2]:
            parts = [(a[2], 1.0, x)]
        else:
            parts = [(a[2], lam, a[0]), (b[2], 1.0 - lam, b[0])]
        weights = [0.0] * len(st.actions)
        h = 0.0
        for src, wgt, bx in parts:
            if wgt <= 0:
                continue
            if src == HALT:
                h += wgt
                continue
            weights[src] += wgt
            kids = tr.children[src]
            split = budget_split([(p, lc.trace[t].curve) for p, t in kids], bx)
            for (p, t), xt in zip(kids, split):
                rec(t, xt, pr * wgt * p)
        halt[s] = h
        tot = sum(weights)
        if tot > 0:
            actions[s] = tuple(w / tot for w in weights)

    rec(tree.root, q, 1.0)
    per_state = {}
    for s in tree.internal_states():
        n_act = len(tree.actions(s))
        per_state[s] = actions.get(s, tuple(1.0 if j == 0 else 0.0 for j in range(n_act)))
    return LocalPolicy(Commitment(per_state), halt, accept, reach, float(q), float(lc.curve(q)))


def committed_tree(lc: LocalCurve, commitment: Commitment):
    """Markov-chain tree of the unrolled MDP under ``commitment``."""
    return unroll_to_tree(apply_commitment(lc.mdp, commitment))


# --------------------------------------------------------------------------
# instance-level solvers


@dataclass
class ExAnteCicsResult:
    value: float
    q: list
    commitments: list  # per MDP, over history states
    accept: list  # per MDP, leaf history id -> acceptance probability
    halt: list
    local: list  # LocalCurve per MDP
    objective: str = "max"

    def to_json(self, with_commitment: bool = False) -> dict:
        out = {"objective": self.objective, "value": float(self.value),
               "q": [float(x) for x in self.q]}
        if with_commitment:
            out["commitments"] = [c.to_json() for c in self.commitments]
            out["accept"] = [{k: float(v) for k, v in a.items()} for a in self.accept]
        return out


def _check_objective(C: Constraint, objective: str) -> None:
    if objective not in ("max", "min"):
        raise InstanceError(f"unknown objective {objective!r}")
    if objective == "min" and not isinstance(C, AtLeastK):
        raise InstanceError("minimisation instances need an 'at_least' covering constraint")


def ex_ante_value_bcs(C: Constraint, dists: list, objective: str = "max") -> ExAnteSolution:
    """Ex-ante optimum of a BCS instance (a cost for ``objective='min'``)."""
    _check_objective(C, objective)
    if objective == "min":
        curves = [revenue_curve(d.negate()) for d in dists]
        sol = maximize_separable_concave(C, curves)
        return ExAnteSolution(sol.q, -sol.value)
    clip = C.downward_closed
    curves = [clip_monotone_hull(revenue_curve(d)) if clip else revenue_curve(d) for d in dists]
    return maximize_separable_concave(C, curves)


def ex_ante_opt_cics(C: Constraint, mdps: list, objective: str = "max") -> ExAnteCicsResult:
    """Ex-ante optimal policy of a CICS instance and its commitments.

    For ``objective='min'`` terminal values are negated, the covering
    program is solved as a maximisation, and ``value`` is reported as a cost.
    """
    _check_objective(C, objective)
    if len(mdps) != C.n:
        raise InstanceError(f"constraint covers {C.n} elements but there are {len(mdps)} MDPs")
    work = [m.negate_values() for m in mdps] if objective == "min" else list(mdps)
    clip = C.downward_closed
    locs = [local_curve(m, clip) for m in work]
    sol = maximize_separable_concave(C, [lc.curve for lc in locs])
    pols = [extract_commitment(lc, x) for lc, x in zip(locs, sol.q)]
    value = -sol.value if objective == "min" else sol.value
    return ExAnteCicsResult(value, sol.q, [p.commitment for p in pols],
                            [p.accept for p in pols], [p.halt for p in pols], locs, objective)


def surrogate_revenue_curve(W: DiscreteDist) -> PiecewiseLinear:
    return clip_monotone_hull(revenue_curve(W))
