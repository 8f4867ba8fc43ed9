"""CICS policies: the semi-online driven policy, exact and sampled
evaluation, exact optimum oracles, the committing pipeline and gap reports.

Minimisation instances are handled by negating terminal values and solving
the covering problem as a maximisation; reported costs are re-negated.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .amortize import SurrogateProfile, surrogate_values
from .chains import (
    GuardExceeded,
    InstanceError,
    MarkovChainTree,
    Mdp,
    Terminal,
    apply_commitment,
    enumerate_deterministic_commitments,
    unroll_to_tree,
    validate_instance,
)
from .constraints import AtLeastK, Constraint
from .exante import ex_ante_opt_cics
from .selection import SemiOnlineAlgorithm, rule_for, semi_online_from_frugal, semi_online_value

ENUM_LIMIT = 1_000_000
COMMIT_LIMIT = 10_000


@dataclass
class CicsInstance:
    constraint: Constraint
    mdps: list
    objective: str = "max"
    name: str = ""

    def __post_init__(self):
        if self.objective not in ("max", "min"):
            raise InstanceError(f"unknown objective {self.objective!r}", "/objective")
        if self.objective == "min" and not isinstance(self.constraint, AtLeastK):
            raise InstanceError("minimisation instances need an 'at_least' constraint",
                                "/constraint")
        validate_instance(self.mdps, self.constraint)

    @property
    def sign(self) -> int:
        return 1 if self.objective == "max" else -1

    def as_max(self) -> "CicsInstance":
        if self.objective == "max":
            return self
        return CicsInstance(self.constraint, [m.negate_values() for m in self.mdps], "max",
                            self.name)

    def is_markov(self) -> bool:
        return all(m.is_chain() for m in self.mdps)


@dataclass
class PolicyEvaluation:
    expected_utility: float  # value - cost in maximisation form
    expected_cost: float
    expected_value: float  # accepted terminal values, original sign
    accept_probs: list
    method: str = "exact"
    promised: float | None = None  # sum over leaves of P[accept t] * w(t)
    trials: int = 0
    stderr: float = 0.0
    objective: str = "max"

    @property
    def objective_value(self) -> float:
        """Utility for maximisation, total paid (cost + values) for minimisation."""
        if self.objective == "max":
            return self.expected_utility
        return self.expected_value + self.expected_cost

    def to_json(self) -> dict:
        out = {"objective": self.objective, "objective_value": self.objective_value,
               "expected_utility": self.expected_utility,
               "expected_cost": self.expected_cost, "expected_value": self.expected_value,
               "accept_probs": list(self.accept_probs), "method": self.method}
        if self.promised is not None:
            out["promised"] = self.promised
        if self.method == "monte_carlo":
            out["trials"], out["stderr"] = self.trials, self.stderr
        return out


@dataclass
class GapReport:
    opt: float
    committing_opt: float
    ex_ante: float
    pipeline_value: float | None
    com_gap: float
    objective: str = "max"

    def to_json(self) -> dict:
        return {"objective": self.objective, "opt": self.opt,
                "committing_opt": self.committing_opt, "ex_ante": self.ex_ante,
                "pipeline_value": self.pipeline_value, "com_gap": self.com_gap}


# --------------------------------------------------------------------------
# chains prepared for play-outs


@dataclass
class ChainView:
    """One amortized Markov-chain tree with its leaf distribution."""

    tree: MarkovChainTree
    profile: SurrogateProfile
    leaves: list  # leaf ids
    probs: list
    paths: dict  # leaf id -> nodes root..leaf


def chain_views(mc: CicsInstance) -> list:
    """Amortized trees of a Markov-chain instance, in maximisation form."""
    work = mc.as_max()
    if not work.is_markov():
        raise InstanceError("expected a Markov-chain instance (one action per state)")
    out = []
    for m in work.mdps:
        tree = unroll_to_tree(m)
        prof = surrogate_values(tree)
        leaves = list(prof.p)
        out.append(ChainView(tree, prof, leaves, [prof.p[t] for t in leaves], tree.path_to()))
    return out


class Walker:
    """A chain whose random path is fixed in advance to end at ``leaf``."""

    def __init__(self, view: ChainView, leaf_id: str):
        self.view = view
        self.path = view.paths[leaf_id]
        self.pos = 0
        self.cost = 0.0

    @property
    def node(self):
        return self.path[self.pos]

    @property
    def at_leaf(self) -> bool:
        return self.node.is_leaf

    @property
    def index(self):
        return self.view.profile.g[self.node.id]

    def advance(self) -> None:
        if self.at_leaf:
            raise RuntimeError("cannot advance a chain at its leaf")
        self.cost += self.node.cost
        self.pos += 1


class Policy:
    """A (possibly randomised) committing policy over Markov chains."""

    def components(self) -> list:
        return [(1.0, self)]

    def play(self, walkers: list, C: Constraint) -> list:
        raise NotImplementedError


class SemiOnlinePolicy(Policy):
    """Drive the chains with a semi-online algorithm over the surrogate
    distributions: a probe at ``tau`` advances the chain while its index is at
    least ``tau`` and succeeds iff it reaches a leaf with surrogate ``>= tau``."""

    def __init__(self, alg: SemiOnlineAlgorithm):
        self.alg = alg

    def components(self) -> list:
        return [(w, SemiOnlinePolicy(a)) for w, a in self.alg.components()]

    def play(self, walkers: list, C: Constraint) -> list:
        run = self.alg.fresh()
        S: list = []
        while True:
            probe = run.next_probe()
            if probe is None:
                return S
            i, tau = probe
            wk = walkers[i]
            while not wk.at_leaf and wk.index >= tau:
                wk.advance()
            ok = wk.at_leaf and wk.view.profile.w[wk.node.id] >= tau
            run.feedback(ok)
            if ok:
                S.append(i)


class FullAdvancePolicy(Policy):
    """Run every chain to its leaf, then accept all elements if feasible,
    otherwise the best feasible subset."""

    def play(self, walkers: list, C: Constraint) -> list:
        for wk in walkers:
            while not wk.at_leaf:
                wk.advance()
        everything = list(range(len(walkers)))
        if C.is_feasible(everything):
            return everything
        best = C.best_subset({i: wk.node.value for i, wk in enumerate(walkers)})
        return sorted(best[0]) if best else []


class ThresholdStopPolicy(Policy):
    """Visit chains in ``order``; advance chain ``i`` while its index is at
    least ``thresholds[i]`` and at most ``max_steps[i]`` times, then accept it
    if a leaf was reached, the value is at least the threshold and the set
    stays feasible. Abandoning mid-way is allowed, so this policy need not
    keep the promise of payment."""

    def __init__(self, order, thresholds, max_steps):
        self.order, self.thresholds, self.max_steps = list(order), list(thresholds), list(max_steps)

    def play(self, walkers: list, C: Constraint) -> list:
        S: list = []
        for i in self.order:
            if not C.can_extend(frozenset(S), i):
                continue
            wk, t = walkers[i], self.thresholds[i]
            steps = 0
            while not wk.at_leaf and wk.index >= t and steps < self.max_steps[i]:
                wk.advance()
                steps += 1
            if wk.at_leaf and wk.node.value >= t:
                S.append(i)
        return S


def policy_from_semi_online(mc: CicsInstance, alg_factory) -> SemiOnlinePolicy:
    """T_B for ``mc``; ``alg_factory(C, W)`` builds the semi-online algorithm
    over the surrogate distributions ``W`` (maximisation form)."""
    views = chain_views(mc)
    return SemiOnlinePolicy(alg_factory(mc.constraint, [v.profile.W for v in views]))


def greedy_factory(name: str | None = None):
    def make(C, W):
        return semi_online_from_frugal(rule_for(C, name), C, W)
    return make


def _outcome(views: list, leaves: tuple, policy: Policy, C: Constraint) -> tuple:
    walkers = [Walker(v, t) for v, t in zip(views, leaves)]
    S = policy.play(walkers, C)
    if len(set(S)) != len(S) or not C.is_feasible(S):
        raise AssertionError(f"policy accepted an infeasible set {S}")
    cost = sum(wk.cost for wk in walkers)
    value = sum(walkers[i].node.value for i in S)
    promised = sum(walkers[i].view.profile.w[walkers[i].node.id] for i in S)
    return S, cost, value, promised


def evaluate_policy_exact(mc: CicsInstance, policy: Policy, limit: int = ENUM_LIMIT,
                          views: list | None = None) -> PolicyEvaluation:
    """Exact expectations by enumerating joint leaf outcomes."""
    views = views or chain_views(mc)
    size = 1
    for v in views:
        size *= len(v.leaves)
        if size > limit:
            raise GuardExceeded(f"joint leaf outcomes exceed {limit}")
    n = len(views)
    util = cost = value = prom = 0.0
    acc = [0.0] * n
    for w, part in policy.components():
        for combo in itertools.product(*(range(len(v.leaves)) for v in views)):
            pr = w
            for v, k in zip(views, combo):
                pr *= v.probs[k]
            if pr == 0:
                continue
            leaves = tuple(v.leaves[k] for v, k in zip(views, combo))
            S, c, val, pm = _outcome(views, leaves, part, mc.constraint)
            cost += pr * c
            value += pr * val
            prom += pr * pm
            for i in S:
                acc[i] += pr
    util = value - cost
    return PolicyEvaluation(util, cost, mc.sign * value, acc, "exact", prom,
                            objective=mc.objective)


def evaluate_policy_mc(mc: CicsInstance, policy: Policy, trials: int = 10_000, seed: int = 0,
                       views: list | None = None) -> PolicyEvaluation:
    """Monte Carlo estimate; leaves and mixture components drawn from one
    seeded generator, so results are reproducible."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    views = views or chain_views(mc)
    rng = np.random.default_rng(seed)
    comps = policy.components()
    cw = np.array([w for w, _ in comps], dtype=float)
    pick = rng.choice(len(comps), size=trials, p=cw / cw.sum())
    draws = [rng.choice(len(v.leaves), size=trials, p=np.array(v.probs, float) / sum(v.probs))
             for v in views]
    utils = np.empty(trials)
    costs = np.empty(trials)
    vals = np.empty(trials)
    acc = np.zeros(len(views))
    for r in range(trials):
        leaves = tuple(v.leaves[d[r]] for v, d in zip(views, draws))
        S, c, val, _ = _outcome(views, leaves, comps[pick[r]][1], mc.constraint)
        utils[r], costs[r], vals[r] = val - c, c, val
        for i in S:
            acc[i] += 1
    se = float(utils.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return PolicyEvaluation(float(utils.mean()), float(costs.mean()), mc.sign * float(vals.mean()),
                            [float(a) for a in acc / trials], "monte_carlo", None, trials, se, mc.objective)


def surrogate_bcs_value(mc: CicsInstance, alg: SemiOnlineAlgorithm,
                        limit: int = ENUM_LIMIT) -> float:
    """Expected value of ``alg`` on the surrogate distributions (max form)."""
    return semi_online_value(alg, [v.profile.W for v in chain_views(mc)], limit)


# --------------------------------------------------------------------------
# exact optimum oracles


def _joint_dp(C: Constraint, mdps: list, limit: int) -> float:
    memo: dict = {}
    n = len(mdps)

    def halt(state: tuple) -> float:
        vals = {i: mdps[i].value(s) for i, s in enumerate(state) if mdps[i].is_terminal(s)}
        best = _best_among(C, vals)
        return -math.inf if best is None else best

    def V(state: tuple) -> float:
        if state in memo:
            return memo[state]
        if len(memo) >= limit:
            raise GuardExceeded(f"joint state space exceeds {limit}")
        best = halt(state)
        for i in range(n):
            s = state[i]
            for a in mdps[i].actions(s):
                tot = -a.cost
                for t, p in a.transitions:
                    if p > 0:
                        tot += p * V(state[:i] + (t,) + state[i + 1:])
                if tot > best:
                    best = tot
        memo[state] = best
        return best

    return V(tuple(m.root for m in mdps))


def _best_among(C: Constraint, vals: dict):
    """Best feasible subset using only the terminal elements in ``vals``."""
    res = C.best_subset(vals)
    return None if res is None else res[1]


def optimal_cics_dp(instance: CicsInstance, limit: int = ENUM_LIMIT) -> float:
    """Exact optimum over all adaptive policies (a cost for minimisation)."""
    work = instance.as_max()
    return instance.sign * _joint_dp(work.constraint, work.mdps, limit)


def optimal_mc_cics_dp(mc: CicsInstance, limit: int = ENUM_LIMIT) -> float:
    if not mc.is_markov():
        raise InstanceError("optimal_mc_cics_dp needs Markov chains")
    return optimal_cics_dp(mc, limit)


def optimal_committing_dp(instance: CicsInstance, limit: int = COMMIT_LIMIT,
                          state_limit: int = ENUM_LIMIT) -> tuple:
    """Best committing policy over deterministic commitments.

    Returns ``(value, commitments)``; the value is a cost for minimisation.
    """
    work = instance.as_max()
    per = [list(enumerate_deterministic_commitments(m, limit)) for m in work.mdps]
    total = 1
    for p in per:
        total *= len(p)
        if total > limit:
            raise GuardExceeded(f"more than {limit} commitment profiles")
    best, arg = -math.inf, None
    for combo in itertools.product(*per):
        chains = [apply_commitment(m, c) for m, c in zip(work.mdps, combo)]
        v = _joint_dp(work.constraint, chains, state_limit)
        if v > best:
            best, arg = v, list(combo)
    return instance.sign * best, arg


def committed_instance(instance: CicsInstance, commitments: list) -> CicsInstance:
    chains = [apply_commitment(m, c) for m, c in zip(instance.mdps, commitments)]
    return CicsInstance(instance.constraint, chains, instance.objective, instance.name)


# --------------------------------------------------------------------------
# pipeline and gap


@dataclass
class PipelineResult:
    policy: SemiOnlinePolicy
    evaluation: PolicyEvaluation
    ex_ante: float
    committed: CicsInstance  # Markov chains on the unrolled MDPs
    bcs_value: float  # semi-online value on the surrogate distributions
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"ex_ante": self.ex_ante, "pipeline_value": self.evaluation.objective_value,
                "surrogate_bcs_value": self.bcs_value, "evaluation": self.evaluation.to_json()}


def committing_pipeline(instance: CicsInstance, rule: str | None = None,
                        limit: int = ENUM_LIMIT) -> PipelineResult:
    """Ex-ante commitments, amortized committed chains, and the semi-online
    policy built from a frugal rule, evaluated exactly."""
    if instance.objective != "max":
        raise InstanceError("the committing pipeline supports maximisation only", "/objective")
    C = instance.constraint
    res = ex_ante_opt_cics(C, instance.mdps, "max")
    chains = [apply_commitment(lc.mdp, cm) for lc, cm in zip(res.local, res.commitments)]
    mc = CicsInstance(C, chains, "max", instance.name)
    views = chain_views(mc)
    alg = semi_online_from_frugal(rule_for(C, rule), C, [v.profile.W for v in views])
    policy = SemiOnlinePolicy(alg)
    ev = evaluate_policy_exact(mc, policy, limit, views)
    bcs = semi_online_value(alg, [v.profile.W for v in views], limit)
    return PipelineResult(policy, ev, float(res.value), mc, bcs)


def commitment_gap_empirical(instance: CicsInstance, with_pipeline: bool = True) -> GapReport:
    opt = optimal_cics_dp(instance)
    com, _ = optimal_committing_dp(instance)
    ex_ante = float(ex_ante_opt_cics(instance.constraint, instance.mdps, instance.objective).value)
    pipe = None
    if with_pipeline and instance.objective == "max":
        pipe = committing_pipeline(instance).evaluation.objective_value
    if instance.objective == "max":
        gap = opt / com if com > 0 else (1.0 if opt <= 0 else math.inf)
    else:
        gap = com / opt if opt > 0 else (1.0 if com <= 0 else math.inf)
    return GapReport(opt, com, ex_ante, pipe, gap, instance.objective)


def leaf_mdp(value) -> Mdp:
    """A one-state MDP that is already terminal."""
    return Mdp("t", {"t": Terminal(value)})
