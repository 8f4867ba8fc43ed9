"""Bayesian combinatorial selection: frugal rules, semi-online engines and
brute-force benchmarks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .chains import GuardExceeded
from .constraints import AtLeastK, Constraint, Knapsack
from .distributions import DiscreteDist, condition_below, conditional_top_mean, normalize

NEG_INF = -math.inf
ENUM_LIMIT = 1_000_000


@dataclass
class FrugalRule:
    """Greedy index rule ``g(i, S, y)``, non-decreasing in ``y``.

    A rule is either deterministic (``index`` set) or a mixture of
    deterministic rules (``mixture`` of ``(weight, rule)``).
    """

    name: str
    index: Callable | None = None
    beta: float = 1.0
    mixture: list = field(default_factory=list)

    def components(self) -> list:
        return self.mixture if self.mixture else [(1.0, self)]


def _extendable(C: Constraint, S: frozenset, i: int) -> bool:
    return i not in S and C.can_extend(S, i)


def greedy_matroid(C: Constraint) -> FrugalRule:
    def g(i, S, y):
        return y if _extendable(C, S, i) else NEG_INF
    return FrugalRule("greedy", g, beta=1.0)


def greedy_k_system(C: Constraint, k: float | None = None) -> FrugalRule:
    rule = greedy_matroid(C)
    rule.name = "greedy_ksystem"
    rule.beta = float(k if k is not None else getattr(C, "k", 1))
    return rule


def knapsack_mixture(C: Knapsack) -> FrugalRule:
    """Half density-greedy with skipping, half best single item."""
    if not isinstance(C, Knapsack):
        raise TypeError("knapsack_mixture needs a Knapsack constraint")
    sizes = C.sizes

    def density(i, S, y):
        return y / sizes[i] if _extendable(C, S, i) else NEG_INF

    def single(i, S, y):
        return y if not S else NEG_INF

    return FrugalRule("knapsack_mixture", beta=2.0, mixture=[
        (0.5, FrugalRule("density_skip", density)),
        (0.5, FrugalRule("best_single", single)),
    ])


def rule_for(C: Constraint, name: str | None = None) -> FrugalRule:
    """Default frugal rule for a constraint kind (or by CLI name)."""
    if name is None:
        if isinstance(C, Knapsack):
            name = "knapsack"
        elif C.is_matroid or isinstance(C, AtLeastK):
            name = "matroid"
        else:
            name = "ksystem"
    if name == "matroid":
        return greedy_matroid(C)
    if name == "ksystem":
        return greedy_k_system(C)
    if name == "knapsack":
        return knapsack_mixture(C)  # type: ignore[arg-type]
    raise ValueError(f"unknown rule {name!r}")


def run_frugal_order(rule: FrugalRule, C: Constraint, x: Sequence[float]) -> list:
    """Acceptance order of a deterministic rule on values ``x``.

    Halts once every feasible extension has index <= 0 and the accepted
    set is itself feasible (covering families keep going until covered).
    """
    if rule.index is None:
        raise ValueError("run_frugal_order needs a deterministic rule")
    S: frozenset = frozenset()
    order = []
    while True:
        best, arg = NEG_INF, None
        for i in range(C.n):
            if i in S:
                continue
            gi = rule.index(i, S, x[i])
            if gi > best:
                best, arg = gi, i
        if arg is None or best == NEG_INF:
            break
        if best <= 0 and C.is_feasible(S):
            break
        S = S | {arg}
        order.append(arg)
    return order


def run_frugal(rule: FrugalRule, C: Constraint, x: Sequence[float]):
    """Accepted set for a deterministic rule; for a mixture, the list of
    ``(weight, set)`` per component."""
    if rule.mixture:
        return [(w, frozenset(run_frugal_order(r, C, x))) for w, r in rule.mixture]
    return frozenset(run_frugal_order(rule, C, x))


def frugal_value(rule: FrugalRule, C: Constraint, x: Sequence[float]) -> float:
    return sum(w * sum(x[i] for i in run_frugal_order(r, C, x)) for w, r in rule.components())


# --------------------------------------------------------------------------
# semi-online algorithms: state machines emitting (element, threshold) probes


class SemiOnlineAlgorithm:
    C: Constraint

    def next_probe(self) -> tuple | None:
        raise NotImplementedError

    def feedback(self, accepted: bool) -> None:
        raise NotImplementedError

    def fresh(self) -> "SemiOnlineAlgorithm":
        raise NotImplementedError

    def components(self) -> list:
        return [(1.0, self)]

    @property
    def accepted(self) -> list:
        return list(self._S)


class SemiOnlineFromFrugal(SemiOnlineAlgorithm):
    """Probe the element the rule would take next on current support maxima,
    at that maximum; on failure condition the element below it."""

    def __init__(self, rule: FrugalRule, C: Constraint, dists: Sequence[DiscreteDist]):
        if rule.index is None:
            raise ValueError("use semi_online_from_frugal for mixture rules")
        if len(dists) != C.n:
            raise ValueError(f"{len(dists)} distributions for {C.n} elements")
        self.rule, self.C, self._init = rule, C, list(dists)
        self._D: list = list(dists)
        self._S: list = []
        self._pending: tuple | None = None

    def fresh(self) -> "SemiOnlineFromFrugal":
        return SemiOnlineFromFrugal(self.rule, self.C, self._init)

    def upper_bounds(self) -> list:
        return [NEG_INF if d is None else d.max_support() for d in self._D]

    def next_probe(self) -> tuple | None:
        if self._pending is not None:
            raise RuntimeError("feedback for the previous probe is missing")
        u = self.upper_bounds()
        S = set(self._S)
        nxt = next((i for i in run_frugal_order(self.rule, self.C, u) if i not in S), None)
        if nxt is None:
            return None
        if not self.C.can_extend(frozenset(S), nxt):
            raise AssertionError(f"engine tried to probe infeasible extension {nxt}")
        self._pending = (nxt, u[nxt])
        return self._pending

    def feedback(self, accepted: bool) -> None:
        if self._pending is None:
            raise RuntimeError("no probe is pending")
        i, tau = self._pending
        self._pending = None
        if accepted:
            self._S.append(i)
            self._D[i] = DiscreteDist.point(tau)
        else:
            self._D[i] = condition_below(self._D[i], tau)


class MixedSemiOnline(SemiOnlineAlgorithm):
    """Randomised choice among semi-online algorithms, made up front."""

    def __init__(self, parts: list):
        self.parts = parts
        self.C = parts[0][1].C

    def components(self) -> list:
        return [(w, a.fresh()) for w, a in self.parts]

    def fresh(self) -> "MixedSemiOnline":
        return MixedSemiOnline([(w, a.fresh()) for w, a in self.parts])

    def next_probe(self):
        raise TypeError("evaluate a mixture through components()")

    def feedback(self, accepted: bool) -> None:
        raise TypeError("evaluate a mixture through components()")


def semi_online_from_frugal(rule: FrugalRule, C: Constraint,
                            dists: Sequence[DiscreteDist]) -> SemiOnlineAlgorithm:
    if rule.mixture:
        return MixedSemiOnline([(w, SemiOnlineFromFrugal(r, C, dists)) for w, r in rule.mixture])
    return SemiOnlineFromFrugal(rule, C, dists)


class FreeOrderThreshold(SemiOnlineAlgorithm):
    """Probe each element once, in ``order``, at its own threshold."""

    def __init__(self, C: Constraint, order: Sequence[int], thresholds: Sequence[float]):
        self.C, self.order, self.thresholds = C, list(order), list(thresholds)
        self._pos = 0
        self._S: list = []
        self._pending = None
        self.probed: list = []

    def fresh(self) -> "FreeOrderThreshold":
        return FreeOrderThreshold(self.C, self.order, self.thresholds)

    def next_probe(self):
        while self._pos < len(self.order):
            i = self.order[self._pos]
            self._pos += 1
            if self.C.can_extend(frozenset(self._S), i):
                self._pending = i
                self.probed.append(i)
                return i, self.thresholds[i]
        return None

    def feedback(self, accepted: bool) -> None:
        if accepted:
            self._S.append(self._pending)
        self._pending = None


def run_semi_online_on_realization(alg: SemiOnlineAlgorithm, C: Constraint,
                                   x: Sequence[float], max_probes: int = 100_000) -> list:
    """Drive a fresh copy of ``alg`` with feedback ``x_i >= tau``."""
    run = alg.fresh()
    S: list = []
    for _ in range(max_probes):
        probe = run.next_probe()
        if probe is None:
            if not C.is_feasible(S):
                raise AssertionError("semi-online algorithm halted on an infeasible set")
            return S
        i, tau = probe
        if i in S or not C.can_extend(frozenset(S), i):
            raise AssertionError(f"probe of {i} violates feasibility")
        ok = x[i] >= tau
        run.feedback(ok)
        if ok:
            S.append(i)
    raise RuntimeError("probe limit reached")


def realizations(dists: Sequence[DiscreteDist], limit: int = ENUM_LIMIT):
    """Yield ``(prob, x)`` over the product of supports."""
    size = 1
    for d in dists:
        size *= len(d.atoms)
        if size > limit:
            raise GuardExceeded(f"product of supports exceeds {limit}")
    for combo in itertools.product(*(d.atoms for d in dists)):
        p = 1
        for _, pi in combo:
            p *= pi
        yield p, [v for v, _ in combo]


def semi_online_value(alg: SemiOnlineAlgorithm, dists: Sequence[DiscreteDist],
                      limit: int = ENUM_LIMIT) -> float:
    """Exact expected value of a semi-online algorithm by enumeration."""
    total = 0.0
    for w, part in alg.components():
        for p, x in realizations(dists, limit):
            S = run_semi_online_on_realization(part, part.C, x)
            total += w * p * sum(x[i] for i in S)
    return total


def ex_post_brute_force(C: Constraint, dists: Sequence[DiscreteDist], objective: str = "max",
                        limit: int = ENUM_LIMIT) -> float:
    """``E[max_{S feasible} sum_{i in S} x_i]`` (a min-cost for ``'min'``)."""
    if objective == "min":
        return -ex_post_brute_force(C, [d.negate() for d in dists], "max", limit)
    total = 0
    for p, x in realizations(dists, limit):
        best = C.best_subset({i: x[i] for i in range(C.n)})
        if best is None:
            raise ValueError("no feasible subset exists")
        total += p * best[1]
    return total


def bernoulli_reduction(dists: Sequence[DiscreteDist], q: Sequence[float]) -> list:
    """Per element: value ``F(q_i)`` with probability ``q_i``, else 0."""
    out = []
    for d, qi in zip(dists, q):
        qi = min(max(float(qi), 0.0), 1.0)
        if qi <= 1e-15:
            out.append(DiscreteDist.point(0.0))
            continue
        top = conditional_top_mean(d, qi)
        out.append(normalize([(top, qi), (0.0, 1.0 - qi)]))
    return out
