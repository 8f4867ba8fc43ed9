"""Feasibility families, their oracles and ex-ante polytopes.

All families are downward closed except :class:`AtLeastK`, the covering
family used for minimisation instances once values are negated.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .plcurves import PiecewiseLinear
from .simplex import simplex_solve

FEAS_TOL = 1e-7


class ConstraintError(ValueError):
    pass


@dataclass
class ExAnteSolution:
    q: list
    value: float


class Constraint:
    kind: str = "abstract"
    n: int
    is_matroid: bool = False
    downward_closed: bool = True

    def _check(self, S: Iterable[int]) -> frozenset:
        S = frozenset(S)
        for i in S:
            if not 0 <= i < self.n:
                raise ConstraintError(f"index {i} out of range for n={self.n}")
        return S

    def is_feasible(self, S) -> bool:
        raise NotImplementedError

    def can_extend(self, S, i: int) -> bool:
        S = self._check(S)
        self._check([i])
        return i not in S and self.is_feasible(S | {i})

    def rank(self, S) -> int:
        if not self.is_matroid:
            raise ConstraintError(f"rank is only defined for matroids, not {self.kind}")
        S = sorted(self._check(S))
        cur: set = set()
        for i in S:
            if self.is_feasible(cur | {i}):
                cur.add(i)
        return len(cur)

    def best_subset(self, weights: dict) -> tuple | None:
        """Max-weight feasible subset of ``weights``' keys, as ``(set, value)``.

        ``None`` when no subset of the available elements is feasible.
        """
        items = sorted(weights)
        if self.is_matroid:
            cur: set = set()
            for i in sorted(items, key=lambda k: (-weights[k], k)):
                if weights[i] > 0 and self.is_feasible(cur | {i}):
                    cur.add(i)
            return frozenset(cur), sum(weights[i] for i in cur)
        best = None
        pos = [i for i in items if weights[i] > 0] if self.downward_closed else items
        for r in range(len(pos) + 1):
            for S in itertools.combinations(pos, r):
                if self.is_feasible(S):
                    v = sum(weights[i] for i in S)
                    if best is None or v > best[1] + 1e-12:
                        best = (frozenset(S), v)
        return best

    def feasible_sets(self) -> list:
        """All feasible subsets (enumeration; desk-scale ``n`` only)."""
        out = []
        for r in range(self.n + 1):
            for S in itertools.combinations(range(self.n), r):
                if self.is_feasible(S):
                    out.append(frozenset(S))
        return out

    def maximal_sets(self) -> list:
        fs = self.feasible_sets()
        return [S for S in fs if not any(S < T for T in fs)]

    def in_polytope(self, q: Sequence[float], tol: float = FEAS_TOL) -> bool:
        """Membership of ``q`` in the convex hull of feasible indicators."""
        q = np.asarray(q, dtype=float)
        if np.any(q < -tol) or np.any(q > 1 + tol):
            return False
        sets = self.maximal_sets()
        if not sets:
            return bool(np.all(q <= tol))
        # find lambda >= 0, sum lambda <= 1, sum_{S ni i} lambda_S >= q_i
        A = np.array([[-(1.0 if i in S else 0.0) for S in sets] for i in range(self.n)]
                     + [[1.0] * len(sets)])
        b = np.concatenate([-(q - tol), [1.0]])
        res = simplex_solve(np.zeros(len(sets)), A, b)
        return res.status == "optimal"

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass
class UniformMatroid(Constraint):
    n: int
    k: int
    kind: str = field(default="uniform_matroid", init=False)
    is_matroid: bool = field(default=True, init=False)

    def is_feasible(self, S) -> bool:
        return len(self._check(S)) <= self.k

    def rank(self, S) -> int:
        return min(len(self._check(S)), self.k)

    def max_increment(self, i: int, q) -> float:
        return min(1.0 - q[i], self.k - sum(q))

    def in_polytope(self, q, tol: float = FEAS_TOL) -> bool:
        return all(-tol <= x <= 1 + tol for x in q) and sum(q) <= self.k + tol

    def to_json(self) -> dict:
        return {"kind": self.kind, "k": self.k}


class SingleSelection(UniformMatroid):
    def __init__(self, n: int):
        super().__init__(n, 1)
        self.kind = "single"

    def to_json(self) -> dict:
        return {"kind": "single"}


@dataclass
class PartitionMatroid(Constraint):
    n: int
    parts: list
    caps: list
    kind: str = field(default="partition_matroid", init=False)
    is_matroid: bool = field(default=True, init=False)

    def __post_init__(self):
        if len(self.parts) != len(self.caps):
            raise ConstraintError("parts and caps differ in length")
        self._part_of = {}
        for k, part in enumerate(self.parts):
            for i in part:
                if i in self._part_of:
                    raise ConstraintError(f"element {i} appears in two parts")
                self._part_of[i] = k

    def is_feasible(self, S) -> bool:
        S = self._check(S)
        counts = [0] * len(self.parts)
        for i in S:
            if i in self._part_of:
                counts[self._part_of[i]] += 1
        return all(c <= cap for c, cap in zip(counts, self.caps))

    def rank(self, S) -> int:
        S = self._check(S)
        free = sum(1 for i in S if i not in self._part_of)
        return free + sum(min(cap, sum(1 for i in S if i in set(part)))
                          for part, cap in zip(self.parts, self.caps))

    def max_increment(self, i: int, q) -> float:
        inc = 1.0 - q[i]
        if i in self._part_of:
            k = self._part_of[i]
            inc = min(inc, self.caps[k] - sum(q[j] for j in self.parts[k]))
        return inc

    def in_polytope(self, q, tol: float = FEAS_TOL) -> bool:
        if not all(-tol <= x <= 1 + tol for x in q):
            return False
        return all(sum(q[j] for j in part) <= cap + tol
                   for part, cap in zip(self.parts, self.caps))

    def to_json(self) -> dict:
        return {"kind": self.kind, "parts": [list(p) for p in self.parts], "caps": list(self.caps)}


@dataclass
class ExplicitFamily(Constraint):
    """Downward closure of the listed sets."""

    n: int
    feasible: list
    kind: str = field(default="explicit", init=False)

    def __post_init__(self):
        gens = [frozenset(S) for S in self.feasible]
        for S in gens:
            self._check(S)
        closure = {frozenset()}
        for S in gens:
            for r in range(len(S) + 1):
                closure.update(frozenset(T) for T in itertools.combinations(sorted(S), r))
        self._family = frozenset(closure)
        self._rank_cache: dict = {}

    def is_feasible(self, S) -> bool:
        return self._check(S) in self._family

    def feasible_sets(self) -> list:
        return sorted(self._family, key=lambda S: (len(S), sorted(S)))

    @cached_property
    def is_matroid(self) -> bool:  # type: ignore[override]
        fam = self._family
        for A in fam:
            for B in fam:
                if len(A) > len(B) and not any(B | {x} in fam for x in A - B):
                    return False
        return True

    def rank(self, S) -> int:
        S = self._check(S)
        if S not in self._rank_cache:
            self._rank_cache[S] = max(len(T) for T in self._family if T <= S)
        return self._rank_cache[S]

    def max_increment(self, i: int, q) -> float:
        others = [j for j in range(self.n) if j != i]
        best = 1.0 - q[i]
        for r in range(len(others) + 1):
            for A in itertools.combinations(others, r):
                A = frozenset(A) | {i}
                best = min(best, self.rank(A) - sum(q[j] for j in A))
        return best

    def to_json(self) -> dict:
        gens = [sorted(S) for S in self.maximal_sets()]
        return {"kind": self.kind, "feasible": gens}


@dataclass
class KSystem(ExplicitFamily):
    k: int = 1

    def __post_init__(self):
        super().__post_init__()
        self.kind = "k_system"
        if self.n <= 12:
            actual = k_system_parameter(self)
            if actual > self.k + 1e-12:
                raise ConstraintError(f"family is a {actual:g}-system, not a {self.k}-system")

    def to_json(self) -> dict:
        out = super().to_json()
        out["k"] = self.k
        out["kind"] = "k_system"
        return out


def k_system_parameter(C: Constraint) -> float:
    """Smallest ``k`` with max maximal set <= k * min maximal set in every ``S``."""
    fam = C.feasible_sets()
    worst = 1.0
    for r in range(1, C.n + 1):
        for S in itertools.combinations(range(C.n), r):
            S = frozenset(S)
            inside = [T for T in fam if T <= S]
            maximal = [T for T in inside if not any(T < U for U in inside)]
            sizes = [len(T) for T in maximal]
            if min(sizes) == 0:
                if max(sizes) > 0:
                    return float("inf")
                continue
            worst = max(worst, max(sizes) / min(sizes))
    return worst


@dataclass
class Knapsack(Constraint):
    sizes: list
    kind: str = field(default="knapsack", init=False)

    def __post_init__(self):
        for s in self.sizes:
            if not 0 < s <= 1:
                raise ConstraintError(f"knapsack sizes must lie in (0, 1], got {s}")
        self.n = len(self.sizes)

    def is_feasible(self, S) -> bool:
        return sum(self.sizes[i] for i in self._check(S)) <= 1 + 1e-12

    def in_polytope(self, q, tol: float = FEAS_TOL) -> bool:
        # the LP relaxation used for the ex-ante program
        return all(-tol <= x <= 1 + tol for x in q) and \
            sum(s * x for s, x in zip(self.sizes, q)) <= 1 + tol

    def to_json(self) -> dict:
        return {"kind": self.kind, "sizes": list(self.sizes)}


@dataclass
class AtLeastK(Constraint):
    """Covering family ``{S : |S| >= k}`` (upward closed)."""

    n: int
    k: int = 1
    kind: str = field(default="at_least", init=False)
    downward_closed: bool = field(default=False, init=False)

    def is_feasible(self, S) -> bool:
        return len(self._check(S)) >= self.k

    def can_extend(self, S, i: int) -> bool:
        S = self._check(S)
        self._check([i])
        return i not in S

    def best_subset(self, weights: dict) -> tuple | None:
        if len(weights) < self.k:
            return None
        order = sorted(weights, key=lambda i: (-weights[i], i))
        chosen = [i for r, i in enumerate(order) if r < self.k or weights[i] > 0]
        return frozenset(chosen), sum(weights[i] for i in chosen)

    def in_polytope(self, q, tol: float = FEAS_TOL) -> bool:
        return all(-tol <= x <= 1 + tol for x in q) and sum(q) >= self.k - tol

    def to_json(self) -> dict:
        return {"kind": self.kind, "k": self.k}


def constraint_from_json(obj: dict, n: int) -> Constraint:
    kind = obj.get("kind")
    try:
        if kind == "single":
            return SingleSelection(n)
        if kind == "uniform_matroid":
            return UniformMatroid(n, int(obj["k"]))
        if kind == "partition_matroid":
            return PartitionMatroid(n, [list(p) for p in obj["parts"]], list(obj["caps"]))
        if kind == "explicit":
            return ExplicitFamily(n, [list(S) for S in obj["feasible"]])
        if kind == "k_system":
            return KSystem(n, [list(S) for S in obj["feasible"]], k=int(obj["k"]))
        if kind == "knapsack":
            C = Knapsack(list(map(float, obj["sizes"])))
            if C.n != n:
                raise ConstraintError(f"knapsack has {C.n} sizes for {n} elements")
            return C
        if kind == "at_least":
            return AtLeastK(n, int(obj.get("k", 1)))
    except KeyError as exc:
        raise ConstraintError(f"constraint of kind {kind!r} is missing {exc}") from None
    raise ConstraintError(f"unknown constraint kind {kind!r}")


# --------------------------------------------------------------------------
# ex-ante program: max sum_i R_i(q_i) over the polytope


def _segments(curves: Sequence[PiecewiseLinear]) -> list:
    segs = []
    for i, c in enumerate(curves):
        for k, (a, b, s) in enumerate(c.segments()):
            segs.append((float(s), i, k, float(b - a)))
    return segs


def maximize_separable_concave(C: Constraint, curves: Sequence[PiecewiseLinear]
                               ) -> ExAnteSolution:
    """Optimal ``q`` in the ex-ante polytope for concave curves on ``[0, 1]``.

    Matroids and knapsacks pour mass greedily along the steepest remaining
    slope; other explicit families go through a segment LP over convex
    combinations of maximal feasible sets. Negative slopes are never poured
    except where a covering family forces mass.
    """
    if len(curves) != C.n:
        raise ConstraintError(f"{len(curves)} curves for {C.n} elements")
    for c in curves:
        if not c.is_concave():
            raise ConstraintError("ex-ante curves must be concave")
    if isinstance(C, AtLeastK):
        q = _pour_covering(C, curves)
    elif isinstance(C, Knapsack):
        q = _pour_knapsack(C, curves)
    elif C.is_matroid:
        q = _pour_matroid(C, curves)
    else:
        q = _segment_lp(C, curves)
    value = sum(float(c(min(max(x, c.xmin), c.xmax))) for c, x in zip(curves, q))
    return ExAnteSolution(q, value)


def _order(segs: list, key) -> list:
    return sorted(segs, key=lambda t: (-key(t), t[1], t[2]))


def _pour_matroid(C: Constraint, curves) -> list:
    q = [float(c.xmin) for c in curves]
    for s, i, _, ext in _order(_segments(curves), lambda t: t[0]):
        if s <= 0:
            break
        inc = min(ext, C.max_increment(i, q))
        if inc > 1e-15:
            q[i] += inc
    return q


def _pour_knapsack(C: Knapsack, curves) -> list:
    q = [float(c.xmin) for c in curves]
    room = 1.0 - sum(s * x for s, x in zip(C.sizes, q))
    for s, i, _, ext in _order(_segments(curves), lambda t: t[0] / C.sizes[t[1]]):
        if s <= 0 or room <= 1e-15:
            break
        inc = min(ext, room / C.sizes[i])
        q[i] += inc
        room -= inc * C.sizes[i]
    return q


def _pour_covering(C: AtLeastK, curves) -> list:
    q = [float(c.xmin) for c in curves]
    need = C.k - sum(q)
    for s, i, _, ext in _order(_segments(curves), lambda t: t[0]):
        if need <= 1e-15 and s <= 0:
            break
        take = ext if s > 0 else min(ext, need)
        q[i] += take
        need -= take
    if need > 1e-9:
        raise ConstraintError("covering requirement exceeds total available mass")
    return q


def _segment_lp(C: Constraint, curves) -> list:
    sets = C.maximal_sets()
    segs = [t for t in _segments(curves) if t[0] > 0]
    nl, ns = len(sets), len(segs)
    if ns == 0:
        return [float(c.xmin) for c in curves]
    obj = np.concatenate([np.zeros(nl), [t[0] for t in segs]])
    A = np.zeros((C.n + 1, nl + ns))
    b = np.zeros(C.n + 1)
    for i in range(C.n):
        for j, S in enumerate(sets):
            if i in S:
                A[i, j] = -1.0
        for k, t in enumerate(segs):
            if t[1] == i:
                A[i, nl + k] = 1.0
        b[i] = -float(curves[i].xmin)
    A[C.n, :nl] = 1.0
    b[C.n] = 1.0
    upper = [None] * nl + [t[3] for t in segs]
    res = simplex_solve(obj, A, b, upper=upper)
    if res.status != "optimal":
        raise ConstraintError(f"ex-ante LP ended {res.status}")
    q = [float(c.xmin) for c in curves]
    for k, t in enumerate(segs):
        q[t[1]] += float(res.x[nl + k])
    return q
