"""Finite real-valued distributions and their quantile revenue curves."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .plcurves import PiecewiseLinear

PROB_TOL = 1e-9


class DistributionError(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteDist:
    """Atoms ``(value, prob)`` sorted by value, largest first, no duplicates."""

    atoms: tuple

    def __post_init__(self):
        if not self.atoms:
            raise DistributionError("distribution has no atoms")
        total = 0
        prev = None
        for v, p in self.atoms:
            if not math.isfinite(float(v)):
                raise DistributionError(f"non-finite value {v}")
            if not p > 0:
                raise DistributionError(f"atom {v} has non-positive probability {p}")
            if prev is not None and not v < prev:
                raise DistributionError("atoms must be strictly decreasing in value")
            prev = v
            total += p
        if abs(total - 1) > PROB_TOL:
            raise DistributionError(f"probabilities sum to {float(total)}, not 1")

    @property
    def values(self) -> list:
        return [v for v, _ in self.atoms]

    @property
    def probs(self) -> list:
        return [p for _, p in self.atoms]

    def mean(self):
        return sum(v * p for v, p in self.atoms)

    def max_support(self):
        return self.atoms[0][0]

    def negate(self) -> "DiscreteDist":
        return normalize([(-v, p) for v, p in self.atoms])

    def to_json(self) -> dict:
        return {"atoms": [[float(v), float(p)] for v, p in self.atoms]}

    @classmethod
    def from_json(cls, obj: dict) -> "DiscreteDist":
        return normalize([(v, p) for v, p in obj["atoms"]])

    @classmethod
    def point(cls, value) -> "DiscreteDist":
        return cls(((value, 1.0),))


def normalize(raw: Iterable) -> DiscreteDist:
    """Merge duplicate values, drop zero mass, rescale to total mass one."""
    merged: dict = {}
    for v, p in raw:
        if p < 0:
            raise DistributionError(f"negative probability {p} for value {v}")
        if p == 0:
            continue
        merged[v] = merged.get(v, 0) + p
    if not merged:
        raise DistributionError("distribution has no positive mass")
    total = sum(merged.values())
    return DiscreteDist(tuple((v, merged[v] / total) for v in sorted(merged, reverse=True)))


def top_quantile_revenue(dist: DiscreteDist, q):
    """``R(q)``: integral of the descending quantile function over ``[0, q]``.

    An atom straddling ``q`` contributes only the part of its mass inside.
    """
    if q < 0 or q > 1 + PROB_TOL:
        raise DistributionError(f"quantile {q} outside [0, 1]")
    left = q
    rev = 0
    for v, p in dist.atoms:
        if left <= 0:
            break
        take = p if p <= left else left
        rev = rev + v * take
        left = left - take
    return rev


def conditional_top_mean(dist: DiscreteDist, q):
    """``F(q) = R(q) / q``, the mean of the top ``q`` quantile."""
    if q <= 0:
        raise DistributionError("conditional mean needs q > 0")
    return top_quantile_revenue(dist, q) / q


def revenue_curve(dist: DiscreteDist) -> PiecewiseLinear:
    pts = [(0, 0)]
    x = y = 0
    for v, p in dist.atoms:
        x = x + p
        y = y + v * p
        pts.append((x, y))
    # pin the right end to exactly 1 so budgets of 1 stay inside the domain
    pts[-1] = (1 if abs(x - 1) <= PROB_TOL else x, y)
    return PiecewiseLinear.from_points(pts, "concave")


def condition_below(dist: DiscreteDist, t) -> DiscreteDist | None:
    """``dist | X < t``; ``None`` when no mass lies strictly below ``t``."""
    kept = [(v, p) for v, p in dist.atoms if v < t]
    if not kept:
        return None
    return normalize(kept)


def max_support(dist: DiscreteDist):
    return dist.max_support()


def sample(dist: DiscreteDist, rng: np.random.Generator, size: int | None = None):
    """Draw from ``dist`` with a caller-owned numpy ``Generator``."""
    vals = np.array([float(v) for v in dist.values])
    probs = np.array([float(p) for p in dist.probs])
    probs = probs / probs.sum()
    idx = rng.choice(len(vals), size=size, p=probs)
    return vals[idx] if size is not None else float(vals[idx])
