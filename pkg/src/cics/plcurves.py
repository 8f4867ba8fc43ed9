"""Piecewise-linear curves on a bounded interval.

Curves are stored as breakpoint lists and every operation returns a new
curve. Arithmetic only uses ``+ - * /`` so the same code runs on floats and
on :class:`fractions.Fraction` (exact mode); collinearity merging is exact
when the breakpoints are fractions.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

TOL = 1e-9

Point = tuple  # (x, y)


class CurveError(ValueError):
    pass


def _exact(*vals) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in vals)


def _slope(p, q):
    return (q[1] - p[1]) / (q[0] - p[0])


def _simplify(points: list, tol: float = TOL) -> list:
    """Drop duplicate x's and interior points whose two slopes agree."""
    out: list = []
    for p in points:
        if out and p[0] == out[-1][0]:
            out[-1] = p
            continue
        out.append(p)
        while len(out) >= 3:
            a, b, c = out[-3], out[-2], out[-1]
            ds = _slope(b, c) - _slope(a, b)
            if (ds == 0) if _exact(ds) else abs(ds) < tol:
                del out[-2]
            else:
                break
    return out


@dataclass(frozen=True)
class PiecewiseLinear:
    bp: tuple
    shape: str | None = None

    def __post_init__(self):
        if not self.bp:
            raise CurveError("curve needs at least one breakpoint")
        for a, b in zip(self.bp, self.bp[1:]):
            if not b[0] > a[0]:
                raise CurveError("breakpoint x must be strictly increasing")

    @classmethod
    def from_points(cls, points: Iterable[Point], shape: str | None = None,
                    tol: float = TOL) -> "PiecewiseLinear":
        return cls(tuple(_simplify(list(points), tol)), shape)

    @classmethod
    def line(cls, x0, y0, x1, y1, shape: str | None = None) -> "PiecewiseLinear":
        return cls(((x0, y0), (x1, y1)), shape)

    @property
    def xmin(self):
        return self.bp[0][0]

    @property
    def xmax(self):
        return self.bp[-1][0]

    def slopes(self) -> list:
        return [_slope(a, b) for a, b in zip(self.bp, self.bp[1:])]

    def segments(self):
        """Yield ``(x0, x1, slope)`` per segment."""
        for a, b in zip(self.bp, self.bp[1:]):
            yield a[0], b[0], _slope(a, b)

    def __call__(self, x):
        return evaluate(self, x)

    def is_concave(self, tol: float = TOL) -> bool:
        s = self.slopes()
        return all(b <= a + tol for a, b in zip(s, s[1:]))

    def is_convex(self, tol: float = TOL) -> bool:
        s = self.slopes()
        return all(b >= a - tol for a, b in zip(s, s[1:]))

    def to_json(self) -> dict:
        return {"bp": [[float(x), float(y)] for x, y in self.bp]}

    def to_float(self) -> "PiecewiseLinear":
        return PiecewiseLinear(tuple((float(x), float(y)) for x, y in self.bp), self.shape)


def evaluate(curve: PiecewiseLinear, x, tol: float = TOL):
    """Linear interpolation; ``x`` may overshoot the domain by ``tol``."""
    bp = curve.bp
    if x < bp[0][0] - tol or x > bp[-1][0] + tol:
        raise CurveError(f"x={x} outside domain [{bp[0][0]}, {bp[-1][0]}]")
    if len(bp) == 1 or x <= bp[0][0]:
        return bp[0][1]
    if x >= bp[-1][0]:
        return bp[-1][1]
    lo, hi = 0, len(bp) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bp[mid][0] <= x:
            lo = mid
        else:
            hi = mid
    (x0, y0), (x1, y1) = bp[lo], bp[hi]
    return y0 + (y1 - y0) * (x - x0) / (x1 - x0)


def upper_hull(points: Sequence) -> list:
    """Upper concave hull of a point cloud (monotone chain).

    Points may carry extra trailing fields (tags); on equal x the larger y
    wins, and among equal points the earliest one in ``points`` is kept.
    """
    order = sorted(range(len(points)), key=lambda k: (points[k][0], -points[k][1], k))
    pts = []
    for k in order:
        p = points[k]
        if pts and pts[-1][0] == p[0]:
            continue
        pts.append(p)
    hull: list = []
    for p in pts:
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def upper_concave_envelope(curves: Sequence[PiecewiseLinear],
                           points: Sequence[Point] = ()) -> PiecewiseLinear:
    """Smallest concave function dominating every curve and point."""
    cloud = [p for c in curves for p in c.bp] + [tuple(p[:2]) for p in points]
    if not cloud:
        raise CurveError("envelope of nothing")
    hull = upper_hull(cloud)
    return PiecewiseLinear.from_points(((p[0], p[1]) for p in hull), "concave")


def budget_merge(weighted: Sequence[tuple]) -> PiecewiseLinear:
    """``h(q) = max { sum p_j f_j(q_j) : sum p_j q_j = q }`` for concave ``f_j``.

    Segments of all children are sorted by decreasing slope, each one's
    extent scaled by its weight. Ties keep the child order.
    """
    if not weighted:
        raise CurveError("budget_merge of nothing")
    segs = []
    y0 = 0
    x0 = 0
    for j, (p, curve) in enumerate(weighted):
        if not curve.is_concave():
            raise CurveError("budget_merge needs concave curves")
        y0 = y0 + p * curve.bp[0][1]
        x0 = x0 + p * curve.xmin
        for k, (a, b, s) in enumerate(curve.segments()):
            segs.append((s, j, k, p * (b - a)))
    segs.sort(key=lambda t: (-t[0], t[1], t[2]))
    pts = [(x0, y0)]
    x, y = x0, y0
    for s, _, _, ext in segs:
        x = x + ext
        y = y + s * ext
        pts.append((x, y))
    return PiecewiseLinear.from_points(pts, "concave")


def budget_split(weighted: Sequence[tuple], q) -> list:
    """Per-child budgets ``q_j`` realising ``budget_merge(weighted)(q)``."""
    segs = []
    alloc = []
    base = 0
    for j, (p, curve) in enumerate(weighted):
        alloc.append(curve.xmin)
        base = base + p * curve.xmin
        for k, (a, b, s) in enumerate(curve.segments()):
            segs.append((s, j, k, b - a))
    segs.sort(key=lambda t: (-t[0], t[1], t[2]))
    left = q - base
    for s, j, _, ext in segs:
        if left <= 0:
            break
        p = weighted[j][0]
        take = ext if p * ext <= left else left / p
        alloc[j] = alloc[j] + take
        left = left - p * take
    return alloc


def shift_add(curve: PiecewiseLinear, constant) -> PiecewiseLinear:
    return PiecewiseLinear(tuple((x, y + constant) for x, y in curve.bp), curve.shape)


def clip_monotone_hull(curve: PiecewiseLinear) -> PiecewiseLinear:
    """Running maximum from the left; flattens any decreasing tail."""
    pts = [curve.bp[0]]
    best = curve.bp[0][1]
    for a, b in zip(curve.bp, curve.bp[1:]):
        if b[1] >= best:
            if a[1] < best:
                # crossing back above the running max inside this segment
                t = (best - a[1]) / (b[1] - a[1])
                pts.append((a[0] + t * (b[0] - a[0]), best))
            pts.append(b)
            best = b[1]
        else:
            if a[1] >= best:
                pts.append((a[0], best))
            pts.append((b[0], best))
    return PiecewiseLinear.from_points(pts, curve.shape)


def argmax_left(curve: PiecewiseLinear):
    """Smallest x attaining the maximum over the breakpoints."""
    best = max(y for _, y in curve.bp)
    for x, y in curve.bp:
        if y == best:
            return x
    raise AssertionError("unreachable")


def linear_combination(terms: Sequence[tuple], constant=0, shape: str | None = None
                       ) -> PiecewiseLinear:
    """``constant + sum w_k c_k`` for curves on a common domain."""
    xs = sorted({x for _, c in terms for x, _ in c.bp})
    pts = []
    for x in xs:
        y = constant
        for w, c in terms:
            y = y + w * evaluate(c, x)
        pts.append((x, y))
    return PiecewiseLinear.from_points(pts, shape)


def pointwise_max(a: PiecewiseLinear, b: PiecewiseLinear, shape: str | None = None
                  ) -> PiecewiseLinear:
    """Pointwise maximum of two curves on the same domain."""
    xs = sorted({x for x, _ in a.bp} | {x for x, _ in b.bp})
    pts = []
    prev = None
    for x in xs:
        da = evaluate(a, x) - evaluate(b, x)
        if prev is not None and (prev[1] < 0 < da or da < 0 < prev[1]):
            px, pd = prev
            xc = px + (x - px) * pd / (pd - da)
            if px < xc < x:  # rounding can land the crossing on a breakpoint
                pts.append((xc, evaluate(a, xc)))
        pts.append((x, max(evaluate(a, x), evaluate(b, x))))
        prev = (x, da)
    return PiecewiseLinear.from_points(pts, shape)


def root_of_curve_minus_identity(curve: PiecewiseLinear, tol: float = TOL):
    """Smallest ``y`` with ``curve(y) <= y`` for a convex curve of slope <= 1.

    ``curve(y) - y`` is non-increasing, so scan breakpoints for the first
    non-positive gap and solve on the segment before it. If the gap is still
    positive at the right end, the last segment is extended. Float curves
    treat gaps below ``1e-12`` (relative) as zero; fraction curves are exact.
    """
    slopes = curve.slopes()
    for s in slopes:
        if s > 1 + tol:
            raise CurveError(f"slope {s} > 1 violates the optimality-curve contract")
    bp = curve.bp

    def hit(x, y):
        gap = y - x
        if _exact(x, y):
            return gap <= 0
        return gap <= 1e-12 * max(1.0, abs(x))

    if hit(*bp[0]):
        return bp[0][0]
    for (x0, y0), (x1, y1) in zip(bp, bp[1:]):
        if hit(x1, y1):
            g0, g1 = y0 - x0, y1 - x1
            if g1 >= 0:
                return x1
            return x0 + g0 * (x1 - x0) / (g0 - g1)
    if len(bp) < 2:
        raise CurveError("cannot extend a single-point curve")
    s = slopes[-1]
    if s >= 1:
        raise CurveError("curve stays above the identity")
    x1, y1 = bp[-1]
    return x1 + (y1 - x1) / (1 - s)
