"""Exact algebra of nondecreasing piecewise-linear functions.

A single carrier type, :class:`PiecewiseLinear`, represents both families of
network-calculus objects:

* ``minplus`` role (time domain): left-continuous, ``f(x) = 0`` for ``x <= 0``.
* ``maxplus`` role (space domain): right-continuous, ``f(x) = -inf`` for
  ``x < 0`` and ``f(0) >= 0``.

Functions are stored as an eventually-affine breakpoint list.  Each segment is
``(x_start, y_start, slope)`` where ``y_start`` is the right limit at
``x_start``; the value *at* a breakpoint follows the continuity convention of
the role.  A function that becomes ``+inf`` carries the breakpoint in
``inf_at`` instead of an infinite float in its segments.

Internally every operation works on a generic knot list (:class:`_Knots`)
which stores point value, right limit and right slope at each breakpoint and
tolerates infinite values.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

INF = math.inf

MINPLUS = "minplus"
MAXPLUS = "maxplus"
ROLES = (MINPLUS, MAXPLUS)

#: absolute tolerance for coordinates and values
TOL = 1e-9
#: breakpoints closer than this are merged
MERGE_TOL = 1e-12


class CurveError(ValueError):
    """Raised for malformed curves or role mismatches."""


@dataclass(frozen=True)
class PiecewiseLinear:
    role: str
    segments: tuple[tuple[float, float, float], ...]
    inf_at: float | None = None
    _xs: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.role not in ROLES:
            raise CurveError(f"unknown role {self.role!r}")
        segs = tuple((float(x), float(y), float(s)) for x, y, s in self.segments)
        object.__setattr__(self, "segments", segs)
        if self.inf_at is not None:
            object.__setattr__(self, "inf_at", float(self.inf_at))
        if not segs:
            if self.inf_at != 0.0:
                raise CurveError("a curve without segments must be +inf from 0")
        elif segs[0][0] != 0.0:
            raise CurveError("first segment must start at x = 0")
        for i, (x, y, s) in enumerate(segs):
            if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(s)):
                raise CurveError("segment entries must be finite; use inf_at for +inf")
            if y < -TOL or s < -TOL:
                raise CurveError(f"negative value or slope in segment {i}")
            if i:
                px, py, ps = segs[i - 1]
                if x <= px:
                    raise CurveError("segment starts must be strictly increasing")
                if y < py + ps * (x - px) - TOL:
                    raise CurveError(f"downward jump at x = {x}")
        if self.inf_at is not None and segs and self.inf_at <= segs[-1][0]:
            raise CurveError("inf_at must lie beyond the last segment start")
        object.__setattr__(self, "_xs", tuple(s[0] for s in segs))

    # -- basic queries -------------------------------------------------
    @property
    def continuity(self) -> str:
        return "left" if self.role == MINPLUS else "right"

    @property
    def pre_domain_value(self) -> float:
        return 0.0 if self.role == MINPLUS else -INF

    @property
    def breakpoints(self) -> tuple[float, ...]:
        if self.inf_at is None:
            return self._xs
        return self._xs + (self.inf_at,)

    @property
    def tail_slope(self) -> float:
        if self.inf_at is not None:
            return INF
        return self.segments[-1][2]

    def _seg_value(self, i: int, x: float) -> float:
        x0, y0, s = self.segments[i]
        return y0 + s * (x - x0)

    def eval(self, x: float) -> float:
        """Value at ``x`` honoring the role's continuity convention."""
        if x < 0:
            return self.pre_domain_value
        if self.role == MINPLUS:
            if x == 0:
                return 0.0
            if self.inf_at is not None and x > self.inf_at:
                return INF
            return self._seg_value(bisect.bisect_left(self._xs, x) - 1, x)
        if self.inf_at is not None and x >= self.inf_at:
            return INF
        return self._seg_value(bisect.bisect_right(self._xs, x) - 1, x)

    __call__ = eval

    def right_limit(self, x: float) -> float:
        if x < 0:
            return self.pre_domain_value
        if self.inf_at is not None and x >= self.inf_at:
            return INF
        return self._seg_value(bisect.bisect_right(self._xs, x) - 1, x)

    def left_limit(self, x: float) -> float:
        if x <= 0:
            return self.pre_domain_value if self.role == MAXPLUS or x < 0 else 0.0
        if self.inf_at is not None and x > self.inf_at:
            return INF
        return self._seg_value(bisect.bisect_left(self._xs, x) - 1, x)

    def evaluate(self, xs) -> np.ndarray:
        """Vectorized :meth:`eval` over an array of abscissae."""
        xs = np.asarray(xs, dtype=float)
        out = np.empty_like(xs)
        if self.segments:
            bx = np.asarray(self._xs)
            seg = np.asarray(self.segments)
            side = "left" if self.role == MINPLUS else "right"
            idx = np.clip(np.searchsorted(bx, xs, side=side) - 1, 0, len(bx) - 1)
            out[:] = seg[idx, 1] + seg[idx, 2] * (xs - seg[idx, 0])
        if self.inf_at is not None:
            mask = xs > self.inf_at if self.role == MINPLUS else xs >= self.inf_at
            out[mask] = INF
        if self.role == MINPLUS:
            out[xs <= 0] = 0.0
        else:
            out[xs < 0] = -INF
        return out

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        d = {"role": self.role, "segments": [list(s) for s in self.segments]}
        if self.inf_at is not None:
            d["inf_at"] = self.inf_at
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewiseLinear":
        unknown = set(d) - {"role", "segments", "inf_at"}
        if unknown:
            raise CurveError(f"unknown curve fields: {sorted(unknown)}")
        try:
            segs = [tuple(s) for s in d["segments"]]
            if any(len(s) != 3 for s in segs):
                raise CurveError("segments must be [x, y, slope] triples")
            return cls(d["role"], tuple(segs), d.get("inf_at"))
        except KeyError as exc:
            raise CurveError(f"missing curve field {exc}") from None

    def isclose(self, other: "PiecewiseLinear", tol: float = TOL) -> bool:
        """Structural equality of canonical forms up to ``tol``."""
        if self.role != other.role or len(self.segments) != len(other.segments):
            return False
        if (self.inf_at is None) != (other.inf_at is None):
            return False
        if self.inf_at is not None and abs(self.inf_at - other.inf_at) > tol:
            return False
        for a, b in zip(self.segments, other.segments):
            if any(abs(u - v) > tol * max(1.0, abs(u)) for u, v in zip(a, b)):
                return False
        return True

    def __repr__(self):
        tail = f", inf_at={self.inf_at:g}" if self.inf_at is not None else ""
        body = ", ".join(f"({x:g}, {y:g}, {s:g})" for x, y, s in self.segments)
        return f"PiecewiseLinear({self.role}, [{body}]{tail})"


def minplus(segments: Iterable[Sequence[float]], inf_at: float | None = None) -> PiecewiseLinear:
    return canonical(PiecewiseLinear(MINPLUS, tuple(map(tuple, segments)), inf_at))


def maxplus(segments: Iterable[Sequence[float]], inf_at: float | None = None) -> PiecewiseLinear:
    return canonical(PiecewiseLinear(MAXPLUS, tuple(map(tuple, segments)), inf_at))


def delta(T: float = 0.0) -> PiecewiseLinear:
    """Min-plus delay element: 0 on ``[0, T]`` and ``+inf`` afterwards."""
    if T < 0:
        raise CurveError("delay must be nonnegative")
    if T == 0:
        return PiecewiseLinear(MINPLUS, (), 0.0)
    return PiecewiseLinear(MINPLUS, ((0.0, 0.0, 0.0),), T)


def zero(role: str = MINPLUS) -> PiecewiseLinear:
    return PiecewiseLinear(role, ((0.0, 0.0, 0.0),))


# ----------------------------------------------------------------------
# generic knot representation
# ----------------------------------------------------------------------

class _Knots:
    """Point value, right limit and right slope at each breakpoint.

    Covers ``[0, inf)``; ``xs[0] == 0``.  Values may be ``+inf`` or ``-inf``
    (neutral elements of the envelope folds); infinite values carry slope 0.
    """

    __slots__ = ("xs", "pv", "rv", "sl")

    def __init__(self, xs, pv, rv, sl):
        self.xs, self.pv, self.rv, self.sl = xs, pv, rv, sl

    @classmethod
    def constant(cls, v: float) -> "_Knots":
        return cls([0.0], [v], [v], [0.0])

    def _interior(self, i: int, x: float) -> float:
        r = self.rv[i]
        return r if math.isinf(r) else r + self.sl[i] * (x - self.xs[i])

    def left_at(self, i: int) -> float:
        """Left limit at knot ``i > 0``."""
        return self._interior(i - 1, self.xs[i])

    def locate(self, x: float):
        """Return (point value, right limit, right slope) at ``x``."""
        i = bisect.bisect_right(self.xs, x + MERGE_TOL) - 1
        if abs(self.xs[i] - x) <= MERGE_TOL:
            return self.pv[i], self.rv[i], self.sl[i]
        v = self._interior(i, x)
        return v, v, self.sl[i]

    def simplify(self) -> "_Knots":
        xs, pv, rv, sl = [self.xs[0]], [self.pv[0]], [self.rv[0]], [self.sl[0]]
        for i in range(1, len(self.xs)):
            x = self.xs[i]
            if x - xs[-1] <= MERGE_TOL:
                pv[-1], rv[-1], sl[-1] = self.pv[i], self.rv[i], self.sl[i]
                continue
            r = rv[-1]
            left = r if math.isinf(r) else r + sl[-1] * (x - xs[-1])
            if (_same(left, self.pv[i]) and _same(left, self.rv[i])
                    and abs(self.sl[i] - sl[-1]) <= TOL):
                continue
            xs.append(x)
            pv.append(self.pv[i])
            rv.append(self.rv[i])
            sl.append(self.sl[i])
        return _Knots(xs, pv, rv, sl)


def _same(a: float, b: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= TOL


def _to_knots(f: PiecewiseLinear) -> _Knots:
    xs, pv, rv, sl = [], [], [], []
    for i, (x, y, s) in enumerate(f.segments):
        if i == 0:
            point = 0.0 if f.role == MINPLUS else y
        else:
            px, py, ps = f.segments[i - 1]
            point = py + ps * (x - px) if f.role == MINPLUS else y
        xs.append(x)
        pv.append(point)
        rv.append(y)
        sl.append(s)
    if f.inf_at is not None:
        if f.segments:
            left = f._seg_value(len(f.segments) - 1, f.inf_at)
        else:
            left = 0.0
        xs.append(f.inf_at)
        pv.append(left if f.role == MINPLUS else INF)
        rv.append(INF)
        sl.append(0.0)
    return _Knots(xs, pv, rv, sl)


def _from_knots(k: _Knots, role: str) -> PiecewiseLinear:
    k = k.simplify()
    segs = []
    inf_at = None
    for i, x in enumerate(k.xs):
        r = k.rv[i]
        if math.isinf(r) or (role == MAXPLUS and math.isinf(k.pv[i])):
            if r < 0:
                raise CurveError("result takes -inf inside the domain")
            inf_at = x
            break
        segs.append([x, max(r, 0.0), max(k.sl[i], 0.0)])
    # clamp float drift that would produce tiny downward jumps
    for i in range(1, len(segs)):
        px, py, ps = segs[i - 1]
        left = py + ps * (segs[i][0] - px)
        if segs[i][1] < left:
            segs[i][1] = left
    return PiecewiseLinear(role, tuple(map(tuple, segs)), inf_at)


def canonical(f: PiecewiseLinear) -> PiecewiseLinear:
    """Merge colinear segments and near-coincident breakpoints."""
    return _from_knots(_to_knots(f), f.role)


# ----------------------------------------------------------------------
# pointwise operations
# ----------------------------------------------------------------------

def _merge_xs(a: Sequence[float], b: Sequence[float]) -> list[float]:
    out = []
    for x in sorted(set(a) | set(b)):
        if out and x - out[-1] <= MERGE_TOL:
            continue
        out.append(x)
    return out


def _value_op(op: str, a: float, b: float) -> float:
    if op == "min":
        return min(a, b)
    if op == "max":
        return max(a, b)
    if op == "add":
        return a + b
    # "sub": difference; equal infinities compare as equal
    if math.isinf(a) and math.isinf(b) and a == b:
        return 0.0
    return a - b


def _combine(a: _Knots, b: _Knots, op: str) -> _Knots:
    xs = _merge_xs(a.xs, b.xs)
    out_x, out_p, out_r, out_s = [], [], [], []
    for k, x in enumerate(xs):
        pa, ra, sa = a.locate(x)
        pb, rb, sb = b.locate(x)
        v = _value_op(op, pa, pb)
        r = _value_op(op, ra, rb)
        if op in ("add", "sub"):
            s = 0.0 if math.isinf(r) else (sa + sb if op == "add" else sa - sb)
            out_x.append(x); out_p.append(v); out_r.append(r); out_s.append(s)
            continue
        a_wins = _wins(op, ra, sa, rb, sb)
        s_win = sa if a_wins else sb
        out_x.append(x); out_p.append(v); out_r.append(r)
        out_s.append(0.0 if math.isinf(r) else s_win)
        if math.isinf(ra) or math.isinf(rb) or sa == sb:
            continue
        cross = x + (rb - ra) / (sa - sb)
        end = xs[k + 1] if k + 1 < len(xs) else INF
        if x + MERGE_TOL < cross < end - MERGE_TOL:
            cv = ra + sa * (cross - x)
            out_x.append(cross); out_p.append(cv); out_r.append(cv)
            out_s.append(sb if a_wins else sa)
    return _Knots(out_x, out_p, out_r, out_s).simplify()


def _wins(op: str, ra: float, sa: float, rb: float, sb: float) -> bool:
    """Whether ``a`` realizes ``op`` just right of the current knot."""
    if op == "min":
        if ra < rb - TOL or (math.isinf(rb) and not math.isinf(ra)):
            return True
        if rb < ra - TOL or (math.isinf(ra) and not math.isinf(rb)):
            return False
        return sa <= sb
    if ra > rb + TOL or (math.isinf(ra) and ra > 0) or (math.isinf(rb) and rb < 0):
        return True
    if rb > ra + TOL or (math.isinf(rb) and rb > 0) or (math.isinf(ra) and ra < 0):
        return False
    return sa >= sb


def _check_roles(f: PiecewiseLinear, g: PiecewiseLinear) -> str:
    if f.role != g.role:
        raise CurveError(f"role mismatch: {f.role} vs {g.role}")
    return f.role


def pointwise_min(f: PiecewiseLinear, g: PiecewiseLinear) -> PiecewiseLinear:
    role = _check_roles(f, g)
    return _from_knots(_combine(_to_knots(f), _to_knots(g), "min"), role)


def pointwise_max(f: PiecewiseLinear, g: PiecewiseLinear) -> PiecewiseLinear:
    role = _check_roles(f, g)
    return _from_knots(_combine(_to_knots(f), _to_knots(g), "max"), role)


def pointwise_add(f: PiecewiseLinear, g: PiecewiseLinear) -> PiecewiseLinear:
    role = _check_roles(f, g)
    return _from_knots(_combine(_to_knots(f), _to_knots(g), "add"), role)


def curve_sum(curves: Iterable[PiecewiseLinear], role: str = MINPLUS) -> PiecewiseLinear:
    total = zero(role)
    for c in curves:
        total = pointwise_add(total, c)
    return total


def subtract_clip(f: PiecewiseLinear, amount: float) -> PiecewiseLinear:
    """``[f(t) - amount]^+`` for a min-plus curve (kept at 0 for ``t <= 0``)."""
    if f.role != MINPLUS:
        raise CurveError("subtract_clip expects a minplus curve")
    k = _to_knots(f)
    shifted = _Knots(list(k.xs), [v - amount for v in k.pv],
                     [v - amount for v in k.rv], list(k.sl))
    clipped = _combine(shifted, _Knots.constant(0.0), "max")
    clipped.pv[0] = 0.0
    return _from_knots(clipped, MINPLUS)


def shift_right(f: PiecewiseLinear, T: float) -> PiecewiseLinear:
    """Min-plus curve delayed by ``T``: ``f(t - T)`` (0 before ``T``)."""
    if f.role != MINPLUS or T < 0:
        raise CurveError("shift_right expects a minplus curve and T >= 0")
    if T == 0:
        return f
    segs = [(0.0, 0.0, 0.0)] + [(x + T, y, s) for x, y, s in f.segments]
    if segs[1][1] == 0.0 and segs[1][2] == 0.0:
        del segs[1]
    inf_at = None if f.inf_at is None else f.inf_at + T
    return minplus(segs, inf_at)


# ----------------------------------------------------------------------
# gap analysis
# ----------------------------------------------------------------------

def first_violation(upper: PiecewiseLinear, lower: PiecewiseLinear,
                    tol: float = TOL, horizon: float | None = None) -> float | None:
    """Smallest ``t >= 0`` with ``lower(t) > upper(t) + tol``, or ``None``.

    Decided exactly from the breakpoint structure; the tail is handled by its
    slope.  With ``horizon`` the search is restricted to ``[0, horizon]``.
    """
    _check_roles(upper, lower)
    gap = _combine(_to_knots(upper), _to_knots(lower), "sub")
    n = len(gap.xs)
    for i, x in enumerate(gap.xs):
        if horizon is not None and x > horizon:
            return None
        if gap.pv[i] < -tol:
            return x
        r, s = gap.rv[i], gap.sl[i]
        end = gap.xs[i + 1] if i + 1 < n else INF
        if horizon is not None:
            end = min(end, horizon)
        length = end - x
        if length <= 0 or math.isinf(r) and r > 0:
            continue
        if r < -tol:
            if s <= 0:
                dt = min(length / 2, 1.0) if math.isfinite(length) else 1.0
            else:
                dt = min(length / 2, (-tol - r) / (2 * s))
            return x + dt
        if s < 0:
            reach = (-tol - r) / s  # zero of gap + tol, measured from x
            if reach < length:
                if math.isinf(length):
                    return x + 1.0 if r + s < -tol else x + reach + 1.0
                if i + 1 < n and end == gap.xs[i + 1] and gap.pv[i + 1] < -tol:
                    return end  # report the failing breakpoint itself
                return x + (reach + length) / 2
    return None


def margin_samples(upper: PiecewiseLinear, lower: PiecewiseLinear) -> list[tuple[float, float]]:
    """``upper - lower`` at every merged breakpoint (point values)."""
    gap = _combine(_to_knots(upper), _to_knots(lower), "sub")
    return [(x, v) for x, v in zip(gap.xs, gap.pv)]


# ----------------------------------------------------------------------
# pseudo-inverses
# ----------------------------------------------------------------------

def _graph_path(f: PiecewiseLinear):
    """Completed graph of ``f`` from the origin as a monotone polyline.

    Jumps become vertical pieces.  Returns (vertices, ray) where ray is the
    direction (dx, dy) of the final unbounded piece.
    """
    verts = [(0.0, 0.0)]

    def add(p):
        q = verts[-1]
        if abs(p[0] - q[0]) > MERGE_TOL or abs(p[1] - q[1]) > MERGE_TOL:
            verts.append(p)

    for i, (x, y, s) in enumerate(f.segments):
        left = 0.0 if i == 0 else f._seg_value(i - 1, x)
        add((x, left))
        add((x, y))
    if f.inf_at is not None:
        left = f._seg_value(len(f.segments) - 1, f.inf_at) if f.segments else 0.0
        add((f.inf_at, left))
        return verts, (0.0, 1.0)
    return verts, (1.0, f.segments[-1][2])


def _from_path(verts, ray, role: str) -> PiecewiseLinear:
    groups: list[list[float]] = []
    for x, y in verts:
        if groups and abs(x - groups[-1][0]) <= MERGE_TOL:
            groups[-1][2] = y
        else:
            groups.append([x, y, y])
    groups[0][0] = 0.0
    vertical = ray[0] == 0.0
    last = len(groups) - 1
    xs, pv, rv, sl = [], [], [], []
    for k, (x, lo, hi) in enumerate(groups):
        xs.append(x)
        if vertical and k == last:
            pv.append(lo if role == MINPLUS else INF)
            rv.append(INF)
            sl.append(0.0)
            break
        pv.append(lo if role == MINPLUS else hi)
        if k == 0 and role == MINPLUS:
            pv[-1] = 0.0
        rv.append(hi)
        if k < last:
            nx, nlo, _ = groups[k + 1]
            sl.append((nlo - hi) / (nx - x))
        else:
            sl.append(ray[1] / ray[0])
    return _from_knots(_Knots(xs, pv, rv, sl), role)


def lower_pseudo_inverse(f: PiecewiseLinear) -> PiecewiseLinear:
    """``f↓(y) = inf{x | f(x) >= y}``; max-plus input, min-plus result."""
    if f.role != MAXPLUS:
        raise CurveError("lower_pseudo_inverse maps a maxplus curve to a minplus curve")
    verts, ray = _graph_path(f)
    return _from_path(*_swap_ray(verts, ray), MINPLUS)


def upper_pseudo_inverse(f: PiecewiseLinear) -> PiecewiseLinear:
    """``f↑(y) = sup{x | f(x) <= y}``; min-plus input, max-plus result."""
    if f.role != MINPLUS:
        raise CurveError("upper_pseudo_inverse maps a minplus curve to a maxplus curve")
    verts, ray = _graph_path(f)
    return _from_path(*_swap_ray(verts, ray), MAXPLUS)


def _swap_ray(verts, ray):
    swapped = [(y, x) for x, y in verts]
    dx, dy = ray
    if dx == 0.0:
        return swapped, (1.0, 0.0)
    if dy == 0.0:
        return swapped, (0.0, 1.0)
    return swapped, (1.0, dx / dy)


# ----------------------------------------------------------------------
# convolutions
# ----------------------------------------------------------------------

def _pieces(f: PiecewiseLinear, mode: str):
    """Decompose ``f`` into affine pieces on closed intervals.

    ``f`` equals the min (mode "min") or max (mode "max") of the pieces, each
    extended by the neutral element outside its interval.
    """
    out = []
    if mode == "min":
        out.append((0.0, 0.0, 0.0, 0.0))
    segs = f.segments
    for i, (x, y, s) in enumerate(segs):
        if i + 1 < len(segs):
            end = segs[i + 1][0]
        elif f.inf_at is not None:
            end = f.inf_at
        else:
            end = INF
        out.append((x, end, y, s))
    if mode == "max" and f.inf_at is not None:
        out.append((f.inf_at, INF, INF, 0.0))
    return out


def _piece_conv_knots(p, q, mode: str) -> _Knots:
    neutral = INF if mode == "min" else -INF
    a = p[0] + q[0]
    v = p[2] + q[2]
    parts = [(p[1] - p[0], p[3]), (q[1] - q[0], q[3])]
    parts.sort(key=lambda t: t[1], reverse=(mode == "max"))
    parts = [t for t in parts if t[0] > 0]
    xs, pv, rv, sl = [], [], [], []
    if a > MERGE_TOL:
        xs.append(0.0); pv.append(neutral); rv.append(neutral); sl.append(0.0)
    else:
        a = 0.0
    x = a
    if math.isinf(v):
        xs.append(x); pv.append(v); rv.append(v); sl.append(0.0)
        return _Knots(xs, pv, rv, sl)
    for length, s in parts:
        xs.append(x); pv.append(v); rv.append(v); sl.append(s)
        if math.isinf(length):
            return _Knots(xs, pv, rv, sl)
        x += length
        v += s * length
    xs.append(x); pv.append(v); rv.append(neutral); sl.append(0.0)
    return _Knots(xs, pv, rv, sl)


def _envelope_conv(f: PiecewiseLinear, g: PiecewiseLinear, mode: str) -> _Knots:
    level = [_piece_conv_knots(p, q, mode) for p in _pieces(f, mode) for q in _pieces(g, mode)]
    # balanced fold keeps long step curves near n log n
    while len(level) > 1:
        nxt = [_combine(a, b, mode) for a, b in zip(level[::2], level[1::2])]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def minplus_conv(f: PiecewiseLinear, g: PiecewiseLinear) -> PiecewiseLinear:
    """``(f ⊗ g)(t) = inf_{0<=s<=t} f(s) + g(t - s)`` for min-plus curves."""
    if f.role != MINPLUS or g.role != MINPLUS:
        raise CurveError("minplus_conv expects minplus curves")
    env = _envelope_conv(f, g, "min")
    env.pv[0] = 0.0
    return _from_knots(env, MINPLUS)


def maxplus_conv(f: PiecewiseLinear, g: PiecewiseLinear) -> PiecewiseLinear:
    """``(f ⊗̄ g)(v) = sup_{0<=k<=v} f(k) + g(v - k)`` for max-plus curves."""
    if f.role != MAXPLUS or g.role != MAXPLUS:
        raise CurveError("maxplus_conv expects maxplus curves")
    return _from_knots(_envelope_conv(f, g, "max"), MAXPLUS)
