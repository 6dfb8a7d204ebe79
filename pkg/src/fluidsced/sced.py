"""Deadline assignment for fluid-flow SCED.

The reference assignment is the max-plus convolution of a flow's arrival-time
function with its max-plus service curve (:func:`deadline_oracle`).  The
engines below compute the same deadlines online, keeping only busy-period
state, for rate, latency-rate and piecewise-linear convex curves, plus token
bucket release times and the packet-level VirtualClock recursion.

Busy periods come from one of two sources.  When driven by the simulator the
caller passes ``backlogged`` on every arrival (actual backlog of the flow).
When used standalone, each rate recursion assumes a virtual server that
releases every bit exactly at its deadline, so a busy period ends once the
last assigned deadline is not later than the next arrival.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .curves import ConvexSegmentSpec, TokenBucketSpec, latency_rate_curve, validate_convex_segments
from .plf import (INF, MAXPLUS, MERGE_TOL, PiecewiseLinear, maxplus_conv,
                  pointwise_max)

#: backlog below this many bits counts as empty
BACKLOG_TOL = 1e-9


class StreamError(ValueError):
    pass


@dataclass(frozen=True)
class ArrivalStream:
    """Chunk arrivals ``(time, amount)`` of one flow.

    ``packet_sizes`` optionally splits the bits into packets; packet
    boundaries must coincide with chunk boundaries (a chunk may carry several
    packets).
    """
    events: tuple[tuple[float, float], ...]
    packet_sizes: tuple[float, ...] | None = None

    def __post_init__(self):
        events = tuple((float(t), float(a)) for t, a in self.events)
        object.__setattr__(self, "events", events)
        last = 0.0
        for t, a in events:
            if t < 0 or not math.isfinite(t):
                raise StreamError("arrival times must be finite and nonnegative")
            if t < last:
                raise StreamError("arrival times must be nondecreasing")
            if not a > 0:
                raise StreamError("arrival amounts must be positive")
            last = t
        if self.packet_sizes is not None:
            sizes = tuple(float(s) for s in self.packet_sizes)
            object.__setattr__(self, "packet_sizes", sizes)
            if any(not s > 0 for s in sizes):
                raise StreamError("packet sizes must be positive")
            if abs(sum(sizes) - self.total) > 1e-9 * max(1.0, self.total):
                raise StreamError("packet sizes must add up to the arrived bits")
            self._packet_groups()  # alignment check

    @classmethod
    def from_packets(cls, packets: Iterable[tuple[float, float]]) -> "ArrivalStream":
        packets = list(packets)
        return cls(tuple(packets), tuple(size for _, size in packets))

    @property
    def total(self) -> float:
        return sum(a for _, a in self.events)

    def boundaries(self) -> list[float]:
        """Cumulative bit value at the start of every chunk, plus the total."""
        out = [0.0]
        for _, a in self.events:
            out.append(out[-1] + a)
        return out

    def _packet_groups(self) -> list[list[float]]:
        groups, it, acc = [], iter(self.packet_sizes), 0.0
        for _, a in self.events:
            sizes = []
            while acc < a - 1e-9:
                try:
                    s = next(it)
                except StopIteration:
                    raise StreamError("packet sizes run out before the arrivals") from None
                sizes.append(s)
                acc += s
            if abs(acc - a) > 1e-9:
                raise StreamError("packet boundaries must align with arrival chunks")
            acc = 0.0
            groups.append(sizes)
        return groups

    def packets(self) -> list[tuple[float, float]]:
        """``(arrival time, size)`` per packet; each chunk is one packet if unsplit."""
        if self.packet_sizes is None:
            return list(self.events)
        out = []
        for (t, _), sizes in zip(self.events, self._packet_groups()):
            out.extend((t, s) for s in sizes)
        return out

    def arrival_times(self) -> PiecewiseLinear:
        """Space-domain arrivals ``T_A`` (max-plus, ``+inf`` past the last bit)."""
        segs: list[tuple[float, float, float]] = []
        nu = 0.0
        for t, a in self.events:
            if segs and segs[-1][1] == t:
                nu += a
                continue
            segs.append((nu, t, 0.0))
            nu += a
        return PiecewiseLinear(MAXPLUS, tuple(segs), nu)

    def arrivals(self) -> PiecewiseLinear:
        """Time-domain arrivals ``A(t)``: bits arrived in ``[0, t)``."""
        segs = [(0.0, 0.0, 0.0)]
        nu = 0.0
        for t, a in self.events:
            nu += a
            if segs[-1][0] == t:
                segs[-1] = (t, nu, 0.0)
            else:
                segs.append((t, nu, 0.0))
        return PiecewiseLinear("minplus", tuple(segs))


@dataclass(frozen=True)
class DeadlineSegment:
    """Affine deadlines ``deadline_start + slope * (v - nu_start)`` on ``[nu_start, nu_end)``."""
    nu_start: float
    nu_end: float
    deadline_start: float
    slope: float

    @property
    def deadline_end(self) -> float:
        """Left limit of the deadline at ``nu_end``."""
        return self.deadline_start + self.slope * (self.nu_end - self.nu_start)

    def at(self, nu: float) -> float:
        return self.deadline_start + self.slope * (nu - self.nu_start)


@dataclass(frozen=True)
class DeadlineTrace:
    segments: tuple[DeadlineSegment, ...]
    packet_deadlines: tuple[float, ...] | None = None
    kind: str = "deadline"
    _starts: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "_starts", tuple(s.nu_start for s in self.segments))

    @property
    def total(self) -> float:
        return self.segments[-1].nu_end if self.segments else 0.0

    def at(self, nu: float) -> float:
        """Deadline of bit ``nu`` (``+inf`` past the last arrived bit)."""
        if nu < 0:
            return -INF
        if nu >= self.total:
            return INF
        return self.segments[bisect.bisect_right(self._starts, nu) - 1].at(nu)

    def left_at(self, nu: float) -> float:
        """Deadline just below bit ``nu``."""
        if nu <= 0:
            return -INF
        i = bisect.bisect_left(self._starts, nu) - 1
        return self.segments[min(i, len(self.segments) - 1)].at(nu)

    def as_curve(self) -> PiecewiseLinear:
        """The deadline function as a max-plus curve over the arrived bits."""
        if not self.segments:
            return PiecewiseLinear(MAXPLUS, (), 0.0)
        from .plf import maxplus
        return maxplus([(s.nu_start, s.deadline_start, s.slope) for s in self.segments],
                       inf_at=self.total)

    def rows(self) -> list[tuple[float, float, float, float]]:
        return [(s.nu_start, s.nu_end, s.deadline_start, s.slope) for s in self.segments]


def trace_from_curve(curve: PiecewiseLinear, boundaries: Sequence[float],
                     kind: str = "deadline") -> DeadlineTrace:
    """Cut a max-plus deadline curve into per-chunk affine segments."""
    cuts = sorted(set(boundaries[:-1]) | {x for x in curve.breakpoints if x < boundaries[-1]})
    merged: list[float] = []
    for x in cuts:
        if merged and x - merged[-1] <= MERGE_TOL:
            continue
        merged.append(x)
    segs = []
    for i, a in enumerate(merged):
        b = merged[i + 1] if i + 1 < len(merged) else boundaries[-1]
        if b - a <= MERGE_TOL:
            continue
        segs.append(DeadlineSegment(a, b, curve.right_limit(a), _slope_at(curve, a)))
    return DeadlineTrace(tuple(segs), kind=kind)


def _slope_at(curve: PiecewiseLinear, x: float) -> float:
    i = bisect.bisect_right(curve._xs, x) - 1
    return curve.segments[i][2]


def deadline_oracle(stream: ArrivalStream, gamma: PiecewiseLinear) -> DeadlineTrace:
    """Reference deadlines ``Dl = T_A ⊗̄ gamma`` via exact max-plus convolution."""
    if gamma.role != MAXPLUS:
        raise ValueError("gamma must be a maxplus curve")
    if not stream.events:
        return DeadlineTrace(())
    dl = maxplus_conv(stream.arrival_times(), gamma)
    return trace_from_curve(dl, stream.boundaries())


# ----------------------------------------------------------------------
# online engines
# ----------------------------------------------------------------------

@dataclass
class BusyPeriodState:
    index: int
    start_time: float
    first_bit: float
    prior_deadline: float
    bits_in_period: float = 0.0


class RateDeadlineEngine:
    """Busy-period recursion for ``gamma(v) = v / R`` (plus a constant delay).

    Within the n-th busy period the rate deadline of bit ``v`` is
    ``max(Dl(first^-), start) + (v - first) / R``; ``delay`` is added on output.
    """

    def __init__(self, rate: float, delay: float = 0.0):
        if not rate > 0:
            raise ValueError("rate must be positive")
        if delay < 0:
            raise ValueError("delay must be nonnegative")
        self.rate = float(rate)
        self.delay = float(delay)
        self.nu = 0.0
        self.last_deadline = -INF  # rate deadline just below self.nu
        self.period: BusyPeriodState | None = None
        self.periods: list[BusyPeriodState] = []
        self._base = -INF

    def arrive(self, time: float, amount: float, backlogged: bool | None = None) -> list[DeadlineSegment]:
        if backlogged is None:
            backlogged = self.period is not None and time < self.last_deadline
        if not backlogged or self.period is None:
            self.period = BusyPeriodState(len(self.periods) + 1, time, self.nu, self.last_deadline)
            self.periods.append(self.period)
            self._base = max(self.last_deadline, time)
        start = self._base + (self.nu - self.period.first_bit) / self.rate
        seg = DeadlineSegment(self.nu, self.nu + amount, start + self.delay, 1.0 / self.rate)
        self.nu += amount
        self.period.bits_in_period += amount
        self.last_deadline = start + amount / self.rate
        return [seg]


class ConvexDeadlineEngine:
    """Deadlines for ``gamma(v) = max_i [v / r_i - e_i]^+``.

    Every segment runs its own rate recursion; its deadline is reduced by
    ``e_i`` and floored at the arrival time, and the result is the maximum
    over segments.
    """

    def __init__(self, segments: Sequence[ConvexSegmentSpec], validate: bool = True):
        if validate:
            validate_convex_segments(segments)
        self.segments = list(segments)
        self.engines = [RateDeadlineEngine(s.rate) for s in self.segments]

    def arrive(self, time: float, amount: float, backlogged: bool | None = None) -> list[DeadlineSegment]:
        nu = self.engines[0].nu
        lines = [(time, 0.0)]
        for spec, eng in zip(self.segments, self.engines):
            (seg,) = eng.arrive(time, amount, backlogged)
            lines.append((seg.deadline_start - spec.offset, seg.slope))
        return [DeadlineSegment(nu + a, nu + b, v, s) for a, b, v, s in upper_envelope(lines, amount)]


def upper_envelope(lines: Sequence[tuple[float, float]], length: float):
    """Upper envelope of lines ``v + s u`` on ``[0, length)`` as (a, b, value_at_a, slope)."""
    u = 0.0
    cur = max(lines, key=lambda l: (l[0], l[1]))
    out = []
    while True:
        vcur = cur[0] + cur[1] * u
        best, best_du = None, INF
        for line in lines:
            if line[1] > cur[1]:
                du = (vcur - (line[0] + line[1] * u)) / (line[1] - cur[1])
                if du < best_du or (du == best_du and line[1] > best[1]):
                    best, best_du = line, max(du, 0.0)
        if best is None or u + best_du >= length - MERGE_TOL:
            out.append((u, length, vcur, cur[1]))
            return out
        if best_du > MERGE_TOL:
            out.append((u, u + best_du, vcur, cur[1]))
            u += best_du
        cur = best


class OracleDeadlineEngine:
    """Online exact deadlines for an arbitrary max-plus curve.

    For chunk arrivals ``Dl(v) = max_j t_j + gamma(v - V_j)`` over chunks
    ``j`` that started at bit ``V_j <= v``; busy periods play no role.  The
    maximum is kept as one running curve over the bits still to come.
    """

    def __init__(self, gamma: PiecewiseLinear):
        if gamma.role != MAXPLUS:
            raise ValueError("gamma must be a maxplus curve")
        self.gamma = gamma
        self.nu = 0.0
        self.env: PiecewiseLinear | None = None  # u -> Dl(nu + u) from chunks so far
        self._last_time = -INF

    def arrive(self, time: float, amount: float, backlogged: bool | None = None) -> list[DeadlineSegment]:
        if time != self._last_time:
            # at the same instant the earlier chunk start dominates
            h = _advance(self.gamma, 0.0, time)
            self.env = h if self.env is None else pointwise_max(self.env, h)
            self._last_time = time
        trace = trace_from_curve(self.env, [0.0, amount])
        segs = [DeadlineSegment(self.nu + s.nu_start, self.nu + s.nu_end, s.deadline_start, s.slope)
                for s in trace.segments]
        self.nu += amount
        self.env = _advance(self.env, amount, 0.0)
        return segs


def _advance(gamma: PiecewiseLinear, offset: float, lift: float) -> PiecewiseLinear:
    """``u -> lift + gamma(u + offset)`` as a max-plus curve."""
    if gamma.inf_at is not None and offset >= gamma.inf_at:
        return PiecewiseLinear(MAXPLUS, (), 0.0)
    i = bisect.bisect_right(gamma._xs, offset) - 1
    segs = [(0.0, lift + gamma._seg_value(i, offset), gamma.segments[i][2])]
    segs += [(x - offset, lift + y, s) for x, y, s in gamma.segments[i + 1:]]
    inf_at = None if gamma.inf_at is None else gamma.inf_at - offset
    return PiecewiseLinear(MAXPLUS, tuple(segs), inf_at)


# ----------------------------------------------------------------------
# batch front ends
# ----------------------------------------------------------------------

def _backlog_flags(stream: ArrivalStream, busy_periods: Sequence[float] | None):
    """Per-event ``backlogged`` flags from busy-period start times (None: virtual)."""
    if busy_periods is None:
        return [None] * len(stream.events)
    starts = sorted(float(s) for s in busy_periods)
    times = [t for t, _ in stream.events]
    tset = set(times)
    for s in starts:
        if s not in tset:
            raise StreamError(f"busy period start {s} is not an arrival time")
    if stream.events and (not starts or starts[0] != times[0]):
        raise StreamError("the first arrival must start a busy period")
    flags, pending = [], set(starts)
    for t in times:
        if t in pending:
            flags.append(False)
            pending.discard(t)
        else:
            flags.append(True)
    return flags


def _run(engine, stream: ArrivalStream, busy_periods, kind: str = "deadline") -> DeadlineTrace:
    segs: list[DeadlineSegment] = []
    for (t, a), flag in zip(stream.events, _backlog_flags(stream, busy_periods)):
        segs.extend(engine.arrive(t, a, flag))
    return DeadlineTrace(tuple(segs), kind=kind)


def assign_deadline_rate(stream: ArrivalStream, R: float,
                         busy_periods: Sequence[float] | None = None) -> DeadlineTrace:
    return _run(RateDeadlineEngine(R), stream, busy_periods)


def assign_deadline_latency_rate(stream: ArrivalStream, R: float, d: float,
                                 busy_periods: Sequence[float] | None = None) -> DeadlineTrace:
    return _run(RateDeadlineEngine(R, d), stream, busy_periods)


def assign_deadline_convex(stream: ArrivalStream, segments: Sequence[ConvexSegmentSpec],
                           busy_periods: Sequence[float] | None = None) -> DeadlineTrace:
    return _run(ConvexDeadlineEngine(segments), stream, busy_periods)


def shaper_release(stream: ArrivalStream, spec: TokenBucketSpec,
                   busy_periods: Sequence[float] | None = None) -> DeadlineTrace:
    """Token-bucket release times ``rl = T_A ⊗̄ lam`` via the convex recursion."""
    engine = ConvexDeadlineEngine([ConvexSegmentSpec(spec.rate, spec.burst / spec.rate)])
    return _run(engine, stream, busy_periods, kind="release")


def packet_deadlines_virtualclock(packets: Sequence[tuple[float, float]], R: float) -> DeadlineTrace:
    """``Dl_p(n) = max(Dl_p(n-1), T_p(n)) + l_n / R`` with ``Dl_p(0) = -inf``."""
    if not R > 0:
        raise ValueError("rate must be positive")
    prev, last_t, nu = -INF, 0.0, 0.0
    dls, segs = [], []
    for t, size in packets:
        if t < last_t:
            raise StreamError("packet arrival times must be nondecreasing")
        last_t = t
        prev = max(prev, t) + size / R
        dls.append(prev)
        segs.append(DeadlineSegment(nu, nu + size, prev, 0.0))
        nu += size
    return DeadlineTrace(tuple(segs), tuple(dls), kind="packet")


def virtual_busy_periods(stream: ArrivalStream, R: float) -> list[tuple[float, float]]:
    """``(start time, first bit)`` of each busy period under the virtual server."""
    eng = RateDeadlineEngine(R)
    for t, a in stream.events:
        eng.arrive(t, a)
    return [(p.start_time, p.first_bit) for p in eng.periods]


def brute_force_sup(stream: ArrivalStream, gamma: PiecewiseLinear, nu: float,
                    kappa_max: float | None = None) -> float:
    """``sup_{0 <= k <= min(nu, kappa_max)} T_A(k) + gamma(nu - k)`` by enumeration.

    ``T_A`` is constant on each chunk and ``gamma`` nondecreasing, so the
    supremum over a chunk is attained at its first bit (or at ``kappa_max``).
    """
    hi = nu if kappa_max is None else min(nu, kappa_max)
    best = -INF
    v = 0.0
    for t, a in stream.events:
        if v > hi:
            break
        best = max(best, t + gamma(nu - v))
        v += a
    return best


def packet_dominance_gaps(packets: Sequence[tuple[float, float]], R: float) -> dict[str, float]:
    """Largest violations of the packet/fluid deadline relations on one instance.

    Returns the supremum over packets ``n`` and bits ``v`` of packet ``n`` of

    * ``adjusted_minus_packet``: ``Dl'(v) - Dl_p(n)`` with ``gamma'(v) = (v + l_max)/R``
    * ``fluid_minus_packet_start``: ``Dl(v) - (Dl_p(n) - l_n / R)``
    * ``packet_minus_adjusted``: ``Dl_p(n) - Dl'(v)``
    * ``packet_minus_fluid_end``: ``|Dl_p(n) - Dl(L_n^-)|``
    """
    stream = ArrivalStream.from_packets(packets)
    lmax = max(size for _, size in packets)
    vc = packet_deadlines_virtualclock(packets, R)
    fluid = deadline_oracle(stream, latency_rate_curve(R, 0.0))
    adjusted = deadline_oracle(stream, latency_rate_curve(R, lmax / R))
    gaps = dict.fromkeys(["adjusted_minus_packet", "fluid_minus_packet_start",
                          "packet_minus_adjusted", "packet_minus_fluid_end"], -INF)
    lo = 0.0
    for (t, size), dlp in zip(packets, vc.packet_deadlines):
        hi = lo + size
        # deadlines are nondecreasing: extremes sit at the packet's first bit and last-bit limit
        gaps["adjusted_minus_packet"] = max(gaps["adjusted_minus_packet"], adjusted.left_at(hi) - dlp)
        gaps["fluid_minus_packet_start"] = max(gaps["fluid_minus_packet_start"],
                                               fluid.left_at(hi) - (dlp - size / R))
        gaps["packet_minus_adjusted"] = max(gaps["packet_minus_adjusted"], dlp - adjusted.at(lo))
        gaps["packet_minus_fluid_end"] = max(gaps["packet_minus_fluid_end"], abs(dlp - fluid.left_at(hi)))
        lo = hi
    return gaps
