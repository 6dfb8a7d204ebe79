"""Event-driven simulation of a work-conserving SCED link.

Two service disciplines are supported:

``packet``
    Non-preemptive EDF.  When the link frees up it starts the pending packet
    whose first bit has the earliest deadline (ties: flow order, then arrival
    order) and transmits it to completion.  Bits leave progressively at the
    link rate.
``fluid``
    Preemptive fluid EDF.  Pending bits are served strictly in deadline
    order; flows whose head bits share a deadline level are served
    simultaneously so that the level rises uniformly.

Deadlines are assigned online by the :mod:`fluidsced.sced` engines in coupled
mode, i.e. busy periods follow the simulated backlog of each flow.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .admission import FlowSpec
from .curves import delay_curve, link_curve
from .plf import (INF, MINPLUS, TOL, PiecewiseLinear, first_violation, minplus,
                  minplus_conv, pointwise_min, upper_pseudo_inverse, _combine, _to_knots)
from .sced import (BACKLOG_TOL, ArrivalStream, DeadlineSegment, DeadlineTrace,
                   OracleDeadlineEngine, RateDeadlineEngine)

PACKET = "packet"
FLUID = "fluid"

#: departures later than the deadline by at most this much are not violations
VIOLATION_TOL = 1e-9


class ConfigError(ValueError):
    pass


# ----------------------------------------------------------------------
# link
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class LinkModel:
    """Constant-rate or piecewise-constant-rate link.

    ``profile`` lists ``(t_start, rate)`` with the first entry at ``t = 0``.
    ``strict_curve`` defaults to ``c t`` (constant rate) or to the minimum
    profile rate.
    """
    rate: float | None = None
    profile: tuple[tuple[float, float], ...] | None = None
    strict_curve: PiecewiseLinear | None = None

    def __post_init__(self):
        if (self.rate is None) == (self.profile is None):
            raise ConfigError("specify exactly one of rate or profile")
        if self.rate is not None:
            if not self.rate > 0:
                raise ConfigError("link rate must be positive")
            prof = ((0.0, float(self.rate)),)
        else:
            prof = tuple((float(t), float(r)) for t, r in self.profile)
            if not prof or prof[0][0] != 0.0:
                raise ConfigError("rate profile must start at t = 0")
            for (a, ra), (b, _) in zip(prof, prof[1:]):
                if b <= a:
                    raise ConfigError("rate profile times must increase")
            if any(not r > 0 for _, r in prof):
                raise ConfigError("profile rates must be positive")
        object.__setattr__(self, "profile", prof)
        if self.strict_curve is None:
            object.__setattr__(self, "strict_curve", link_curve(min(r for _, r in prof)))
        elif self.strict_curve.role != MINPLUS:
            raise ConfigError("strict service curve must be a minplus curve")

    @property
    def constant(self) -> bool:
        return len(self.profile) == 1

    def change_points(self) -> list[float]:
        return [t for t, _ in self.profile[1:]]

    def _index(self, t: float) -> int:
        i = 0
        while i + 1 < len(self.profile) and self.profile[i + 1][0] <= t:
            i += 1
        return i

    def rate_at(self, t: float) -> float:
        return self.profile[self._index(t)][1]

    def work(self, s: float, t: float) -> float:
        """Transmission capacity in ``(s, t]``."""
        if t <= s:
            return 0.0
        total, i = 0.0, self._index(s)
        a = s
        while a < t:
            b = self.profile[i + 1][0] if i + 1 < len(self.profile) else INF
            b = min(b, t)
            total += self.profile[i][1] * (b - a)
            a, i = b, i + 1
        return total

    def finish(self, s: float, w: float) -> float:
        """Earliest time by which ``w`` bits are transmitted starting at ``s``."""
        i, a = self._index(s), s
        while True:
            rate = self.profile[i][1]
            b = self.profile[i + 1][0] if i + 1 < len(self.profile) else INF
            if a + w / rate <= b:
                return a + w / rate
            w -= rate * (b - a)
            a, i = b, i + 1

    def validate(self, horizon: float, points: int = 200, tol: float = 1e-9) -> None:
        """Check ``work(s, t) >= C(t - s)`` on a sliding grid over ``[0, horizon]``."""
        grid = np.unique(np.concatenate([np.linspace(0.0, horizon, points),
                                         [t for t in self.change_points() if t <= horizon]]))
        cum = np.array([self.work(0.0, t) for t in grid])
        for i, s in enumerate(grid):
            need = self.strict_curve.evaluate(grid[i:] - s)
            # the strict curve must hold arbitrarily close to the window's right end
            got = cum[i:] - cum[i]
            bad = np.nonzero(got < need - tol)[0]
            if bad.size:
                t = float(grid[i + bad[0]])
                raise ConfigError(f"rate profile violates the strict curve on ({s:g}, {t:g}]")


# ----------------------------------------------------------------------
# configuration and report
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SimFlow:
    spec: FlowSpec
    stream: ArrivalStream
    gamma: PiecewiseLinear | None = None  # defaults to spec.service↑

    def service_gamma(self) -> PiecewiseLinear:
        return self.gamma if self.gamma is not None else upper_pseudo_inverse(self.spec.service)


@dataclass(frozen=True)
class SimConfig:
    flows: tuple[SimFlow, ...]
    link: LinkModel
    scheduling: str = PACKET
    horizon: float = 100.0
    seed: int = 0
    tolerance: float = VIOLATION_TOL
    deadline_mode: str = "oracle"

    def __post_init__(self):
        object.__setattr__(self, "flows", tuple(self.flows))
        if self.deadline_mode not in ("oracle", "coupled"):
            raise ConfigError(f"unknown deadline mode {self.deadline_mode!r}")
        if self.scheduling not in (PACKET, FLUID):
            raise ConfigError(f"unknown scheduling {self.scheduling!r}")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if self.scheduling == PACKET and any(f.stream.packet_sizes is None for f in self.flows):
            raise ConfigError("packet scheduling needs packet boundaries on every stream")
        ids = [f.spec.id for f in self.flows]
        if len(set(ids)) != len(ids):
            raise ConfigError("flow ids must be unique")

    @property
    def l_max(self) -> float:
        if self.scheduling == FLUID:
            return 0.0
        sizes = [s for f in self.flows for _, s in f.stream.packets()]
        return max(sizes, default=0.0)


@dataclass
class Violation:
    flow: str
    nu: float
    deadline: float
    departure: float
    t_star: float | None = None
    residual: float | None = None

    def to_dict(self) -> dict:
        return {"flow": self.flow, "nu": self.nu, "deadline": self.deadline,
                "departure": _json_num(self.departure), "t_star": self.t_star,
                "residual": self.residual}


@dataclass
class FlowReport:
    id: str
    arrivals: PiecewiseLinear
    departures: PiecewiseLinear
    deadlines: DeadlineTrace
    service_ok: bool
    service_witness: float | None
    max_wait: float
    pending_at_horizon: float
    violations: list[Violation] = field(default_factory=list)

    def departure_times(self) -> PiecewiseLinear:
        return upper_pseudo_inverse(self.departures)


@dataclass
class SimReport:
    scheduling: str
    horizon: float
    l_max: float
    flows: list[FlowReport]
    transmissions: list[tuple[str, float, float, float]]
    backlog: list[tuple[float, tuple[float, ...]]]

    @property
    def violations(self) -> list[Violation]:
        return [v for f in self.flows for v in f.violations]

    @property
    def service_ok(self) -> bool:
        return all(f.service_ok for f in self.flows)

    def to_dict(self) -> dict:
        return {
            "scheduling": self.scheduling,
            "horizon": self.horizon,
            "l_max": self.l_max,
            "violation_count": len(self.violations),
            "service_curves_verified": self.service_ok,
            "flows": [{
                "id": f.id,
                "service_ok": f.service_ok,
                "service_witness": f.service_witness,
                "max_wait": _json_num(f.max_wait),
                "pending_at_horizon": f.pending_at_horizon,
                "departures": f.departures.to_dict(),
                "deadlines": [list(r) for r in f.deadlines.rows()],
                "violations": [v.to_dict() for v in f.violations],
            } for f in self.flows],
            "transmissions": [list(t) for t in self.transmissions],
        }

    def timeseries_rows(self) -> list[tuple]:
        """``(time, flow, arrivals, departures, backlog)`` at every event time."""
        rows = []
        times = sorted({t for t, _ in self.backlog})
        for t in times:
            for f in self.flows:
                a = f.arrivals.right_limit(t)
                d = f.departures(t)
                rows.append((t, f.id, a, d, a - d))
        return rows


def _json_num(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


# ----------------------------------------------------------------------
# engine selection
# ----------------------------------------------------------------------

def make_engine(gamma: PiecewiseLinear, mode: str = "oracle"):
    """Deadline engine for one flow.

    ``oracle`` assigns the exact deadlines ``T_A ⊗̄ gamma`` and ignores the
    backlog.  ``coupled`` runs the busy-period recursion on the simulated
    backlog for latency-rate curves (other curves fall back to the oracle);
    with a positive latency that recursion can assign earlier deadlines than
    the oracle once a flow lags its rate deadlines.
    """
    if mode not in ("oracle", "coupled"):
        raise ConfigError(f"unknown deadline mode {mode!r}")
    if mode == "coupled" and gamma.inf_at is None and len(gamma.segments) == 1 and gamma.segments[0][2] > 0:
        _, d, slope = gamma.segments[0]
        return RateDeadlineEngine(1.0 / slope, d)
    return OracleDeadlineEngine(gamma)


# ----------------------------------------------------------------------
# simulation state
# ----------------------------------------------------------------------

class _FlowState:
    def __init__(self, index: int, flow: SimFlow, mode: str):
        self.index = index
        self.id = flow.spec.id
        self.engine = make_engine(flow.service_gamma(), mode)
        self.arrived = 0.0
        self.departed = 0.0
        self.segments: list[DeadlineSegment] = []
        self.vertices: list[tuple[float, float]] = [(0.0, 0.0)]
        self.pending: deque[list[float]] = deque()  # fluid: [nu, nu_end, deadline, slope]

    def mark(self, t: float) -> None:
        """Record the current departure level at time ``t``."""
        last_t, last_d = self.vertices[-1]
        if abs(self.departed - last_d) <= 1e-15:
            return
        if t - last_t <= 1e-15:
            self.vertices[-1] = (last_t, self.departed)
        else:
            self.vertices.append((t, self.departed))

    def hold(self, t: float) -> None:
        """Pin the current departure level at time ``t`` (before service resumes)."""
        last_t, last_d = self.vertices[-1]
        if t > last_t + 1e-15:
            self.vertices.append((t, last_d))

    def departure_curve(self) -> PiecewiseLinear:
        verts = self.vertices
        segs = []
        for (ta, da), (tb, db) in zip(verts, verts[1:]):
            if tb - ta <= 1e-15:
                continue
            segs.append((ta, da, max(0.0, (db - da) / (tb - ta))))
        segs.append((verts[-1][0], verts[-1][1], 0.0))
        if segs[0][0] != 0.0:
            segs.insert(0, (0.0, 0.0, 0.0))
        return minplus(segs)


def _arrival_queue(config: SimConfig):
    """Chronological arrivals ``(time, flow_index, seq, amount, packet_sizes)``."""
    out = []
    for j, f in enumerate(config.flows):
        groups = f.stream._packet_groups() if config.scheduling == PACKET else None
        for k, (t, a) in enumerate(f.stream.events):
            if t > config.horizon:
                break
            sizes = groups[k] if groups is not None else [a]
            out.append((t, j, k, a, sizes))
    out.sort(key=lambda e: (e[0], e[1], e[2]))
    return out


def run(config: SimConfig) -> SimReport:
    """Simulate ``config`` up to its horizon and evaluate every flow."""
    link = config.link
    if not link.constant:
        link.validate(config.horizon)
    flows = [_FlowState(j, f, config.deadline_mode) for j, f in enumerate(config.flows)]
    arrivals = _arrival_queue(config)
    if config.scheduling == PACKET:
        transmissions, event_times = _run_packet(config, flows, arrivals)
    else:
        transmissions, event_times = _run_fluid(config, flows, arrivals)
    return _report(config, flows, transmissions, event_times)


def _assign(fs: _FlowState, t: float, amount: float, backlog: float) -> list[DeadlineSegment]:
    segs = fs.engine.arrive(t, amount, backlog > BACKLOG_TOL)
    fs.segments.extend(segs)
    fs.arrived += amount
    return segs


def _deadline_in(segs: Sequence[DeadlineSegment], nu: float) -> float:
    for s in segs:
        if s.nu_start - 1e-12 <= nu < s.nu_end:
            return s.at(nu)
    return segs[-1].at(nu)


def _run_packet(config, flows, arrivals):
    link, horizon = config.link, config.horizon
    heap: list = []
    busy = None  # (flow_state, size, start, finish, departed_before)
    transmissions = []
    event_times = {0.0}
    counter = 0
    i = 0

    def departed_now(fs, t):
        if busy is not None and busy[0] is fs:
            return busy[4] + min(busy[1], link.work(busy[2], t))
        return fs.departed

    def start(t):
        nonlocal busy
        if busy is not None or not heap or t > horizon:
            return
        _, _, _, fs, size = heapq.heappop(heap)
        finish = link.finish(t, size)
        fs.hold(t)
        busy = (fs, size, t, finish, fs.departed)

    while True:
        next_arr = arrivals[i][0] if i < len(arrivals) else INF
        if busy is not None and busy[3] <= next_arr and busy[3] <= horizon:
            fs, size, s, f, before = busy
            _mark_profile(fs, link, s, f, before)
            fs.departed = before + size
            fs.mark(f)
            transmissions.append((fs.id, s, f, size))
            event_times.add(f)
            busy = None
            start(f)
            continue
        if next_arr == INF or next_arr > horizon:
            break
        t = next_arr
        event_times.add(t)
        while i < len(arrivals) and arrivals[i][0] == t:
            _, j, k, amount, sizes = arrivals[i]
            fs = flows[j]
            backlog = fs.arrived - departed_now(fs, t)
            nu0 = fs.arrived
            segs = _assign(fs, t, amount, backlog)
            off = nu0
            for size in sizes:
                heapq.heappush(heap, (_deadline_in(segs, off), j, counter, fs, size))
                counter += 1
                off += size
            i += 1
        start(t)
    if busy is not None:
        fs, size, s, f, before = busy
        done = min(size, link.work(s, horizon))
        _mark_profile(fs, link, s, horizon, before)
        fs.departed = before + done
        fs.mark(horizon)
        transmissions.append((fs.id, s, f, size))
    event_times.add(horizon)
    return transmissions, sorted(event_times)


def _mark_profile(fs: _FlowState, link: LinkModel, s: float, f: float, before: float) -> None:
    """Add departure vertices where the link rate changes inside ``(s, f)``."""
    for c in link.change_points():
        if s < c < f:
            fs.departed = before + link.work(s, c)
            fs.mark(c)


def _run_fluid(config, flows, arrivals):
    link, horizon = config.link, config.horizon
    transmissions = []
    times = sorted({t for t, *_ in arrivals} | {c for c in link.change_points() if c < horizon}
                   | {horizon})
    event_times = set(times) | {0.0}
    by_time: dict[float, list] = {}
    for e in arrivals:
        by_time.setdefault(e[0], []).append(e)
    now = 0.0
    for t in times:
        if t > now:
            transmissions.extend(_serve_fluid(flows, link, now, t, event_times))
            now = t
        for _, j, k, amount, _sizes in by_time.get(t, ()):
            fs = flows[j]
            segs = _assign(fs, t, amount, fs.arrived - fs.departed)
            for s in segs:
                fs.pending.append([s.nu_start, s.nu_end, s.deadline_start, s.slope])
    return transmissions, sorted(event_times)


def _serve_fluid(flows, link, t0, t1, event_times):
    """Serve pending bits in deadline order during ``[t0, t1)`` (constant rate)."""
    rate = link.rate_at(t0)
    now = t0
    log = []
    while now < t1 - 1e-15:
        heads = [(fs.pending[0][2], fs.index, fs) for fs in flows if fs.pending]
        if not heads:
            break
        level = min(h[0] for h in heads)
        active = [fs for d, _, fs in sorted(heads, key=lambda h: (h[0], h[1])) if d <= level + 1e-12]
        budget = rate * (t1 - now)
        atoms = [fs for fs in active if fs.pending[0][3] == 0.0]
        if atoms:
            fs = atoms[0]
            seg = fs.pending[0]
            amount = min(seg[1] - seg[0], budget)
            served = {fs: amount}
        else:
            dens = {fs: 1.0 / fs.pending[0][3] for fs in active}
            total_dens = sum(dens.values())
            nxt = INF
            for fs in active:
                seg = fs.pending[0]
                nxt = min(nxt, seg[2] + seg[3] * (seg[1] - seg[0]))
            for d, _, fs in heads:
                if d > level + 1e-12:
                    nxt = min(nxt, d)
            dx = min(nxt - level, budget / total_dens)
            served = {fs: dens[fs] * dx for fs in active}
        bits = sum(served.values())
        if bits <= 0:
            break
        end = now + bits / rate
        for fs, amount in served.items():
            fs.hold(now)
            seg = fs.pending[0]
            seg[2] += seg[3] * amount
            seg[0] += amount
            fs.departed += amount
            if seg[1] - seg[0] <= 1e-12:
                fs.departed += seg[1] - seg[0]
                fs.pending.popleft()
            fs.mark(end)
            log.append((fs.id, now, end, amount))
        event_times.add(end)
        now = end
    return log


# ----------------------------------------------------------------------
# evaluation
# ----------------------------------------------------------------------

def verify_service_curve(A: PiecewiseLinear, D: PiecewiseLinear, S: PiecewiseLinear,
                         horizon: float | None = None, tol: float = 1e-9) -> tuple[bool, float | None]:
    """Check ``D(t) >= A ⊗ S(t)`` at all breakpoints and in the tail; return (ok, witness)."""
    w = first_violation(D, minplus_conv(A, S), tol=tol, horizon=horizon)
    return w is None, w


def _negative_regions(upper: PiecewiseLinear, lower: PiecewiseLinear, tol: float):
    """Bit ranges ``[a, b)`` where ``lower > upper + tol`` (scan of the gap knots)."""
    gap = _combine(_to_knots(upper), _to_knots(lower), "sub")
    regions = []
    cur = None
    n = len(gap.xs)
    for i, x in enumerate(gap.xs):
        end = gap.xs[i + 1] if i + 1 < n else INF
        r, s = gap.rv[i], gap.sl[i]
        pieces = []
        if gap.pv[i] < -tol:
            pieces.append((x, x))
        if math.isinf(r):
            if r < 0:
                pieces.append((x, end))
        else:
            lo, hi = x, end
            if s > 0:
                hi = min(end, x + (-tol - r) / s) if r < -tol else x
            elif s < 0:
                lo = max(x, x + (-tol - r) / s) if r >= -tol else x
            elif r >= -tol:
                hi = x
            if hi > lo:
                pieces.append((lo, hi))
        for a, b in pieces:
            if cur is not None and a <= cur[1] + 1e-12:
                cur[1] = max(cur[1], b)
            else:
                if cur is not None:
                    regions.append(tuple(cur))
                cur = [a, b]
    if cur is not None:
        regions.append(tuple(cur))
    return regions


def _report(config, flows, transmissions, event_times) -> SimReport:
    horizon = config.horizon
    reports = []
    departures = {}
    for fs, flow in zip(flows, config.flows):
        fs.mark(horizon)
        departures[fs.id] = fs.departure_curve()
    traces = {fs.id: DeadlineTrace(tuple(fs.segments)) for fs in flows}
    for fs, flow in zip(flows, config.flows):
        A = _arrivals_until(flow.stream, horizon)
        D = departures[fs.id]
        trace = traces[fs.id]
        ok, witness = verify_service_curve(A, D, flow.spec.service, horizon=horizon,
                                           tol=max(config.tolerance, 1e-9))
        violations = []
        max_wait = 0.0
        if trace.segments:
            TD = upper_pseudo_inverse(D)
            dl = trace.as_curve()
            clipped = pointwise_min(TD, delay_curve(horizon))
            for a, b in _negative_regions(dl, clipped, config.tolerance):
                nu = a if a < trace.total else trace.total
                violations.append(Violation(fs.id, nu, trace.at(nu), TD(nu)))
            max_wait = _max_wait(TD, _arrival_times_until(flow.stream, horizon), fs.departed)
        reports.append(FlowReport(fs.id, A, D, trace, ok, witness, max_wait,
                                  max(0.0, fs.arrived - fs.departed), violations))
    report = SimReport(config.scheduling, horizon, config.l_max, reports, transmissions,
                       _backlog_series(flows, reports, event_times))
    _diagnose(config, report, traces, departures)
    return report


def _arrivals_until(stream: ArrivalStream, horizon: float) -> PiecewiseLinear:
    events = tuple(e for e in stream.events if e[0] <= horizon)
    return ArrivalStream(events).arrivals()


def _arrival_times_until(stream: ArrivalStream, horizon: float) -> PiecewiseLinear:
    events = tuple(e for e in stream.events if e[0] <= horizon)
    return ArrivalStream(events).arrival_times()


def _max_wait(TD: PiecewiseLinear, TA: PiecewiseLinear, departed: float) -> float:
    """Largest ``T_D - T_A`` over departed bits, from one-sided limits between breakpoints."""
    if departed <= 0:
        return 0.0
    pts = []
    for x in sorted({x for x in TD.breakpoints + TA.breakpoints if 0 < x < departed} | {0.0, departed}):
        if not pts or x - pts[-1] > 1e-9:
            pts.append(x)
    best = 0.0
    for a, b in zip(pts, pts[1:]):
        eps = min(1e-10, (b - a) / 4)
        for x in (a + eps, b - eps):
            best = max(best, TD(x) - TA(x))
    return best


def _backlog_series(flows, reports, event_times):
    out = []
    for t in event_times:
        out.append((t, tuple(r.arrivals.right_limit(t) - r.departures(t) for r in reports)))
    return out


def _diagnose(config, report: SimReport, traces, departures) -> None:
    """Attach the last sub-deadline idle time and the residual packet to violations."""
    if not report.violations:
        return
    reports = report.flows
    cand = np.array(sorted({t for t, _ in report.backlog} | {s for _, s, _, _ in report.transmissions}))
    arr = {r.id: r.arrivals.evaluate(cand) for r in reports}
    dep = {r.id: departures[r.id].evaluate(cand) for r in reports}
    for v in report.violations:
        level = v.deadline + 1e-9
        backlog = np.zeros_like(cand)
        for r in reports:
            q = _bits_before(traces[r.id], level)
            backlog += np.maximum(0.0, np.minimum(arr[r.id], q) - np.minimum(dep[r.id], q))
        idle = np.nonzero((backlog <= BACKLOG_TOL) & (cand <= level))[0]
        t_star = float(cand[idle[-1]]) if idle.size else 0.0
        v.t_star = t_star
        residual = 0.0
        if config.scheduling == PACKET:
            for fid, s, f, size in report.transmissions:
                if s <= t_star < f:
                    residual = size - config.link.work(s, t_star)
        v.residual = residual


def _bits_before(trace: DeadlineTrace, level: float) -> float:
    """``sup{v | Dl(v) < level}`` over the arrived bits."""
    out = 0.0
    for s in trace.segments:
        if s.deadline_start >= level:
            break
        if s.slope > 0:
            out = min(s.nu_end, s.nu_start + (level - s.deadline_start) / s.slope)
        else:
            out = s.nu_end
        if out < s.nu_end:
            break
    return out


# ----------------------------------------------------------------------
# traffic generators
# ----------------------------------------------------------------------

def saturating_arrivals(envelope: PiecewiseLinear, horizon: float, delta: float = 0.01,
                        packet_size: float | None = None) -> ArrivalStream:
    """Greedy stream that sends ``delta``-bit chunks as soon as ``envelope`` allows.

    With ``packet_size`` the initial burst is cut into packets of at most that
    size (chunks must then not exceed it).
    """
    if envelope.role != MINPLUS:
        raise ValueError("envelope must be a minplus curve")
    if packet_size is not None and delta > packet_size + 1e-12:
        raise ValueError("chunks larger than the packet size")
    inv = upper_pseudo_inverse(envelope)
    events = []
    burst = envelope.right_limit(0.0)
    if burst > 0:
        events.append((0.0, burst))
    nu = burst
    while True:
        t = inv.left_limit(nu + delta)
        if not math.isfinite(t) or t > horizon:
            break
        if events and events[-1][0] == t:
            events[-1] = (t, events[-1][1] + delta)
        else:
            events.append((t, delta))
        nu += delta
    if packet_size is None:
        return ArrivalStream(tuple(events))
    packets = []
    for t, a in events:
        n = max(1, math.ceil(a / packet_size - 1e-9))
        packets.extend((t, a / n) for _ in range(n))
    return ArrivalStream.from_packets(packets)


def conforming_arrivals(envelope: PiecewiseLinear, horizon: float, rng: np.random.Generator,
                        packet_range: tuple[float, float] = (0.2, 1.0),
                        mean_gap: float = 1.0, slack: float = 1e-9) -> ArrivalStream:
    """Random packet arrivals that conform to ``envelope``.

    Candidate arrivals are drawn with exponential gaps; a candidate that would
    break ``E(s) >= A(t + s) - A(t)`` on some window starting at an earlier
    arrival is pushed back to the earliest conforming time.
    """
    inv = upper_pseudo_inverse(envelope)
    burst = envelope.right_limit(0.0)
    lo, hi = packet_range
    if hi > burst:
        raise ValueError("packets larger than the envelope burst never conform")
    times: list[float] = []
    sizes: list[float] = []
    t = float(rng.exponential(mean_gap)) if rng.random() < 0.5 else 0.0
    while True:
        x = float(rng.uniform(lo, hi))
        earliest = t
        acc = x
        for k in range(len(times) - 1, -1, -1):
            acc += sizes[k]
            need = 0.0 if acc <= burst else inv.left_limit(acc) + slack
            earliest = max(earliest, times[k] + need)
        if earliest > horizon:
            break
        times.append(earliest)
        sizes.append(x)
        t = earliest + (float(rng.exponential(mean_gap)) if rng.random() < 0.7 else 0.0)
    return ArrivalStream.from_packets(zip(times, sizes))


# ----------------------------------------------------------------------
# constrained arrivals
# ----------------------------------------------------------------------

def a_less_t(stream: ArrivalStream, gamma: PiecewiseLinear, t: float, tau: float) -> float:
    """``sup{v | T_A(v) < tau and Dl(v) < t}`` by scanning the oracle deadlines chunk by chunk."""
    from .sced import deadline_oracle
    trace = deadline_oracle(stream, gamma)
    best = 0.0
    nu = 0.0
    segs = iter(trace.segments)
    seg = next(segs, None)
    for time, amount in stream.events:
        if time >= tau:
            break
        end = nu + amount
        while seg is not None and seg.nu_start < end:
            lo, hi = max(seg.nu_start, nu), min(seg.nu_end, end)
            if seg.at(lo) < t:
                # deadlines are nondecreasing, so the admissible set is an initial interval
                if seg.slope > 0:
                    best = max(best, min(hi, lo + (t - seg.at(lo)) / seg.slope))
                else:
                    best = max(best, hi)
            if seg.nu_end <= end:
                seg = next(segs, None)
            else:
                break
        nu = end
    return best
