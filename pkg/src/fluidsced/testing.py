"""Random instance generators and brute-force oracles.

Shared by the test suite and the ``selftest`` subcommand.  The oracles here
never call the exact algorithms they are used to check.
"""

from __future__ import annotations

import numpy as np

from .plf import MAXPLUS, MINPLUS, PiecewiseLinear


def random_curve(rng: np.random.Generator, role: str = MINPLUS, max_breaks: int = 8,
                 span: float = 10.0, max_slope: float = 3.0,
                 jump_prob: float = 0.3) -> PiecewiseLinear:
    """Random nondecreasing PL curve with at most ``max_breaks`` breakpoints."""
    n = int(rng.integers(0, max_breaks + 1))
    xs = np.sort(rng.uniform(0.0, span, size=n))
    xs = [0.0] + [float(x) for x in xs if x > 1e-3]
    segs = []
    y = float(rng.uniform(0, 2)) if rng.random() < jump_prob else 0.0
    for i, x in enumerate(xs):
        if i:
            y = segs[-1][1] + segs[-1][2] * (x - segs[-1][0])
            if rng.random() < jump_prob:
                y += float(rng.uniform(0, 2))
        slope = 0.0 if rng.random() < 0.25 else float(rng.uniform(0.05, max_slope))
        segs.append((x, y, slope))
    if segs[-1][2] == 0.0:
        # keep the tail increasing so pseudo-inverses stay finite
        x, y, _ = segs[-1]
        segs[-1] = (x, y, float(rng.uniform(0.05, max_slope)))
    return PiecewiseLinear(role, tuple(segs))


def grid_minplus_conv(f: PiecewiseLinear, g: PiecewiseLinear, t: float,
                      step: float = 1e-4) -> float:
    """Dense-grid infimum of ``f(s) + g(t - s)`` over ``s in [0, t]``."""
    s = np.linspace(0.0, t, max(2, int(round(t / step)) + 1))
    return float(np.min(f.evaluate(s) + g.evaluate(t - s)))


def grid_maxplus_conv(f: PiecewiseLinear, g: PiecewiseLinear, v: float,
                      step: float = 1e-4) -> float:
    """Dense-grid supremum of ``f(k) + g(v - k)`` over ``k in [0, v]``."""
    k = np.linspace(0.0, v, max(2, int(round(v / step)) + 1))
    return float(np.max(f.evaluate(k) + g.evaluate(v - k)))


def scan_lower_inverse(f: PiecewiseLinear, y: float, xmax: float, step: float = 1e-4) -> float:
    """``inf{x | f(x) >= y}`` by scanning a grid on ``[0, xmax]``."""
    xs = np.arange(0.0, xmax + step, step)
    hit = np.nonzero(f.evaluate(xs) >= y)[0]
    return float(xs[hit[0]]) if hit.size else np.inf


def scan_upper_inverse(f: PiecewiseLinear, y: float, xmax: float, step: float = 1e-4) -> float:
    """``sup{x | f(x) <= y}`` by scanning a grid on ``[0, xmax]``."""
    xs = np.arange(0.0, xmax + step, step)
    ok = np.nonzero(f.evaluate(xs) <= y)[0]
    if not ok.size:
        return -np.inf
    return float(xs[ok[-1]]) if ok[-1] < xs.size - 1 else np.inf


def random_stream_events(rng: np.random.Generator, n_max: int = 25, gap: float = 2.0,
                         amount: float = 3.0) -> list[tuple[float, float]]:
    """Random chunk arrivals: (time, amount) with nondecreasing times."""
    n = int(rng.integers(1, n_max + 1))
    t = 0.0 if rng.random() < 0.5 else float(rng.uniform(0, gap))
    out = []
    for _ in range(n):
        out.append((t, float(rng.uniform(0.05, amount))))
        if rng.random() < 0.15:
            continue  # simultaneous chunk
        t += float(rng.exponential(gap))
    return out


def sample_role(rng: np.random.Generator) -> str:
    return MINPLUS if rng.random() < 0.5 else MAXPLUS


def random_flow_curves(rng: np.random.Generator, l_max: float):
    """Token-bucket envelope and a rate-latency (sometimes two-piece) service curve."""
    from .curves import TokenBucketSpec, rate_latency_service, token_bucket_envelope
    from .plf import pointwise_min
    r = float(rng.uniform(0.05, 0.5))
    b = float(rng.uniform(l_max, 3 * l_max))
    E, _ = token_bucket_envelope(TokenBucketSpec(r, b))
    S = rate_latency_service(float(rng.uniform(0.1, 1.0)), float(rng.uniform(0.0, 6.0)))
    if rng.random() < 0.3:
        S = pointwise_min(S, rate_latency_service(float(rng.uniform(0.05, 0.5)),
                                                  float(rng.uniform(0.0, 3.0))))
    return E, S


def random_admitted_instance(rng: np.random.Generator, c: float = 1.0, max_flows: int = 3,
                             tries: int = 1000):
    """Flow specs passing the sufficient test at ``C(t) = c t`` with a random l_max."""
    from .admission import FlowSpec, schedulable_sufficient
    from .curves import link_curve
    for _ in range(tries):
        l_max = float(rng.uniform(0.2, 1.0))
        n = int(rng.integers(1, max_flows + 1))
        flows = []
        for j in range(n):
            E, S = random_flow_curves(rng, l_max)
            flows.append(FlowSpec(f"f{j}", S, E, l_max))
        if schedulable_sufficient(flows, link_curve(c), l_max).admitted:
            return flows, l_max
    raise RuntimeError("no admitted instance found")


def random_overloaded_instance(rng: np.random.Generator, c: float = 1.0, max_flows: int = 3,
                               tries: int = 1000):
    """Flow specs failing the necessary test at ``C(t) = c t``."""
    from .admission import FlowSpec, necessary_condition
    for _ in range(tries):
        n = int(rng.integers(1, max_flows + 1))
        flows = []
        for j in range(n):
            E, S = random_flow_curves(rng, 0.5)
            flows.append(FlowSpec(f"f{j}", S, E, 0.5))
        if not necessary_condition(flows, c).admitted:
            return flows
    raise RuntimeError("no overloaded instance found")


# ----------------------------------------------------------------------
# reusable checks
# ----------------------------------------------------------------------

def grid_gap(a: PiecewiseLinear, b: PiecewiseLinear, grid: np.ndarray) -> float:
    """Largest pointwise difference on ``grid``; equal infinities count as zero."""
    va, vb = a.evaluate(grid), b.evaluate(grid)
    d = np.where(va == vb, 0.0, np.abs(va - vb))
    return float(np.max(d)) if d.size else 0.0


def duality_pairs(F, G, Ft, Gt):
    """``(name, lhs, rhs)`` for the four mapping identities and both round trips."""
    from .plf import (lower_pseudo_inverse as low, maxplus_conv, minplus_conv, pointwise_max,
                      pointwise_min, upper_pseudo_inverse as up)
    return [
        ("min_to_max", up(pointwise_min(F, G)), pointwise_max(up(F), up(G))),
        ("minconv_to_maxconv", up(minplus_conv(F, G)), maxplus_conv(up(F), up(G))),
        ("max_to_min", low(pointwise_max(Ft, Gt)), pointwise_min(low(Ft), low(Gt))),
        ("maxconv_to_minconv", low(maxplus_conv(Ft, Gt)), minplus_conv(low(Ft), low(Gt))),
        ("roundtrip_minplus", low(up(F)), F),
        ("roundtrip_maxplus", up(low(Ft)), Ft),
    ]


def conv_grid_tolerance(f: PiecewiseLinear, g: PiecewiseLinear, step: float) -> float:
    """Grid-resolution error bound: ``1e-6`` plus one step times the steepest slopes."""
    lip = max((s for _, _, s in f.segments), default=0.0) + max((s for _, _, s in g.segments), default=0.0)
    return 1e-6 + step * lip


def safe_conv_point(rng, f, g, hi: float) -> float:
    """A random evaluation point away from sums of breakpoints (where jumps sit)."""
    sums = np.add.outer(np.array(f.breakpoints), np.array(g.breakpoints)).ravel()
    while True:
        t = float(rng.uniform(0.0, hi))
        if not sums.size or np.min(np.abs(sums - t)) > 1e-3:
            return t


def engine_traces(stream, rng):
    """Specialized engine traces paired with the oracle curve they must reproduce."""
    from .curves import (ConvexSegmentSpec, TokenBucketSpec, convex_curve, latency_rate_curve,
                         rate_curve, token_bucket_envelope)
    from .sced import (assign_deadline_convex, assign_deadline_latency_rate, assign_deadline_rate,
                       shaper_release)
    R = float(rng.uniform(0.2, 3.0))
    d = float(rng.uniform(0.0, 5.0))
    n = int(rng.integers(1, 4))
    rates = np.sort(rng.uniform(0.2, 3.0, size=n))
    offs = np.sort(rng.uniform(0.0, 5.0, size=n))
    segs = [ConvexSegmentSpec(float(r), float(e)) for r, e in zip(rates, offs)]
    if len({s.rate for s in segs}) < n or len({s.offset for s in segs}) < n:
        segs = segs[:1]
    tb = TokenBucketSpec(float(rng.uniform(0.2, 3.0)), float(rng.uniform(0.0, 4.0)))
    return [
        ("rate", assign_deadline_rate(stream, R), rate_curve(R)),
        ("latency_rate", assign_deadline_latency_rate(stream, R, d), latency_rate_curve(R, d)),
        ("convex", assign_deadline_convex(stream, segs), convex_curve(segs)),
        ("shaper", shaper_release(stream, tb), token_bucket_envelope(tb)[1]),
    ]


def trace_sample_points(stream, rng, interior: int = 100) -> list[float]:
    pts = stream.boundaries()[:-1]
    return pts + [float(x) for x in rng.uniform(0.0, stream.total, size=interior)]


def run_selftest(rng: np.random.Generator, count: int = 50):
    """Quick randomized versions of the main properties: ``[(name, passed, detail)]``."""
    from .plf import lower_pseudo_inverse, maxplus_conv, minplus_conv
    from .sced import ArrivalStream, brute_force_sup, deadline_oracle
    from .sim import a_less_t
    results = []

    worst = 0.0
    grid = np.arange(0.0, 40.0, 1e-2)
    for _ in range(count):
        F, G = random_curve(rng, MINPLUS), random_curve(rng, MINPLUS)
        Ft, Gt = random_curve(rng, MAXPLUS), random_curve(rng, MAXPLUS)
        for _, lhs, rhs in duality_pairs(F, G, Ft, Gt):
            worst = max(worst, grid_gap(lhs, rhs, grid))
    results.append(("duality", worst <= 1e-9, f"max gap {worst:.3g}"))

    fails = 0
    for _ in range(count):
        mode = sample_role(rng)
        f, g = random_curve(rng, mode), random_curve(rng, mode)
        t = safe_conv_point(rng, f, g, 15.0)
        if mode == MINPLUS:
            exact, grid_v = minplus_conv(f, g)(t), grid_minplus_conv(f, g, t, 1e-3)
        else:
            exact, grid_v = maxplus_conv(f, g)(t), grid_maxplus_conv(f, g, t, 1e-3)
        fails += abs(exact - grid_v) > conv_grid_tolerance(f, g, 1e-3)
    results.append(("convolution", fails == 0, f"{fails} mismatches"))

    worst = 0.0
    for _ in range(count):
        stream = ArrivalStream(tuple(random_stream_events(rng)))
        pts = trace_sample_points(stream, rng, 20)
        for _, trace, gamma in engine_traces(stream, rng):
            ref = deadline_oracle(stream, gamma)
            worst = max(worst, max(abs(trace.at(x) - ref.at(x)) for x in pts))
        x = pts[-1]
        worst = max(worst, abs(brute_force_sup(stream, gamma, x) - ref.at(x)))
    results.append(("deadline_engines", worst <= 1e-9, f"max error {worst:.3g}"))

    worst = 0.0
    for _ in range(count):
        stream = ArrivalStream(tuple(random_stream_events(rng)))
        gamma = random_curve(rng, MAXPLUS)
        t = float(rng.uniform(0.0, stream.events[-1][0] + 10.0))
        ref = minplus_conv(stream.arrivals(), lower_pseudo_inverse(gamma))(t)
        worst = max(worst, abs(a_less_t(stream, gamma, t, t) - ref))
    results.append(("constrained_arrivals", worst <= 1e-2, f"max error {worst:.3g}"))
    return results
