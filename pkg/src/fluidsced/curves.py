"""Constructors for the named service curves and envelopes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .plf import (MAXPLUS, MINPLUS, CurveError, PiecewiseLinear, delta,
                  lower_pseudo_inverse, maxplus, minplus, pointwise_max)


@dataclass(frozen=True)
class ConvexSegmentSpec:
    """One segment ``[v / rate - offset]^+`` of a convex max-plus curve."""
    rate: float
    offset: float = 0.0

    def __post_init__(self):
        if not self.rate > 0:
            raise CurveError("segment rate must be positive")
        if self.offset < 0:
            raise CurveError("segment offset must be nonnegative")


@dataclass(frozen=True)
class TokenBucketSpec:
    rate: float
    burst: float = 0.0

    def __post_init__(self):
        if not self.rate > 0:
            raise CurveError("token bucket rate must be positive")
        if self.burst < 0:
            raise CurveError("token bucket burst must be nonnegative")


def delay_curve(d: float) -> PiecewiseLinear:
    """Max-plus delay guarantee: ``gamma(v) = d``."""
    if d < 0:
        raise CurveError("delay must be nonnegative")
    return PiecewiseLinear(MAXPLUS, ((0.0, float(d), 0.0),))


def rate_curve(R: float) -> PiecewiseLinear:
    """Max-plus rate guarantee: ``gamma(v) = v / R``."""
    return latency_rate_curve(R, 0.0)


def latency_rate_curve(R: float, d: float) -> PiecewiseLinear:
    """Max-plus latency-rate guarantee: ``gamma(v) = v / R + d``."""
    if not R > 0:
        raise CurveError("rate must be positive")
    if d < 0:
        raise CurveError("delay must be nonnegative")
    return PiecewiseLinear(MAXPLUS, ((0.0, float(d), 1.0 / R),))


def segment_curve(seg: ConvexSegmentSpec) -> PiecewiseLinear:
    """``[v / r - e]^+`` as a max-plus curve."""
    if seg.offset == 0:
        return rate_curve(seg.rate)
    return maxplus([(0.0, 0.0, 0.0), (seg.offset * seg.rate, 0.0, 1.0 / seg.rate)])


def validate_convex_segments(segments: Sequence[ConvexSegmentSpec]) -> None:
    if not segments:
        raise CurveError("at least one convex segment is required")
    for a, b in zip(segments, segments[1:]):
        if not (a.offset < b.offset and a.rate < b.rate):
            raise CurveError("convex segments need strictly increasing offsets and rates")


def convex_curve(segments: Sequence[ConvexSegmentSpec]) -> PiecewiseLinear:
    """``gamma(v) = max_i [v / r_i - e_i]^+``."""
    validate_convex_segments(segments)
    out = segment_curve(segments[0])
    for seg in segments[1:]:
        out = pointwise_max(out, segment_curve(seg))
    return out


def token_bucket_envelope(spec: TokenBucketSpec) -> tuple[PiecewiseLinear, PiecewiseLinear]:
    """Return ``(E, lam)``: min-plus ``E(t) = b + r t`` (t > 0) and its max-plus dual.

    ``lam(v) = [v / r - b / r]^+`` and ``E = lam↓``.
    """
    lam = segment_curve(ConvexSegmentSpec(spec.rate, spec.burst / spec.rate))
    return lower_pseudo_inverse(lam), lam


def link_curve(c: float) -> PiecewiseLinear:
    """Constant-rate link ``C(t) = c t``."""
    if not c > 0:
        raise CurveError("link rate must be positive")
    return PiecewiseLinear(MINPLUS, ((0.0, 0.0, float(c)),))


def rate_latency_service(R: float, T: float = 0.0) -> PiecewiseLinear:
    """Min-plus ``S(t) = R [t - T]^+``."""
    if not R > 0 or T < 0:
        raise CurveError("need R > 0 and T >= 0")
    if T == 0:
        return link_curve(R)
    return minplus([(0.0, 0.0, 0.0), (T, 0.0, R)])


def delay_element(T: float) -> PiecewiseLinear:
    return delta(T)


def from_spec(obj: dict) -> PiecewiseLinear:
    """Expand a named-curve JSON object or pass a serialized curve through.

    Accepted kinds: ``delay`` (d), ``rate`` (R), ``latency_rate`` (R, d),
    ``convex`` (segments: [[r, e], ...]), ``token_bucket`` (r, b, form:
    "minplus" or "maxplus"), ``link`` (c), ``rate_latency`` (R, T).
    """
    if "kind" not in obj:
        return PiecewiseLinear.from_dict(obj)
    kind = obj["kind"]
    params = {k: v for k, v in obj.items() if k != "kind"}

    def take(*names, optional=()):
        unknown = set(params) - set(names) - set(optional)
        if unknown:
            raise CurveError(f"unknown fields for {kind!r}: {sorted(unknown)}")
        missing = [n for n in names if n not in params]
        if missing:
            raise CurveError(f"missing fields for {kind!r}: {missing}")
        return [params[n] for n in names]

    if kind == "delay":
        (d,) = take("d")
        return delay_curve(d)
    if kind == "rate":
        (R,) = take("R")
        return rate_curve(R)
    if kind == "latency_rate":
        R, d = take("R", "d")
        return latency_rate_curve(R, d)
    if kind == "convex":
        (segs,) = take("segments")
        return convex_curve([ConvexSegmentSpec(float(r), float(e)) for r, e in segs])
    if kind == "token_bucket":
        r, b = take("r", "b", optional=("form",))
        E, lam = token_bucket_envelope(TokenBucketSpec(r, b))
        return lam if params.get("form", MINPLUS) == MAXPLUS else E
    if kind == "link":
        (c,) = take("c")
        return link_curve(c)
    if kind == "rate_latency":
        R, T = take("R", "T")
        return rate_latency_service(R, T)
    raise CurveError(f"unknown curve kind {kind!r}")
