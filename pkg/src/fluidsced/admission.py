"""Schedulability tests for a flow set at a link with a strict service curve."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .curves import link_curve
from .plf import (MINPLUS, TOL, CurveError, PiecewiseLinear, curve_sum, first_violation,
                  margin_samples, minplus_conv, subtract_clip)


@dataclass(frozen=True)
class FlowSpec:
    id: str
    service: PiecewiseLinear
    envelope: PiecewiseLinear | None = None
    max_packet: float = 0.0

    def __post_init__(self):
        for name in ("service", "envelope"):
            c = getattr(self, name)
            if c is not None and c.role != MINPLUS:
                raise CurveError(f"flow {self.id}: {name} must be a minplus curve")
        if self.max_packet < 0:
            raise ValueError("max_packet must be nonnegative")


@dataclass(frozen=True)
class AdmissionVerdict:
    admitted: bool
    witness_t: float | None = None
    margin: tuple[tuple[float, float], ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {"admitted": self.admitted, "witness_t": self.witness_t,
                "margin": [list(m) for m in self.margin]}


def _decide(demand: PiecewiseLinear, capacity: PiecewiseLinear, tol: float) -> AdmissionVerdict:
    witness = first_violation(capacity, demand, tol=tol)
    return AdmissionVerdict(witness is None, witness, tuple(margin_samples(capacity, demand)))


def _envelope_demand(flows: Sequence[FlowSpec]) -> PiecewiseLinear:
    missing = [f.id for f in flows if f.envelope is None]
    if missing:
        raise ValueError(f"flows {missing} carry no envelope; use schedulable_curve_only")
    return curve_sum(minplus_conv(f.envelope, f.service) for f in flows)


def schedulable_sufficient(flows: Sequence[FlowSpec], C: PiecewiseLinear, l_max: float = 0.0,
                           tol: float = TOL) -> AdmissionVerdict:
    """Admit iff ``sum_j E_j ⊗ S_j(t) <= [C(t) - l_max]^+`` for all ``t >= 0``."""
    return _decide(_envelope_demand(flows), subtract_clip(C, l_max), tol)


def schedulable_curve_only(curves: Sequence[PiecewiseLinear], C: PiecewiseLinear,
                           l_max: float = 0.0, tol: float = TOL) -> AdmissionVerdict:
    """Envelope-free test ``sum_j S_j(t) <= [C(t) - l_max]^+``."""
    return _decide(curve_sum(curves), subtract_clip(C, l_max), tol)


def necessary_condition(flows: Sequence[FlowSpec], c: float, tol: float = TOL) -> AdmissionVerdict:
    """``sum_j E_j ⊗ S_j(t) <= c t``; failing it rules out the guarantees at an exact-rate link."""
    return _decide(_envelope_demand(flows), link_curve(c), tol)
