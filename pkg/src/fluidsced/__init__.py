"""Exact network-calculus algebra, SCED deadline engines, admission tests and a link simulator."""

from .admission import (AdmissionVerdict, FlowSpec, necessary_condition, schedulable_curve_only,
                        schedulable_sufficient)
from .curves import (ConvexSegmentSpec, TokenBucketSpec, convex_curve, delay_curve, from_spec,
                     latency_rate_curve, link_curve, rate_curve, rate_latency_service,
                     token_bucket_envelope)
from .plf import (MAXPLUS, MINPLUS, CurveError, PiecewiseLinear, delta, lower_pseudo_inverse,
                  maxplus_conv, minplus_conv, pointwise_add, pointwise_max, pointwise_min,
                  upper_pseudo_inverse)
from .sced import (ArrivalStream, DeadlineTrace, assign_deadline_convex, assign_deadline_latency_rate,
                   assign_deadline_rate, deadline_oracle, packet_deadlines_virtualclock, shaper_release)
from .sim import (FLUID, PACKET, LinkModel, SimConfig, SimFlow, SimReport, a_less_t,
                  conforming_arrivals, run, saturating_arrivals, verify_service_curve)

__version__ = "0.1.0"
