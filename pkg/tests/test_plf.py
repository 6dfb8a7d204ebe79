import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fluidsced.curves import link_curve, rate_latency_service, token_bucket_envelope, TokenBucketSpec
from fluidsced.plf import (INF, MAXPLUS, MINPLUS, CurveError, PiecewiseLinear, canonical, curve_sum,
                           delta, first_violation, lower_pseudo_inverse, maxplus, maxplus_conv, minplus,
                           minplus_conv, pointwise_add, pointwise_max, pointwise_min, shift_right,
                           subtract_clip, upper_pseudo_inverse)
from fluidsced.testing import (duality_pairs, grid_gap, grid_maxplus_conv, grid_minplus_conv,
                               random_curve, scan_lower_inverse, scan_upper_inverse)

seeds = st.integers(0, 2**32 - 1)


def step(role, at=1.0, height=5.0):
    return PiecewiseLinear(role, ((0.0, 0.0, 0.0), (at, height, 0.0)))


def check_role(f):
    assert f.segments[0][0] == 0.0
    xs = [s[0] for s in f.segments]
    assert xs == sorted(set(xs))
    assert all(s[2] >= 0 for s in f.segments)
    if f.role == MINPLUS:
        assert f(0.0) == 0.0 and f(-1.0) == 0.0
    else:
        assert f(-1e-9) == -INF and f(0.0) >= 0
    grid = np.linspace(0, 30, 3001)
    vals = f.evaluate(grid)
    assert np.all(np.diff(vals[np.isfinite(vals)]) >= -1e-9)


# evaluation ------------------------------------------------------------

def test_eval_affine():
    assert link_curve(2.0)(5.0) == 10.0


def test_eval_left_continuous_jump():
    f = step(MINPLUS)
    assert f(1.0) == 0.0
    assert f(1.0 + 1e-12) == 5.0


def test_eval_right_continuous_jump():
    f = step(MAXPLUS)
    assert f(1.0) == 5.0
    assert f(1.0 - 1e-12) == 0.0


def test_maxplus_pre_domain():
    assert step(MAXPLUS)(-1.0) == -INF
    assert step(MINPLUS)(-1.0) == 0.0


def test_evaluate_vectorized_matches_scalar(rng):
    for _ in range(20):
        f = random_curve(rng, MINPLUS if rng.random() < 0.5 else MAXPLUS)
        xs = rng.uniform(-1, 15, 200)
        assert np.allclose(f.evaluate(xs), [f(x) for x in xs], equal_nan=False)


def test_delta_identity_values():
    d = delta(0.0)
    assert d(0.0) == 0.0 and d(1e-9) == INF
    d3 = delta(3.0)
    assert d3(3.0) == 0.0 and d3(3.0 + 1e-9) == INF


# validation ------------------------------------------------------------

@pytest.mark.parametrize("segs", [
    ((1.0, 0.0, 1.0),),                      # does not start at 0
    ((0.0, 0.0, 1.0), (0.0, 1.0, 1.0)),      # repeated breakpoint
    ((0.0, 0.0, -1.0),),                     # decreasing
    ((0.0, 5.0, 0.0), (1.0, 2.0, 0.0)),      # downward jump
])
def test_invalid_segments_rejected(segs):
    with pytest.raises(CurveError):
        PiecewiseLinear(MINPLUS, segs)


def test_unknown_role_rejected():
    with pytest.raises(CurveError):
        PiecewiseLinear("sideways", ((0.0, 0.0, 1.0),))


def test_minplus_must_start_at_zero_value():
    with pytest.raises(CurveError):
        PiecewiseLinear(MINPLUS, ((0.0, -1.0, 1.0),))


# serialization ---------------------------------------------------------

def test_json_round_trip(rng):
    for _ in range(30):
        f = random_curve(rng, MAXPLUS)
        g = PiecewiseLinear.from_dict(json.loads(json.dumps(f.to_dict())))
        assert g == f


def test_json_round_trip_infinite():
    d = delta(2.0)
    assert PiecewiseLinear.from_dict(json.loads(json.dumps(d.to_dict()))) == d


def test_from_dict_rejects_unknown_fields():
    with pytest.raises(CurveError):
        PiecewiseLinear.from_dict({"role": "minplus", "segments": [[0, 0, 1]], "colour": 1})


# convolution -----------------------------------------------------------

def test_minplus_conv_rates():
    c = minplus_conv(link_curve(2.0), link_curve(3.0))
    assert c(5.0) == pytest.approx(10.0)
    assert c.isclose(link_curve(2.0))


def test_minplus_conv_delta_identity(rng):
    for _ in range(20):
        g = random_curve(rng, MINPLUS)
        assert minplus_conv(delta(0.0), g).isclose(canonical(g))


def test_minplus_conv_delay_shifts(rng):
    g = random_curve(rng, MINPLUS)
    assert minplus_conv(delta(2.0), g).isclose(shift_right(g, 2.0))


def test_token_bucket_rate_latency_point():
    E, _ = token_bucket_envelope(TokenBucketSpec(1.0, 2.0))
    S = rate_latency_service(2.0, 1.0)
    exact = minplus_conv(E, S)(2.0)
    assert exact == pytest.approx(2.0)
    assert exact == pytest.approx(grid_minplus_conv(E, S, 2.0, 1e-4), abs=1e-3)


def test_maxplus_conv_with_constant_delay(rng):
    for _ in range(10):
        TA = random_curve(rng, MAXPLUS)
        d = float(rng.uniform(0, 4))
        gamma = maxplus([(0.0, d, 0.0)])
        got = maxplus_conv(TA, gamma)
        xs = np.linspace(0, 12, 500)
        assert np.allclose(got.evaluate(xs), TA.evaluate(xs) + d)


def test_maxplus_conv_rate_then_delay():
    g = maxplus_conv(maxplus([(0.0, 0.0, 0.5)]), maxplus([(0.0, 3.0, 0.0)]))
    assert g.isclose(maxplus([(0.0, 3.0, 0.5)]))


@given(seeds)
def test_convolution_commutes(seed):
    rng = np.random.default_rng(seed)
    role = MINPLUS if rng.random() < 0.5 else MAXPLUS
    f, g = random_curve(rng, role, 5), random_curve(rng, role, 5)
    conv = minplus_conv if role == MINPLUS else maxplus_conv
    assert conv(f, g).isclose(conv(g, f))


@given(seeds)
def test_convolution_associates(seed):
    rng = np.random.default_rng(seed)
    role = MINPLUS if rng.random() < 0.5 else MAXPLUS
    f, g, h = (random_curve(rng, role, 4) for _ in range(3))
    conv = minplus_conv if role == MINPLUS else maxplus_conv
    grid = np.linspace(0, 30, 3001)
    assert grid_gap(conv(conv(f, g), h), conv(f, conv(g, h)), grid) <= 1e-9


@given(seeds)
def test_convolution_matches_grid(seed):
    rng = np.random.default_rng(seed)
    f, g = random_curve(rng, MINPLUS, 4), random_curve(rng, MINPLUS, 4)
    t = float(rng.uniform(0.5, 12))
    sums = [a + b for a in f.breakpoints for b in g.breakpoints]
    if any(abs(s - t) < 1e-3 for s in sums):
        return
    step_ = 1e-3
    lip = max(s for *_, s in f.segments) + max(s for *_, s in g.segments)
    assert abs(minplus_conv(f, g)(t) - grid_minplus_conv(f, g, t, step_)) <= 1e-6 + step_ * lip


@given(seeds)
def test_role_closure(seed):
    rng = np.random.default_rng(seed)
    F, G = random_curve(rng, MINPLUS), random_curve(rng, MINPLUS)
    Ft, Gt = random_curve(rng, MAXPLUS), random_curve(rng, MAXPLUS)
    for f in (minplus_conv(F, G), pointwise_min(F, G), pointwise_max(F, G), pointwise_add(F, G),
              maxplus_conv(Ft, Gt), pointwise_min(Ft, Gt), pointwise_max(Ft, Gt),
              upper_pseudo_inverse(F), lower_pseudo_inverse(Ft)):
        check_role(f)
    assert upper_pseudo_inverse(F).role == MAXPLUS
    assert lower_pseudo_inverse(Ft).role == MINPLUS


# pointwise operations --------------------------------------------------

def test_pointwise_min_rates():
    assert pointwise_min(link_curve(2.0), link_curve(3.0)).isclose(link_curve(2.0))


def test_pointwise_ops_match_grid(rng):
    grid = np.linspace(0, 20, 2001)
    for _ in range(30):
        f, g = random_curve(rng, MINPLUS), random_curve(rng, MINPLUS)
        assert np.allclose(pointwise_min(f, g).evaluate(grid), np.minimum(f.evaluate(grid), g.evaluate(grid)))
        assert np.allclose(pointwise_max(f, g).evaluate(grid), np.maximum(f.evaluate(grid), g.evaluate(grid)))
        assert np.allclose(pointwise_add(f, g).evaluate(grid), f.evaluate(grid) + g.evaluate(grid))


def test_mixed_roles_rejected():
    with pytest.raises(CurveError):
        pointwise_min(link_curve(1.0), maxplus([(0.0, 0.0, 1.0)]))


def test_curve_sum_and_clip():
    total = curve_sum([link_curve(0.3), link_curve(0.4)])
    assert total(10.0) == pytest.approx(7.0)
    clipped = subtract_clip(link_curve(1.0), 2.0)
    assert clipped(1.0) == 0.0 and clipped(5.0) == pytest.approx(3.0)


# pseudo-inverses -------------------------------------------------------

def test_lower_inverse_linear():
    T = maxplus([(0.0, 0.0, 0.5)])
    assert lower_pseudo_inverse(T)(3.0) == pytest.approx(6.0)


def test_lower_inverse_flat_then_rising():
    F = maxplus([(0.0, 0.0, 0.0), (1.0, 0.0, 5.0)])
    inv = lower_pseudo_inverse(F)
    assert inv(0.0) == 0.0
    for y in (0.5, 2.0, 7.0):
        assert inv(y) == pytest.approx(1 + y / 5)
        assert inv(y) == pytest.approx(scan_lower_inverse(F, y, 10.0), abs=1e-3)


def test_upper_inverse_examples():
    assert upper_pseudo_inverse(link_curve(2.0))(4.0) == pytest.approx(2.0)
    S = rate_latency_service(2.0, 1.0)
    inv = upper_pseudo_inverse(S)
    assert inv(0.0) == pytest.approx(1.0) and inv(2.0) == pytest.approx(2.0)
    assert inv(2.0) == pytest.approx(scan_upper_inverse(S, 2.0, 10.0), abs=1e-3)
    assert upper_pseudo_inverse(step(MINPLUS))(3.0) == pytest.approx(1.0)


@given(seeds)
def test_duality_identities(seed):
    rng = np.random.default_rng(seed)
    F, G = random_curve(rng, MINPLUS), random_curve(rng, MINPLUS)
    Ft, Gt = random_curve(rng, MAXPLUS), random_curve(rng, MAXPLUS)
    grid = np.arange(0.0, 40.0, 1e-2)
    for name, lhs, rhs in duality_pairs(F, G, Ft, Gt):
        assert grid_gap(lhs, rhs, grid) <= 1e-9, name
        assert lhs.isclose(canonical(rhs)), name


def test_upper_inverse_of_delta_is_constant():
    inv = upper_pseudo_inverse(delta(3.0))
    assert inv.role == MAXPLUS and inv(0.0) == pytest.approx(3.0) and inv(100.0) == pytest.approx(3.0)


def test_pseudo_inverse_role_preconditions():
    with pytest.raises(CurveError):
        lower_pseudo_inverse(link_curve(1.0))
    with pytest.raises(CurveError):
        upper_pseudo_inverse(maxplus([(0.0, 0.0, 1.0)]))


# gap analysis ----------------------------------------------------------

def test_first_violation_none_when_dominated():
    assert first_violation(link_curve(2.0), link_curve(1.0)) is None


def test_first_violation_tail_slope():
    w = first_violation(link_curve(1.0), minplus([(0.0, 0.0, 0.5), (4.0, 2.0, 2.0)]))
    assert w is not None and w > 4.0
    assert minplus([(0.0, 0.0, 0.5), (4.0, 2.0, 2.0)])(w) > w


def test_first_violation_horizon():
    lower = minplus([(0.0, 0.0, 0.5), (10.0, 5.0, 2.0)])
    assert first_violation(link_curve(1.0), lower, horizon=9.0) is None
    assert first_violation(link_curve(1.0), lower) is not None


def test_first_violation_finds_jump():
    lower = minplus([(0.0, 0.0, 0.0), (2.0, 3.0, 0.0)])
    w = first_violation(link_curve(1.0), lower)
    assert 2.0 < w < 3.0
    assert lower(w) > w
    assert math.isfinite(w)
