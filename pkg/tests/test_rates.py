import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tclob.errors import DomainError, ParameterError, RangeError
from tclob.rates import (
    CumulativeClock,
    Form,
    RateSpec,
    cumulative,
    eval_alpha,
    inverse_cumulative,
    parse_alpha_flag,
)


def spec(form, lam=1.0, mu=1.0, origin=None, **params):
    return RateSpec(Form(form), params, lam, mu, origin)


# -- eval_alpha ----------------------------------------------------------

def test_constant_alpha_is_flat():
    assert eval_alpha(spec("constant", c=1.0), 7.3) == 1.0


def test_power_alpha_at_one_is_coefficient():
    # CSCO ask limit-order fit: K = 0.1703, decay 0.4560
    assert eval_alpha(spec("power", K=0.1703, s=-0.4560), 1.0) == pytest.approx(0.1703, rel=1e-15)


def test_reciprocal_alpha():
    assert eval_alpha(spec("reciprocal", k=2.0, t0=1.0), 4.0) == pytest.approx(0.5)


# -- cumulative ----------------------------------------------------------

def test_cumulative_examples():
    assert cumulative(spec("constant", c=1.0).clock(), 5.0) == pytest.approx(5.0)
    assert cumulative(spec("power", K=1.0, s=-0.5).clock(), 4.0) == pytest.approx(4.0)
    assert cumulative(spec("reciprocal", k=1.0, t0=1.0).clock(), math.e) == pytest.approx(1.0)


def test_cumulative_vanishes_at_origin():
    for sp in (spec("constant", c=2.0), spec("power", K=0.4664, s=-1.0045),
               spec("reciprocal", k=1.5, t0=2.0), spec("powerlog", K=1.0, s=-0.5, m=2.0)):
        clock = sp.clock()
        assert cumulative(clock, clock.origin) == 0.0


@pytest.mark.parametrize("sp", [
    spec("power", K=0.17, s=-0.456),
    spec("power", K=0.4664, s=-1.0045),
    spec("power", K=2.0, s=0.7),
    spec("reciprocal", k=1.6, t0=0.5),
    spec("powerlog", K=1.0, s=-0.5, m=1.0),
    spec("powerlog", K=0.3, s=0.2, m=2.0),
    spec("powerlog", K=0.3, s=-1.0, m=1.0),
])
def test_closed_form_matches_quadrature(sp):
    clock = sp.clock()
    t = clock.origin + np.array([0.3, 1.7, 12.0, 240.0])
    closed = np.asarray(clock.cumulative(t))
    quad = np.asarray(clock.cumulative_quadrature(t))
    np.testing.assert_allclose(closed, quad, rtol=1e-9, atol=1e-12)


def test_piecewise_cumulative_and_inverse():
    sp = spec("piecewise", breakpoints=[0.0, 1.0, 3.0], values=[2.0, 0.0, 1.0])
    clock = sp.clock()
    assert clock.cumulative(1.0) == pytest.approx(2.0)
    assert clock.cumulative(2.5) == pytest.approx(2.0)
    assert clock.cumulative(5.0) == pytest.approx(4.0)
    assert clock.inverse(3.0) == pytest.approx(4.0)
    assert clock.inverse(1.0) == pytest.approx(0.5)


# -- inverse -------------------------------------------------------------

def test_inverse_examples():
    assert inverse_cumulative(spec("constant", c=1.0).clock(), 5.0) == pytest.approx(5.0)
    assert inverse_cumulative(spec("power", K=1.0, s=-0.5).clock(), 4.0) == pytest.approx(4.0)


def test_inverse_round_trip_fb_parameters():
    clock = spec("power", K=0.4664, s=-1.0045, origin=1.0).clock()
    a = clock.cumulative(10.0)
    assert inverse_cumulative(clock, a) == pytest.approx(10.0, rel=1e-10)


def test_inverse_beyond_bounded_clock_raises():
    clock = spec("power", K=1.0, s=-2.0).clock()  # A_inf = 1 from origin 1
    assert clock.sup == pytest.approx(1.0)
    with pytest.raises(RangeError):
        clock.inverse(1.5)


specs = st.one_of(
    st.builds(lambda c: spec("constant", c=c), st.floats(0.05, 20)),
    st.builds(lambda K, s: spec("power", K=K, s=s), st.floats(0.05, 5), st.floats(-0.99, 1.5)),
    st.builds(lambda K, s: spec("power", K=K, s=s, origin=1.0), st.floats(0.05, 5),
              st.floats(-1.0, -0.5)),
    st.builds(lambda k, t0: spec("reciprocal", k=k, t0=t0), st.floats(0.05, 5),
              st.floats(0.01, 10)),
    st.builds(lambda K, s, m: spec("powerlog", K=K, s=s, m=m), st.floats(0.1, 3),
              st.floats(-0.9, 0.5), st.sampled_from([0.0, 1.0, 2.0, 1.5])),
)


@settings(max_examples=1000)
@given(specs, st.floats(1e-3, 1e4))
def test_round_trip_property(sp, dt):
    clock = sp.clock()
    t = clock.origin + dt
    a = clock.cumulative(t)
    if not a < clock.sup:
        return
    assert abs(clock.inverse(a) - t) <= 1e-8 * max(1.0, t)


@given(specs, st.floats(0, 1e3), st.floats(0, 1e3))
def test_cumulative_monotone(sp, d1, d2):
    clock = sp.clock()
    lo, hi = sorted((d1, d2))
    assert clock.cumulative(clock.origin + lo) <= clock.cumulative(clock.origin + hi)


# -- validation and serialization -----------------------------------------

@pytest.mark.parametrize("bad", [
    dict(form="constant", params={"c": 1.0}, lam=0.0, mu=1.0),
    dict(form="constant", params={"c": 1.0}, lam=1.0, mu=-1.0),
    dict(form="reciprocal", params={"k": 1.0, "t0": 0.0}),
    dict(form="piecewise", params={"breakpoints": [0.0, 0.0], "values": [1.0, 1.0]}),
    dict(form="piecewise", params={"breakpoints": [0.0, 1.0], "values": [1.0, -1.0]}),
    dict(form="power", params={"K": 1.0, "s": -1.5}, origin=0.0),
    dict(form="power", params={"K": 1.0}),
])
def test_invalid_specs_rejected(bad):
    with pytest.raises(ParameterError):
        RateSpec(Form(bad["form"]), bad["params"], bad.get("lam", 1.0), bad.get("mu", 1.0),
                 bad.get("origin"))


def test_singular_forms_get_unit_origin():
    assert spec("power", K=1.0, s=-1.2).domain_origin == 1.0
    assert spec("power", K=1.0, s=-0.5).domain_origin == 0.0
    assert spec("reciprocal", k=1.0, t0=3.0).domain_origin == 3.0


@given(specs)
def test_json_round_trip(sp):
    again = RateSpec.from_json(sp.to_json())
    assert again == sp
    assert json.loads(again.to_json()) == json.loads(sp.to_json())


def test_alpha_flag_grammar():
    assert parse_alpha_flag("constant:2", 0.9, 1.1) == spec("constant", 0.9, 1.1, c=2.0)
    assert parse_alpha_flag("power:1,-0.5", 1, 1) == spec("power", K=1.0, s=-0.5)
    assert parse_alpha_flag("powerlog:1,-0.5,2", 1, 1).form is Form.POWERLOG
    assert parse_alpha_flag("recip:1.6,1", 1, 1) == spec("reciprocal", k=1.6, t0=1.0)
    for bad in ("power:1", "weird:1", "power:a,b"):
        with pytest.raises(ParameterError):
            parse_alpha_flag(bad, 1, 1)


def test_clock_rejects_origin_before_domain():
    with pytest.raises(DomainError):
        CumulativeClock(spec("reciprocal", k=1.0, t0=2.0), origin=1.0)
