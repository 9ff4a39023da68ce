import math

import pytest

from tclob.depth import QueueStart
from tclob.errors import ParameterError, TruncationError
from tclob.oracle import (
    TruncatedChain,
    ctmc_survival,
    ctmc_survival_ode,
    ctmc_tau_survival,
    default_cap,
)
from tclob.rates import CumulativeClock, Form, RateSpec


def test_pure_death_single_order():
    # lambda ~ 0, x = 1: P[Exp(1) > 1]
    chain = TruncatedChain(50, 1e-12, 1.0)
    assert ctmc_survival(1.0, 1, chain).value == pytest.approx(math.exp(-1), abs=1e-12)


def test_pure_death_erlang():
    # x = 3, no arrivals: P[Erlang(3, 1) > 2]
    chain = TruncatedChain(50, 1e-12, 1.0)
    expect = math.exp(-2) * (1 + 2 + 2)
    assert ctmc_survival(2.0, 3, chain).value == pytest.approx(expect, abs=1e-12)


def test_time_zero_is_one():
    chain = TruncatedChain(20, 0.5, 1.0)
    assert ctmc_survival(0.0, 4, chain).value == 1.0


def test_cap_doubling_self_consistency():
    a = ctmc_survival(5.0, 3, TruncatedChain(200, 0.9, 1.1)).value
    b = ctmc_survival(5.0, 3, TruncatedChain(400, 0.9, 1.1)).value
    assert abs(a - b) <= 1e-9


def test_truncation_error_raised_for_small_cap():
    with pytest.raises(TruncationError):
        ctmc_survival(100.0, 1, TruncatedChain(5, 1.0, 1.0))
    v = ctmc_survival(100.0, 1, TruncatedChain(5, 1.0, 1.0), check=False)
    assert v.truncation_bound > 1e-8


def test_default_cap_meets_bound():
    for x, lam, T in [(1, 1.0, 400.0), (5, 0.9, 30.0), (2, 0.5, 1e4)]:
        chain = TruncatedChain(default_cap(x, lam, T), lam, 1.0)
        assert ctmc_survival(T, x, chain).truncation_bound <= 1e-8


def test_invalid_arguments():
    chain = TruncatedChain(10, 0.5, 1.0)
    with pytest.raises(ParameterError):
        ctmc_survival(1.0, 0, chain)
    with pytest.raises(ParameterError):
        ctmc_survival(1.0, 11, chain)
    with pytest.raises(ParameterError):
        ctmc_survival(-1.0, 1, chain)
    with pytest.raises(ParameterError):
        TruncatedChain(0, 0.5, 1.0)


@pytest.mark.parametrize("form,params,T", [
    (Form.POWER, {"K": 1.0, "s": -0.5}, 4.0),
    (Form.POWER, {"K": 0.5, "s": 1.0}, 3.0),
    (Form.RECIPROCAL, {"k": 2.0, "t0": 1.0}, 5.0),
    (Form.CONSTANT, {"c": 2.0}, 2.5),
])
def test_two_witnesses_agree(form, params, T):
    clock = CumulativeClock(RateSpec(form, params, 0.8, 1.0))
    chain = TruncatedChain.for_clock(clock, 120)
    a = ctmc_survival(T, 2, chain).value
    b = ctmc_survival_ode(T, 2, chain).value
    assert abs(a - b) <= 1e-7


def test_tau_survival_pure_death():
    # two independent Exp(1) queues: min is Exp(2)
    v = ctmc_tau_survival(1.0, QueueStart(1, 1), 1e-12, 1.0)
    assert v.value == pytest.approx(math.exp(-2), abs=1e-12)
