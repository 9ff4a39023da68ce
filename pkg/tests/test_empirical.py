import io
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tclob.depth import DepthDistribution
from tclob.empirical import (
    EventRecord,
    EventStream,
    IntensityCurve,
    Kind,
    NonMonotoneTimeWarning,
    Side,
    StockFits,
    daily_intensities,
    estimate_intensity,
    fit_power_law,
    published_fixture,
    published_table_report,
    parse_events,
    price_change_durations,
    quotient_series,
    synthetic_curve,
    synthetic_session,
    table_report,
    write_events,
)
from tclob.errors import InsufficientDataError, ParameterError, SchemaError
from tclob.rates import CumulativeClock, Form, RateSpec
from tclob.simulator import BookConfig, PricePath, simulate_book

HEADER = "t_seconds,side,kind,price_ticks,size\n"


def parse(text, **kw):
    return parse_events(io.StringIO(text), **kw)


# -- parsing ------------------------------------------------------------------

def test_empty_file():
    assert len(parse("")) == 0
    assert len(parse(HEADER)) == 0


def test_single_row():
    ev = parse(HEADER + "0.5,A,L,100,1\n")
    (r,) = list(ev)
    assert r == EventRecord(0.5, Side.ASK, Kind.LIMIT, 100, 1, "")


@pytest.mark.parametrize("body,line", [
    ("0.5,X,L,100,1\n", 2),
    ("0.5,A,L,100,1\n1.0,A,Q,100,1\n", 3),
    ("0.5,A,L,100\n", 2),
    ("-1,A,L,100,1\n", 2),
    ("0.5,A,L,100,0\n", 2),
    ("abc,A,L,100,1\n", 2),
    ("99999,A,L,100,1\n", 2),
])
def test_schema_errors_carry_line(body, line):
    with pytest.raises(SchemaError) as exc:
        parse(HEADER + body)
    assert exc.value.line == line


def test_bad_header():
    with pytest.raises(SchemaError):
        parse("time,side,kind,price,size\n0.5,A,L,100,1\n")


def test_out_of_order_rows_are_sorted_with_warning():
    with pytest.warns(NonMonotoneTimeWarning):
        ev = parse(HEADER + "2.0,A,L,100,1\n1.0,B,M,99,1\n")
    assert list(ev.t) == [1.0, 2.0]


def test_round_trip_of_synthetic_session():
    ev = synthetic_session({"lam_ask": (0.1703, 0.4560), "mu_bid": (0.1775, 0.4509)}, 3, volume=5)
    text = write_events(ev)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        back = parse(text)
    assert write_events(back) == text
    assert len(back) == len(ev)


def test_day_column_round_trip():
    text = "t_seconds,side,kind,price_ticks,size,day\n1.0,A,L,100,1,d1\n0.5,B,C,99,2,d2\n"
    ev = parse(text)
    assert ev.days == ["d1", "d2"]
    assert write_events(ev) == text


# -- intensities -------------------------------------------------------------------

def _poisson_stream(rate, T, rng):
    n = rng.poisson(rate * T)
    t = np.sort(rng.uniform(0, T, n))
    z = np.zeros(n, dtype=np.int8)
    return EventStream(t, z + 1, z, np.full(n, 100), np.ones(n, dtype=np.int64), session_length=T)


def test_homogeneous_poisson_bands():
    rng = np.random.default_rng(0)
    ev = _poisson_stream(2.0, 1e4, rng)
    c = estimate_intensity(ev, "A", {"L"}, bin_width=100)
    band = 3 * math.sqrt(200) / 100
    assert np.mean(np.abs(c.rate - 2.0) <= band) >= 0.99


def test_single_event_bin():
    ev = parse(HEADER + "15,A,L,100,1\n", session_length=100)
    c = estimate_intensity(ev, "A", {"L"}, bin_width=10)
    assert c.rate[1] == pytest.approx(0.1)
    assert np.count_nonzero(c.rate) == 1


def test_intensity_preconditions():
    with pytest.raises(ParameterError):
        estimate_intensity(EventStream.empty(), "A", {"L"})
    ev = parse(HEADER + "15,A,L,100,1\n")
    with pytest.raises(ParameterError):
        estimate_intensity(ev, "A", set())


def test_estimator_error_shrinks_with_data():
    rng = np.random.default_rng(1)
    errs = []
    for T in (1e3, 1e5):
        ev = _poisson_stream(2.0, T, rng)
        c = estimate_intensity(ev, "A", {"L"}, bin_width=T / 10)
        errs.append(np.mean(np.abs(c.rate - 2.0)))
    assert errs[1] < errs[0]


@given(st.lists(st.floats(0, 1000), max_size=200), st.floats(1.0, 400.0))
def test_binning_preserves_totals(times, width):
    n = len(times)
    z = np.zeros(n, dtype=np.int8)
    ev = EventStream(np.sort(np.array(times, dtype=float)), z, z, np.zeros(n, dtype=np.int64),
                     np.ones(n, dtype=np.int64), session_length=1000.0)
    if n == 0:
        return
    c = estimate_intensity(ev, "B", {"L"}, bin_width=width)
    assert c.counts.sum() == n


def test_daily_curves_average_to_pooled():
    text = ("t_seconds,side,kind,price_ticks,size,day\n"
            "10,A,M,100,1,d1\n20,A,C,100,1,d1\n30,A,M,100,1,d2\n")
    ev = parse(text, session_length=100)
    daily = daily_intensities(ev, "A", {"M", "C"}, bin_width=50)
    pooled = estimate_intensity(ev, "A", {"M", "C"}, bin_width=50)
    np.testing.assert_allclose(pooled.rate, 0.5 * (daily["d1"].rate + daily["d2"].rate))


# -- fits and quotients ---------------------------------------------------------------

def test_noise_free_fit_recovers_parameters():
    fit = fit_power_law(synthetic_curve(0.1703, 0.4560, None))
    assert fit.K == pytest.approx(0.1703, abs=1e-9)
    assert fit.exponent == pytest.approx(0.4560, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0)


def test_constant_curve_fit():
    edges = np.arange(0, 3001, 300.0)
    fit = fit_power_law(IntensityCurve.from_counts(edges, np.full(10, 600.0)))
    assert fit.exponent == pytest.approx(0, abs=1e-12)
    assert fit.K == pytest.approx(2.0)


@given(st.floats(0.01, 10), st.floats(-1.5, 1.5))
def test_fit_is_exact_on_log_linear_data(K, e):
    fit = fit_power_law(synthetic_curve(K, e, None))
    assert fit.K == pytest.approx(K, rel=1e-9)
    assert fit.exponent == pytest.approx(e, abs=1e-9)


def test_noisy_fit_reports_dropped_bins():
    edges = np.arange(0, 3001, 300.0)
    counts = np.array([0, 5, 4, 0, 3, 3, 2, 2, 2, 1], dtype=float)
    fit = fit_power_law(IntensityCurve.from_counts(edges, counts))
    assert fit.n_dropped == 2 and fit.n_bins == 8
    with pytest.raises(InsufficientDataError):
        fit_power_law(IntensityCurve.from_counts(edges, np.r_[1.0, 1.0, np.zeros(8)]))


def test_quotients():
    c = synthetic_curve(0.2, 0.5, 4)
    q = quotient_series(c, c)
    assert np.all(q.ratio == 1.0) and q.mean == 1.0
    lam = synthetic_curve(0.9598 * 0.2, 0.5, None)
    assert quotient_series(lam, synthetic_curve(0.2, 0.5, None)).mean == pytest.approx(0.9598)
    edges = np.arange(0, 901, 300.0)
    zero = quotient_series(IntensityCurve.from_counts(edges, np.array([0.0, 2.0, 2.0])),
                           IntensityCurve.from_counts(edges, np.array([1.0, 1.0, 1.0])))
    assert zero.ratio[0] == 0 and zero.mean == pytest.approx(4 / 3)


# -- durations --------------------------------------------------------------------------

def test_durations_from_epochs():
    d = price_change_durations(PricePath([1.0, 3.0, 6.0], [1, -1, 1]))
    assert list(d.durations[1:]) == [2.0, 3.0]


def test_durations_from_events():
    text = HEADER + "1,A,L,100,1\n3,A,L,101,1\n4,B,L,99,1\n6,A,L,100,1\n9,B,L,98,1\n"
    d = price_change_durations(parse(text))
    assert list(d.durations) == [3.0, 3.0]


def _running_mean_increment(lam, mu):
    # median over 21 seeds of the running mean after 1e5 changes minus the
    # median after 1e3; medians tame the single huge draws of a heavy tail
    spec = RateSpec(Form.CONSTANT, {"c": 1.0}, lam, mu)
    early, late = [], []
    for seed in range(21):
        cfg = BookConfig(CumulativeClock(spec), DepthDistribution.point(1, 1), seed=seed)
        rm = price_change_durations(simulate_book(cfg, n_changes=100_000)).running_mean
        early.append(rm[999])
        late.append(rm[-1])
    return float(np.median(late) - np.median(early))


def test_running_mean_diverges_when_critical():
    # tail 1/(pi t): the typical mean of n draws grows like log(n)/pi,
    # about 1.47 over two decades
    assert _running_mean_increment(1.0, 1.0) > 0.7


def test_running_mean_stabilizes_when_subcritical():
    assert abs(_running_mean_increment(0.5, 1.0)) < 0.05


def test_density_overlay_shape():
    clock = CumulativeClock(RateSpec(Form.CONSTANT, {"c": 1.0}, 1.0, 1.0))
    p = simulate_book(BookConfig(clock, DepthDistribution.point(1, 1), seed=4), n_changes=5000)
    d = price_change_durations(p, bins=20, clock=clock, depth=DepthDistribution.point(1, 1))
    assert d.overlay.shape == d.density.shape
    assert d.to_csv().startswith("t_mid,density,asymptotic")


# -- tables -----------------------------------------------------------------------------

def test_published_grouping():
    g = published_table_report().grouping()
    assert sorted(g["SubcriticalStandard"]) == ["CSCO", "INTC", "VOD"]
    assert sorted(g["CriticalTimeDependent"]) == ["LBTYK", "MSFT"]
    assert g["NoConvergence"] == ["FB"]
    critical = {n for n, r in published_table_report().regimes.items() if r.critical}
    assert critical == {"FB", "MSFT", "LBTYK"}


def test_single_stock_table():
    f = published_fixture()
    rep = table_report({"CSCO": f["CSCO"]})
    assert list(rep.to_dict()) == ["CSCO"]
    assert rep.to_text().count("CSCO") == 3


def test_missing_fits_rejected():
    sf = published_fixture()["CSCO"]
    broken = StockFits(sf.lam_ask, sf.mu_ask, sf.lam_bid, None, sf.q_ask, sf.q_bid)
    with pytest.raises(ParameterError):
        table_report({"CSCO": sf, "X": broken})
    with pytest.raises(ParameterError):
        table_report({})
