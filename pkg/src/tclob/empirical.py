"""Order-flow statistics: event ingestion, binned intensities, power-law fits,
intensity quotients and price-change durations.

Events are level-one messages with a time stamp in seconds since the session
open, a side (bid/ask), a kind (limit, market, cancel), a price in ticks and
a size.  Market orders and cancellations both remove depth, so they are
pooled into one flow when estimating ``mu``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .analytic import tau_density_asymptotic
from .errors import InsufficientDataError, ParameterError, SchemaError
from .rates import Form, RateSpec
from .scaling import classify_regime
from .simulator import PricePath

__all__ = [
    "Side",
    "Kind",
    "EventRecord",
    "EventStream",
    "IntensityCurve",
    "PowerLawFit",
    "QuotientSeries",
    "DurationSample",
    "StockFits",
    "TableReport",
    "NonMonotoneTimeWarning",
    "parse_events",
    "write_events",
    "estimate_intensity",
    "daily_intensities",
    "fit_power_law",
    "quotient_series",
    "price_change_durations",
    "table_report",
    "published_fixture",
    "published_table_report",
    "synthetic_curve",
    "synthetic_session",
    "SESSION_LENGTH",
    "DEFAULT_BIN_WIDTH",
]

SESSION_LENGTH = 23400.0  # 6.5 hours
DEFAULT_BIN_WIDTH = 300.0
DEFAULT_VOLUME = 1.0e4
HEADER = ("t_seconds", "side", "kind", "price_ticks", "size")


class NonMonotoneTimeWarning(UserWarning):
    """Input rows were not in time order; they have been stably sorted."""


class Side(str, Enum):
    BID = "B"
    ASK = "A"


class Kind(str, Enum):
    LIMIT = "L"
    MARKET = "M"
    CANCEL = "C"


_SIDE_CODE = {Side.BID: 0, Side.ASK: 1}
_KIND_CODE = {Kind.LIMIT: 0, Kind.MARKET: 1, Kind.CANCEL: 2}
_SIDES = (Side.BID, Side.ASK)
_KINDS = (Kind.LIMIT, Kind.MARKET, Kind.CANCEL)


@dataclass(frozen=True)
class EventRecord:
    t: float
    side: Side
    kind: Kind
    price: int
    size: int
    day: str = ""


@dataclass(frozen=True)
class EventStream:
    """Column store of validated, time-sorted events.

    ``day`` labels come from an optional trailing ``day`` column; files
    without it form a single session labelled ``""``.
    """

    t: np.ndarray
    side: np.ndarray  # 0 bid, 1 ask
    kind: np.ndarray  # 0 limit, 1 market, 2 cancel
    price: np.ndarray
    size: np.ndarray
    day: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=object))
    session_length: float = SESSION_LENGTH

    def __post_init__(self) -> None:
        if self.day.size != self.t.size:
            object.__setattr__(self, "day", np.full(self.t.size, "", dtype=object))

    def __len__(self) -> int:
        return int(self.t.size)

    def __iter__(self) -> Iterator[EventRecord]:
        for i in range(len(self)):
            yield EventRecord(float(self.t[i]), _SIDES[self.side[i]], _KINDS[self.kind[i]],
                              int(self.price[i]), int(self.size[i]), str(self.day[i]))

    @classmethod
    def empty(cls, session_length: float = SESSION_LENGTH) -> "EventStream":
        z = np.empty(0)
        return cls(z, z.astype(np.int8), z.astype(np.int8), z.astype(np.int64),
                   z.astype(np.int64), np.empty(0, dtype=object), session_length)

    @classmethod
    def from_records(cls, records: Iterable[EventRecord],
                     session_length: float = SESSION_LENGTH) -> "EventStream":
        recs = list(records)
        if not recs:
            return cls.empty(session_length)
        return cls(
            np.array([r.t for r in recs], dtype=float),
            np.array([_SIDE_CODE[Side(r.side)] for r in recs], dtype=np.int8),
            np.array([_KIND_CODE[Kind(r.kind)] for r in recs], dtype=np.int8),
            np.array([r.price for r in recs], dtype=np.int64),
            np.array([r.size for r in recs], dtype=np.int64),
            np.array([r.day for r in recs], dtype=object),
            session_length,
        )

    @property
    def days(self) -> list[str]:
        """Distinct day labels in order of first appearance."""
        seen: dict[str, None] = {}
        for d in self.day:
            seen.setdefault(str(d), None)
        return list(seen)

    def select(self, side: Side | str | None = None, kinds: Iterable | None = None,
               day: str | None = None) -> np.ndarray:
        """Boolean mask of events matching the filters."""
        m = np.ones(len(self), dtype=bool)
        if side is not None:
            m &= self.side == _SIDE_CODE[Side(side)]
        if kinds is not None:
            codes = [_KIND_CODE[Kind(k)] for k in kinds]
            m &= np.isin(self.kind, codes)
        if day is not None:
            m &= self.day == day
        return m


def _parse_row(row: list[str], line: int, session_length: float, has_day: bool):
    want = len(HEADER) + (1 if has_day else 0)
    if len(row) != want:
        raise SchemaError(f"expected {want} fields, got {len(row)}", line)
    ts, side, kind, price, size = (v.strip() for v in row[:5])
    try:
        t = float(ts)
    except ValueError:
        raise SchemaError(f"bad time {ts!r}", line) from None
    if not math.isfinite(t) or t < 0 or t > session_length:
        raise SchemaError(f"time {ts} outside [0, {session_length:g}]", line)
    try:
        sd = _SIDE_CODE[Side(side)]
    except ValueError:
        raise SchemaError(f"side must be B or A, got {side!r}", line) from None
    try:
        kd = _KIND_CODE[Kind(kind)]
    except ValueError:
        raise SchemaError(f"kind must be L, M or C, got {kind!r}", line) from None
    try:
        pr = int(price)
        sz = int(size)
    except ValueError:
        raise SchemaError("price_ticks and size must be integers", line) from None
    if sz < 1:
        raise SchemaError("size must be at least 1", line)
    return t, sd, kd, pr, sz, (row[5].strip() if has_day else "")


def parse_events(source, session_length: float = SESSION_LENGTH) -> EventStream:
    """Read an event CSV.

    Parameters
    ----------
    source
        A path, or an open text stream.
    session_length
        Upper bound for time stamps, in seconds.

    Returns
    -------
    EventStream
        Rows stably sorted by time within each day.  A
        :class:`NonMonotoneTimeWarning` is issued when sorting was needed.

    Raises
    ------
    SchemaError
        On a missing or wrong header or a malformed row; the message carries
        the 1-based line number.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return parse_events(fh, session_length)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or (len(header) == 1 and not header[0].strip()):
        return EventStream.empty(session_length)
    header = [h.strip() for h in header]
    if tuple(header[:5]) != HEADER or header[5:] not in ([], ["day"]):
        raise SchemaError(f"header must be {','.join(HEADER)}[,day]", 1)
    has_day = len(header) == 6
    rows = []
    for line, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        rows.append(_parse_row(row, line, session_length, has_day))
    if not rows:
        return EventStream.empty(session_length)
    t, sd, kd, pr, sz, dy = zip(*rows)
    t = np.array(t)
    day = np.array(dy, dtype=object)
    # stable sort by (day of first appearance, time)
    order_of_day = {d: i for i, d in enumerate(dict.fromkeys(dy))}
    day_idx = np.array([order_of_day[d] for d in dy])
    order = np.lexsort((t, day_idx))
    if np.any(order != np.arange(t.size)):
        warnings.warn("event times were not monotone; rows were stably sorted",
                      NonMonotoneTimeWarning, stacklevel=2)
    return EventStream(
        t[order],
        np.array(sd, dtype=np.int8)[order],
        np.array(kd, dtype=np.int8)[order],
        np.array(pr, dtype=np.int64)[order],
        np.array(sz, dtype=np.int64)[order],
        day[order],
        session_length,
    )


def write_events(stream: EventStream) -> str:
    """Serialize ``stream`` in the CSV schema read by :func:`parse_events`."""
    has_day = any(str(d) for d in stream.day)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER + (("day",) if has_day else ()))
    for r in stream:
        row = [repr(r.t), r.side.value, r.kind.value, r.price, r.size]
        w.writerow(row + ([r.day] if has_day else []))
    return buf.getvalue()


# -- intensities ---------------------------------------------------------

@dataclass(frozen=True)
class IntensityCurve:
    """Binned event counts and rates in events per second.

    For a curve pooled over ``d`` sessions the rate is the average daily
    rate, ``counts / (width * d)``.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    rate: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        if self.counts.size != self.bin_edges.size - 1 or self.rate.size != self.counts.size:
            raise ParameterError("a curve needs one count and one rate per bin")
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ParameterError("bin edges must increase")
        if np.any(self.rate < 0):
            raise ParameterError("rates must be nonnegative")

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @classmethod
    def from_counts(cls, bin_edges, counts, label: str = "") -> "IntensityCurve":
        edges = np.asarray(bin_edges, dtype=float)
        counts = np.asarray(counts, dtype=float)
        return cls(edges, counts, counts / np.diff(edges), label)

    def to_csv(self) -> str:
        return "t_mid,rate\n" + "".join(
            f"{m!r},{r!r}\n" for m, r in zip(self.midpoints.tolist(), self.rate.tolist())
        )


def _edges(bin_width: float, session_length: float) -> np.ndarray:
    if not bin_width > 0:
        raise ParameterError("bin width must be positive")
    edges = np.arange(0.0, session_length, bin_width)
    return np.append(edges, session_length)


def estimate_intensity(events: EventStream, side, kinds, bin_width: float = DEFAULT_BIN_WIDTH,
                       day: str | None = None) -> IntensityCurve:
    """Events per second in consecutive bins of the session.

    ``kinds={"L"}`` estimates the limit-order intensity; ``{"M", "C"}`` the
    pooled market-plus-cancel intensity.  The last bin is shorter when the
    width does not divide the session length.
    """
    if len(events) == 0:
        raise ParameterError("event stream is empty")
    kinds = list(kinds)
    if not kinds:
        raise ParameterError("at least one event kind is required")
    mask = events.select(side, kinds, day)
    edges = _edges(bin_width, events.session_length)
    counts, _ = np.histogram(events.t[mask], bins=edges)
    label = f"{Side(side).name.lower()}:{''.join(Kind(k).value for k in kinds)}"
    if day:
        label = f"{day}:{label}"
    n_days = 1 if day is not None else len(events.days)
    # pooled over several sessions: average daily intensity
    return IntensityCurve(edges, counts.astype(float),
                          counts / (np.diff(edges) * n_days), label)


def daily_intensities(events: EventStream, side, kinds,
                      bin_width: float = DEFAULT_BIN_WIDTH) -> dict[str, IntensityCurve]:
    """One curve per day label."""
    return {d: estimate_intensity(events, side, kinds, bin_width, day=d) for d in events.days}


@dataclass(frozen=True)
class PowerLawFit:
    """``rate ~ K t^(-exponent)`` by least squares in log-log coordinates."""

    K: float
    exponent: float
    r_squared: float
    stderr: float
    n_bins: int
    n_dropped: int = 0

    def __post_init__(self) -> None:
        if not self.K > 0:
            raise ParameterError("K must be positive")

    def __call__(self, t):
        return self.K * np.asarray(t, dtype=float) ** -self.exponent

    def to_dict(self) -> dict:
        return {"K": self.K, "exponent": self.exponent, "r_squared": self.r_squared,
                "stderr": self.stderr, "n_bins": self.n_bins, "n_dropped": self.n_dropped}


def fit_power_law(curve: IntensityCurve) -> PowerLawFit:
    """OLS of ``log rate`` on ``log t_mid`` over bins with a positive rate."""
    keep = curve.rate > 0
    m = int(keep.sum())
    if m < 3:
        raise InsufficientDataError("power-law fit needs at least 3 bins with a positive rate")
    x = np.log(curve.midpoints[keep])
    y = np.log(curve.rate[keep])
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        raise InsufficientDataError("bin midpoints carry no spread in log t")
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    sse = float(resid @ resid)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if sst == 0 else max(0.0, 1.0 - sse / sst)
    stderr = math.sqrt(sse / (m - 2) / sxx) if m > 2 else math.nan
    return PowerLawFit(math.exp(intercept), -slope, r2, stderr, m, int(keep.size - m))


@dataclass(frozen=True)
class QuotientSeries:
    t: np.ndarray
    ratio: np.ndarray
    mean: float

    def to_csv(self) -> str:
        return "t_mid,quotient\n" + "".join(
            f"{a!r},{b!r}\n" for a, b in zip(self.t.tolist(), self.ratio.tolist())
        )


def quotient_series(lambda_curve: IntensityCurve, mu_curve: IntensityCurve) -> QuotientSeries:
    """Per-bin ``lambda / mu`` over bins with positive ``mu`` and its mean."""
    if not np.array_equal(lambda_curve.bin_edges, mu_curve.bin_edges):
        raise ParameterError("curves must share the same binning")
    ok = mu_curve.rate > 0
    if not ok.any():
        raise InsufficientDataError("mu is zero in every bin")
    ratio = lambda_curve.rate[ok] / mu_curve.rate[ok]
    return QuotientSeries(lambda_curve.midpoints[ok], ratio, float(ratio.mean()))


# -- price-change durations ----------------------------------------------

@dataclass(frozen=True)
class DurationSample:
    durations: np.ndarray
    edges: np.ndarray
    density: np.ndarray
    overlay: np.ndarray | None = None

    @property
    def running_mean(self) -> np.ndarray:
        return np.cumsum(self.durations) / np.arange(1, self.durations.size + 1)

    def to_csv(self) -> str:
        mids = np.sqrt(self.edges[:-1] * self.edges[1:])
        cols = ["t_mid", "density"] + (["asymptotic"] if self.overlay is not None else [])
        lines = [",".join(cols)]
        for i, (m, d) in enumerate(zip(mids.tolist(), self.density.tolist())):
            row = [repr(m), repr(d)]
            if self.overlay is not None:
                row.append(repr(float(self.overlay[i])))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _quote_change_times(events: EventStream) -> np.ndarray:
    # a change is any event whose price differs from the last price seen on its side
    times = []
    for day in events.days:
        last = [None, None]
        idx = np.flatnonzero(events.day == day)
        for i in idx:
            sd, p = int(events.side[i]), int(events.price[i])
            if last[sd] is not None and p != last[sd]:
                times.append(float(events.t[i]))
            last[sd] = p
    return np.asarray(times)


def price_change_durations(source, bins: int = 30, clock=None, depth=None) -> DurationSample:
    """Durations between consecutive price changes and a log-binned density.

    ``source`` is a :class:`PricePath` (durations between epochs, the first
    measured from time 0) or an :class:`EventStream` (changes of the quoted
    price on either side).  With ``clock`` and ``depth`` the asymptotic
    density of tau is evaluated at the geometric bin centres for comparison.
    """
    if isinstance(source, PricePath):
        if source.n_changes < 2:
            raise InsufficientDataError("need at least two price changes")
        d = source.durations
    elif isinstance(source, EventStream):
        ch = _quote_change_times(source)
        if ch.size < 2:
            raise InsufficientDataError("need at least two price changes")
        d = np.diff(ch)
    else:
        d = np.asarray(source, dtype=float)
        if d.size < 2:
            raise InsufficientDataError("need at least two price changes")
    pos = d[d > 0]
    if pos.size == 0:
        raise InsufficientDataError("all durations are zero")
    lo, hi = pos.min(), pos.max()
    if hi <= lo:
        hi = lo * (1 + 1e-9)
    edges = np.geomspace(lo, hi, bins + 1)
    counts, _ = np.histogram(pos, bins=edges)
    density = counts / (pos.size * np.diff(edges))
    overlay = None
    if clock is not None and depth is not None:
        mids = np.sqrt(edges[:-1] * edges[1:])
        overlay = np.asarray(tau_density_asymptotic(clock.origin + mids, depth, clock))
    return DurationSample(d, edges, density, overlay)


# -- tables --------------------------------------------------------------

@dataclass(frozen=True)
class StockFits:
    """Fits for the four flows of one stock plus the two mean quotients."""

    lam_ask: PowerLawFit
    mu_ask: PowerLawFit
    lam_bid: PowerLawFit
    mu_bid: PowerLawFit
    q_ask: float
    q_bid: float

    @property
    def mean_quotient(self) -> float:
        return 0.5 * (self.q_ask + self.q_bid)

    def rate_spec(self) -> RateSpec:
        """Model spec used for classification.

        The ask side's market-plus-cancel fit supplies the modulation
        ``K t^(-r)``; the base rates are normalized so that ``mu = 1`` and
        ``lam`` equals the mean quotient.
        """
        return RateSpec(Form.POWER, {"K": self.mu_ask.K, "s": -self.mu_ask.exponent},
                        self.mean_quotient, 1.0)


@dataclass(frozen=True)
class TableReport:
    stocks: dict
    regimes: dict

    def to_dict(self) -> dict:
        out = {}
        for name, sf in self.stocks.items():
            out[name] = {
                "ask": {"lambda": sf.lam_ask.to_dict(), "mu": sf.mu_ask.to_dict()},
                "bid": {"lambda": sf.lam_bid.to_dict(), "mu": sf.mu_bid.to_dict()},
                "quotient": {"ask": sf.q_ask, "bid": sf.q_bid, "mean": sf.mean_quotient},
                "regime": self.regimes[name].to_dict(),
            }
        return out

    def grouping(self) -> dict[str, list[str]]:
        groups: dict[str, list[str]] = {}
        for name, rep in self.regimes.items():
            groups.setdefault(rep.regime.value, []).append(name)
        return groups

    def to_text(self) -> str:
        lines = []
        for side in ("ask", "bid"):
            lines.append(f"Power-law fits, {side} side: lambda ~ K t^-s, mu ~ K t^-r")
            lines.append(f"{'stock':<8}{'K_lambda':>10}{'s':>10}{'K_mu':>10}{'r':>10}")
            for name, sf in self.stocks.items():
                lf, mf = (sf.lam_ask, sf.mu_ask) if side == "ask" else (sf.lam_bid, sf.mu_bid)
                lines.append(f"{name:<8}{lf.K:>10.4f}{lf.exponent:>10.4f}"
                             f"{mf.K:>10.4f}{mf.exponent:>10.4f}")
            lines.append("")
        lines.append("Mean quotient lambda/mu")
        lines.append(f"{'stock':<8}{'ask':>10}{'bid':>10}  regime")
        for name, sf in self.stocks.items():
            rep = self.regimes[name]
            flag = " (near boundary)" if rep.near_boundary else ""
            lines.append(f"{name:<8}{sf.q_ask:>10.4f}{sf.q_bid:>10.4f}  {rep.regime.value}{flag}")
        return "\n".join(lines) + "\n"


def table_report(fits: Mapping[str, StockFits],
                 criticality_threshold: float = 0.97) -> TableReport:
    """Assemble the fit and quotient tables and classify each stock."""
    if not fits:
        raise ParameterError("no stocks to report")
    for name, sf in fits.items():
        missing = [f for f in ("lam_ask", "mu_ask", "lam_bid", "mu_bid")
                   if getattr(sf, f, None) is None]
        if missing:
            raise ParameterError(f"{name}: missing fits {missing}")
    regimes = {name: classify_regime(sf.rate_spec(), criticality_threshold)
               for name, sf in fits.items()}
    return TableReport(dict(fits), regimes)


# Printed values: (K_lambda, s, K_mu, r) per side, then (ask, bid) quotients.
_PUBLISHED_ASK = {
    "CSCO": (0.1703, 0.4560, 0.1790, 0.4412),
    "FB": (0.4664, 1.0045, 0.5429, 1.0073),
    "INTC": (0.2604, 0.6127, 0.3582, 0.6515),
    "MSFT": (0.4002, 0.6153, 0.4671, 0.6363),
    "LBTYK": (0.0146, 0.7438, 0.0211, 0.8640),
    "VOD": (0.1199, 0.5536, 0.1927, 0.6116),
}
_PUBLISHED_BID = {
    "CSCO": (0.1264, 0.4149, 0.1775, 0.4509),
    "FB": (0.4584, 1.0039, 0.5359, 1.0064),
    "INTC": (0.2041, 0.5872, 0.3525, 0.6649),
    "MSFT": (0.3887, 0.6163, 0.5014, 0.6522),
    "LBTYK": (0.0127, 0.7466, 0.0196, 0.8352),
    "VOD": (0.1223, 0.5806, 0.2143, 0.6566),
}
_PUBLISHED_QUOTIENT = {
    "CSCO": (0.9598, 0.9392),
    "FB": (0.9927, 0.9993),
    "INTC": (0.9441, 0.9544),
    "MSFT": (0.9901, 0.9912),
    "LBTYK": (0.9998, 0.9498),
    "VOD": (0.8919, 0.9255),
}


def published_fixture() -> dict[str, StockFits]:
    """Published fit and quotient values for the six stocks (R^2 and
    standard errors are not published and are set to NaN)."""
    out = {}
    for name in _PUBLISHED_ASK:
        a, b, (qa, qb) = _PUBLISHED_ASK[name], _PUBLISHED_BID[name], _PUBLISHED_QUOTIENT[name]
        fit = lambda K, e: PowerLawFit(K, e, math.nan, math.nan, 0)
        out[name] = StockFits(fit(a[0], a[1]), fit(a[2], a[3]), fit(b[0], b[1]),
                              fit(b[2], b[3]), qa, qb)
    return out


def published_table_report(criticality_threshold: float = 0.97) -> TableReport:
    return table_report(published_fixture(), criticality_threshold)


# -- synthetic data ------------------------------------------------------

def synthetic_curve(K: float, exponent: float, rng, bin_width: float = DEFAULT_BIN_WIDTH,
                    session_length: float = SESSION_LENGTH, volume: float = DEFAULT_VOLUME,
                    label: str = "") -> IntensityCurve:
    """Poisson counts around the midpoint-sampled curve ``volume K t^-exponent``.

    ``volume`` converts the fitted intensity into events per second; it
    scales ``K`` and leaves the exponent untouched.  With ``rng=None`` the
    noise-free curve ``K t^-exponent`` itself is returned (volume ignored).
    """
    edges = _edges(bin_width, session_length)
    mids = 0.5 * (edges[:-1] + edges[1:])
    if rng is None:
        return IntensityCurve.from_counts(edges, K * mids**-exponent * np.diff(edges), label)
    mean = volume * K * mids**-exponent * np.diff(edges)
    counts = np.random.default_rng(rng).poisson(mean).astype(float)
    return IntensityCurve.from_counts(edges, counts, label)


def _arrivals(rng: np.random.Generator, K: float, exponent: float, volume: float,
              start: float, session_length: float) -> np.ndarray:
    spec = RateSpec(Form.POWER, {"K": volume * K, "s": -exponent}, 1.0, 1.0, origin=start)
    clock = spec.clock()
    total = float(clock.cumulative(session_length))
    m = rng.poisson(total)
    u = np.sort(rng.random(m)) * total
    return np.asarray(clock.inverse(u), dtype=float)


def synthetic_session(params: Mapping[str, tuple[float, float]], rng,
                      volume: float = DEFAULT_VOLUME, session_length: float = SESSION_LENGTH,
                      start: float = 1.0, price: int = 100) -> EventStream:
    """Event stream of inhomogeneous Poisson flows.

    ``params`` maps flow names ``lam_ask``, ``mu_ask``, ``lam_bid`` and
    ``mu_bid`` to ``(K, exponent)``.  Arrivals are drawn on
    ``[start, session_length]`` by mapping uniform order statistics through
    the inverse cumulative intensity.  Market-plus-cancel arrivals are split
    evenly between the two kinds.  Prices are held fixed.
    """
    rng = np.random.default_rng(rng)
    parts = []
    for name in ("lam_ask", "mu_ask", "lam_bid", "mu_bid"):
        if name not in params:
            continue
        K, e = params[name]
        t = _arrivals(rng, K, e, volume, start, session_length)
        side = 1 if name.endswith("ask") else 0
        if name.startswith("lam"):
            kind = np.zeros(t.size, dtype=np.int8)
        else:
            kind = np.where(rng.random(t.size) < 0.5, 1, 2).astype(np.int8)
        parts.append((t, np.full(t.size, side, dtype=np.int8), kind))
    if not parts:
        return EventStream.empty(session_length)
    t = np.concatenate([p[0] for p in parts])
    order = np.argsort(t, kind="stable")
    n = t.size
    return EventStream(
        t[order],
        np.concatenate([p[1] for p in parts])[order],
        np.concatenate([p[2] for p in parts])[order],
        np.full(n, price, dtype=np.int64),
        np.ones(n, dtype=np.int64),
        np.full(n, "", dtype=object),
        session_length,
    )
