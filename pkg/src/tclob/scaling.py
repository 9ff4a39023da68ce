"""Diffusion-limit experiments: regime classification, rescaled variance
profiles, counting-process profiles and the truncated-mean sequences used in
the limit proofs.

The rescaled price at scale ``n`` and macroscopic time ``t`` is
``(s_{t_n} - s_0) / sqrt(n)`` where ``t_n`` is the regime's time-dilation
schedule and the moves ``X_i`` are centred by their pooled empirical mean.
Path collections are consumed in a single pass, so callers may hand over a
lazy iterator (see :func:`tclob.simulator.iter_paths`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, optimize, stats

from .analytic import mean_tau
from .depth import DepthDistribution
from .errors import InsufficientDataError, ParameterError, UnsupportedFormError
from .rates import Form, RateSpec
from .simulator import PricePath

__all__ = [
    "Regime",
    "ScheduleKind",
    "Schedule",
    "LimitVolatility",
    "RegimeReport",
    "classify_regime",
    "VarianceProfile",
    "SlopeFit",
    "variance_profile",
    "fit_loglog_slope",
    "CountingProfile",
    "counting_process_rescale",
    "TruncatedMeans",
    "truncated_mean_sequence",
    "MIN_PATHS",
]

MIN_PATHS = 1000
DEFAULT_THRESHOLD = 0.97
BOUNDARY_BAND = 0.05


class Regime(str, Enum):
    SUBCRITICAL_STANDARD = "SubcriticalStandard"
    SUBCRITICAL_BOUNDARY = "SubcriticalBoundary"
    CRITICAL_STANDARD = "CriticalStandard"
    CRITICAL_TIME_DEPENDENT = "CriticalTimeDependent"
    NO_CONVERGENCE = "NoConvergence"


class ScheduleKind(str, Enum):
    LINEAR = "linear"  # t_n = n t
    POWER = "power"  # t_n = t n^p
    NLOGN = "nlogn"  # t_n = t (n log n)^p
    PRINTED = "printed"  # t_n = t n^p log n
    NONE = "none"


@dataclass(frozen=True)
class Schedule:
    """Time-dilation sequence ``t_n``; ``power`` is the exponent ``p``."""

    kind: ScheduleKind
    power: float = 1.0

    def __call__(self, t, n: float):
        t = np.asarray(t, dtype=float)
        if n < 2 and self.kind in (ScheduleKind.NLOGN, ScheduleKind.PRINTED):
            raise ParameterError("logarithmic schedules need n >= 2")
        if self.kind is ScheduleKind.LINEAR:
            out = n * t
        elif self.kind is ScheduleKind.POWER:
            out = t * n**self.power
        elif self.kind is ScheduleKind.NLOGN:
            out = t * (n * math.log(n)) ** self.power
        elif self.kind is ScheduleKind.PRINTED:
            out = t * n**self.power * math.log(n)
        else:
            raise ParameterError("no rescaling schedule exists in this regime")
        return out if out.ndim else float(out)

    def describe(self) -> str:
        p = f"{self.power:.6g}"
        return {
            ScheduleKind.LINEAR: "t_n = n*t",
            ScheduleKind.POWER: f"t_n = t*n^{p}",
            ScheduleKind.NLOGN: f"t_n = t*(n*log n)^{p}",
            ScheduleKind.PRINTED: f"t_n = t*n^{p}*log n",
            ScheduleKind.NONE: "none",
        }[self.kind]


@dataclass(frozen=True)
class LimitVolatility:
    """``ConstantBM`` or a power kernel ``u^exponent`` for the limit's
    instantaneous volatility."""

    kind: str
    exponent: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("ConstantBM", "PowerKernel"):
            raise ParameterError(f"unknown volatility kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "ConstantBM":
            return "ConstantBM"
        return f"PowerKernel({self.exponent:.6g})"


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    schedule: Schedule
    limit_volatility: LimitVolatility | None
    lam: float
    mu: float
    C: float
    form: str
    alpha_params: dict
    critical: bool
    quotient: float
    near_boundary: bool = False
    note: str = ""

    @property
    def variance_exponent(self) -> float | None:
        """Predicted log-log slope of the limit variance in ``t``."""
        if self.limit_volatility is None:
            return None
        return 1.0 + 2.0 * self.limit_volatility.exponent

    def to_dict(self) -> dict:
        return {
            "regime": self.regime.value,
            "schedule": self.schedule.describe(),
            "limit_volatility": (
                self.limit_volatility.describe() if self.limit_volatility else None
            ),
            "variance_exponent": self.variance_exponent,
            "parameters": {
                "lambda": self.lam,
                "mu": self.mu,
                "C": self.C,
                "quotient": self.quotient,
                "critical": self.critical,
                "form": self.form,
                "alpha": {
                    k: list(v) if isinstance(v, tuple) else v
                    for k, v in self.alpha_params.items()
                },
            },
            "near_boundary": self.near_boundary,
            "note": self.note,
        }


_NONE = Schedule(ScheduleKind.NONE, 0.0)


def classify_regime(spec: RateSpec, criticality_threshold: float = DEFAULT_THRESHOLD,
                    printed_schedule: bool = False) -> RegimeReport:
    """Decide which diffusion limit (if any) applies to ``spec``.

    Parameters
    ----------
    spec
        Base rates and modulation family.  Only the large-time behaviour of
        alpha matters.
    criticality_threshold
        The pair is treated as critical when ``lam / mu`` is at least this.
    printed_schedule
        For the critical time-dependent regime, return the alternative
        schedule ``t n^{1/s} log n`` instead of ``t (n log n)^s``.
    """
    if spec.form is Form.PIECEWISE:
        raise UnsupportedFormError("regime classification needs a parametric alpha")
    if not 0 < criticality_threshold <= 1:
        raise ParameterError("criticality threshold must lie in (0, 1]")
    lam, mu = spec.lam, spec.mu
    q = lam / mu
    critical = q >= criticality_threshold
    C = (math.sqrt(mu) - math.sqrt(lam)) ** 2
    expo = spec.exponent
    reciprocal_like = spec.form is Form.RECIPROCAL or (
        spec.form in (Form.POWER, Form.POWERLOG) and expo == -1.0
    )

    def report(regime, schedule, vol, near=False, note=""):
        return RegimeReport(regime, schedule, vol, lam, mu, C, spec.form.value,
                            dict(spec.params), critical, q, near, note)

    if not critical:
        if reciprocal_like:
            k = spec.params["k"] if spec.form is Form.RECIPROCAL else spec.params["K"]
            if spec.form is Form.POWERLOG and spec.params["m"] > 0:
                return report(Regime.SUBCRITICAL_STANDARD, Schedule(ScheduleKind.LINEAR),
                              LimitVolatility("ConstantBM"),
                              note="log factor makes the clock grow faster than k log t")
            index = 2.0 * C * k
            near = abs(index - 1.0) <= BOUNDARY_BAND
            if index > 1:
                return report(Regime.SUBCRITICAL_STANDARD, Schedule(ScheduleKind.LINEAR),
                              LimitVolatility("ConstantBM"), near,
                              f"tail index 2Ck = {index:.4g} > 1: finite mean")
            return report(Regime.SUBCRITICAL_BOUNDARY, Schedule(ScheduleKind.POWER, 1.0 / index),
                          LimitVolatility("PowerKernel", (index - 1.0) / 2.0), near,
                          f"tail index 2Ck = {index:.4g} <= 1: infinite mean")
        if expo < -1:
            return report(Regime.NO_CONVERGENCE, _NONE, None,
                          note="alpha is integrable at infinity; the clock is bounded "
                               "and the price freezes with positive probability")
        return report(Regime.SUBCRITICAL_STANDARD, Schedule(ScheduleKind.LINEAR),
                      LimitVolatility("ConstantBM"))

    if reciprocal_like:
        return report(Regime.NO_CONVERGENCE, _NONE, None,
                      note="clock grows logarithmically; tau has a slowly varying tail")
    s = expo + 1.0
    if s > 1:
        return report(Regime.CRITICAL_STANDARD, Schedule(ScheduleKind.LINEAR),
                      LimitVolatility("ConstantBM"))
    if s > 0:
        sched = (Schedule(ScheduleKind.PRINTED, 1.0 / s) if printed_schedule
                 else Schedule(ScheduleKind.NLOGN, s))
        return report(Regime.CRITICAL_TIME_DEPENDENT, sched,
                      LimitVolatility("PowerKernel", -s / 2.0),
                      near=s <= BOUNDARY_BAND)
    near = abs(s) <= BOUNDARY_BAND
    note = f"s = exponent + 1 = {s:.4g} <= 0: no rescaling schedule"
    if near:
        note += ("; the fitted decay is within the noise of t^-1, so the pair sits on "
                 "the boundary between the time-dependent and non-convergent cases")
    return report(Regime.NO_CONVERGENCE, _NONE, None, near, note)


# -- variance profiles ---------------------------------------------------

@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    ci_low: float
    ci_high: float
    level: float = 0.95

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "ci": [self.ci_low, self.ci_high],
            "level": self.level,
        }


def fit_loglog_slope(x, y, level: float = 0.95) -> SlopeFit:
    """OLS fit of ``log y`` on ``log x`` with a t-based confidence interval."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 3:
        raise ParameterError("need at least three points for a slope fit")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ParameterError("log-log fit needs positive values")
    res = stats.linregress(np.log(x), np.log(y))
    q = stats.t.ppf(0.5 + level / 2.0, x.size - 2)
    return SlopeFit(float(res.slope), float(res.intercept), float(res.stderr),
                    float(res.slope - q * res.stderr), float(res.slope + q * res.stderr), level)


@dataclass(frozen=True)
class VarianceProfile:
    """Per-grid-point statistics of the centred rescaled price.

    ``values`` has one row per path: ``(s_{t_n} - s_0 - m N_{t_n}) / sqrt(n)``
    where ``m`` is the pooled mean move.  ``counts`` holds ``N_{t_n}``.
    """

    t: np.ndarray
    times: np.ndarray
    n: float
    variance: np.ndarray
    pooled_mean: float
    values: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)

    @property
    def n_paths(self) -> int:
        return int(self.values.shape[0])

    def pairs(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.t, self.variance)]

    def fit(self, level: float = 0.95) -> SlopeFit:
        return fit_loglog_slope(self.t, self.variance, level)

    def normality_pvalue(self, index: int = -1) -> float:
        """D'Agostino-Pearson test of the standardized values at one grid time."""
        return float(stats.normaltest(self.values[:, index]).pvalue)

    def to_csv(self) -> str:
        lines = ["t,t_n,variance"]
        lines += [f"{a!r},{b!r},{c!r}" for a, b, c in
                  zip(self.t.tolist(), self.times.tolist(), self.variance.tolist())]
        return "\n".join(lines) + "\n"


def _resolve_times(schedule, n: float, t_grid) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ParameterError("t_grid must be a nonempty 1-d sequence")
    if np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise ParameterError("t_grid must be nonnegative and increasing")
    if isinstance(schedule, RegimeReport):
        schedule = schedule.schedule
    times = np.asarray(schedule(t, n) if isinstance(schedule, Schedule) else schedule(t, n),
                       dtype=float)
    return t, times


def _reduce_paths(paths: Iterable[PricePath], times: np.ndarray):
    """One pass over ``paths``: per-path raw sums and counts at ``times`` plus
    the pooled totals of moves up to the last time."""
    sums, counts = [], []
    tot_moves = 0
    tot_n = 0
    last = times[-1]
    for p in paths:
        if p.horizon < last:
            raise ParameterError(
                f"path horizon {p.horizon:.6g} does not cover t_n = {last:.6g}"
            )
        c = p.count(times)
        cs = np.concatenate([[0], np.cumsum(p.directions, dtype=np.int64)])
        sums.append(cs[c])
        counts.append(c)
        tot_moves += int(cs[c[-1]])
        tot_n += int(c[-1])
    if len(sums) < MIN_PATHS:
        raise InsufficientDataError(f"need at least {MIN_PATHS} paths, got {len(sums)}")
    return (np.asarray(sums, dtype=float), np.asarray(counts, dtype=float),
            (tot_moves / tot_n) if tot_n else 0.0)


def variance_profile(paths: Iterable[PricePath], schedule, n: float,
                     t_grid: Sequence[float]) -> VarianceProfile:
    """Variance of the centred rescaled price at each grid time.

    Parameters
    ----------
    paths
        At least ``MIN_PATHS`` price paths whose horizons cover ``t_n`` for
        the largest grid time.  Any iterable is accepted and read once.
    schedule
        A :class:`Schedule`, a :class:`RegimeReport`, or any callable
        ``(t, n) -> t_n``.
    n
        Scale parameter.
    t_grid
        Increasing macroscopic times.
    """
    t, times = _resolve_times(schedule, n, t_grid)
    sums, counts, m = _reduce_paths(paths, times)
    values = (sums - m * counts) / math.sqrt(n)
    var = values.var(axis=0, ddof=1)
    return VarianceProfile(t, times, float(n), var, float(m), values, counts)


@dataclass(frozen=True)
class CountingProfile:
    t: np.ndarray
    times: np.ndarray
    n: float
    mean: np.ndarray
    theory: np.ndarray | None
    shape: str

    def relative_error(self) -> np.ndarray:
        if self.theory is None:
            raise ParameterError("no theoretical profile for this regime")
        both_zero = (self.theory == 0) & (self.mean == 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            err = np.abs(self.mean / self.theory - 1.0)
        return np.where(both_zero, 0.0, err)


def counting_process_rescale(paths, report: RegimeReport, n: float, t_grid,
                             depth: DepthDistribution | None = None,
                             profile: VarianceProfile | None = None) -> CountingProfile:
    """Mean of ``N_{t_n} / n`` over paths next to its predicted profile.

    Standard regimes compare with ``t / E[tau]``; this needs ``depth`` to
    evaluate ``E[tau]``.  For the power-kernel regimes only the shape is
    known: ``t^{2Ck}`` (boundary) or ``t^s`` (critical, renewal index of the
    ``c / A_t`` tail), scaled to agree with the data at the last grid time.
    A precomputed ``profile`` may be passed instead of ``paths``.
    """
    if report.regime is Regime.NO_CONVERGENCE:
        raise ParameterError("no rescaling schedule in this regime")
    if profile is None:
        t, times = _resolve_times(report, n, t_grid)
        _, counts, _ = _reduce_paths(paths, times)
    else:
        t, times, counts = profile.t, profile.times, profile.counts
    mean = counts.mean(axis=0) / n
    theory = None
    if report.regime in (Regime.SUBCRITICAL_STANDARD, Regime.CRITICAL_STANDARD):
        shape = "t/E[tau]"
        if report.regime is Regime.SUBCRITICAL_STANDARD and depth is not None:
            spec = RateSpec(Form(report.form), report.alpha_params, report.lam, report.mu)
            theory = t / mean_tau(depth, spec.clock())
    else:
        if report.regime is Regime.SUBCRITICAL_BOUNDARY:
            beta = 1.0 / report.schedule.power
            shape = "(t/A)^(2Ck)"
        else:
            spec = RateSpec(Form(report.form), report.alpha_params, report.lam, report.mu)
            beta = spec.exponent + 1.0
            shape = "t^s"
        base = t**beta
        if base[-1] > 0 and mean[-1] > 0:
            theory = base * (mean[-1] / base[-1])
    return CountingProfile(t, times, float(n), mean, theory, shape)


# -- truncated means -----------------------------------------------------

class TruncatedKind(str, Enum):
    PSI = "Psi"
    PHI = "Phi"


@dataclass(frozen=True)
class TruncatedMeans:
    kind: TruncatedKind
    n: np.ndarray
    values: np.ndarray

    def pairs(self) -> list[tuple[int, float]]:
        return [(int(a), float(b)) for a, b in zip(self.n, self.values)]

    @property
    def differences(self) -> np.ndarray:
        return np.abs(np.diff(self.values))

    @property
    def n0(self) -> int | None:
        """Smallest listed ``n`` from which successive-difference magnitudes
        decrease strictly to the end of the list."""
        d = self.differences
        if d.size == 0:
            return None
        if np.all(d == 0):
            return int(self.n[0])
        i = d.size - 1
        while i > 0 and d[i] < d[i - 1]:
            i -= 1
        return int(self.n[i]) if i < d.size - 1 else None

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def to_csv(self) -> str:
        return "n,value\n" + "".join(f"{int(a)},{float(b)!r}\n" for a, b in zip(self.n, self.values))


def _psi_threshold(a: float, theta: float) -> float:
    # survival min(1, theta / (t^a log t)) equals 1 up to the root of t^a log t = theta
    g = lambda t: t**a * math.log(t) - theta
    hi = 2.0
    while g(hi) < 0:
        hi *= 2.0
    return optimize.brentq(g, 1.0, hi, xtol=1e-14, rtol=1e-15)


def _log_integral(c: float, u0: float, u1: float, divide: bool) -> float:
    # int_{u0}^{u1} e^{c u} / u du (divide) or int e^{c u} du, split into panels
    if u1 <= u0:
        return 0.0
    if divide:
        f = lambda u: math.exp(c * u) / u
        edges = np.geomspace(u0, u1, 25)  # u0 > 0 here
    else:
        f = lambda u: math.exp(c * u)
        edges = np.linspace(u0, u1, 25)
    return float(sum(integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-13, limit=200)[0]
                     for lo, hi in zip(edges, edges[1:])))


def truncated_mean_sequence(kind, n_list: Sequence[int], theta: float = 1.0,
                            index: float | None = None) -> TruncatedMeans:
    """Truncated means ``E[X_n]`` for a prescribed power-type tail.

    Parameters
    ----------
    kind
        ``"Psi"``: tail ``min(1, theta / (t^a log t))`` for ``t > 1`` with
        ``a = 2Ck`` in ``(0, 1]``, ``X_n = n^{1 - 1/a} tau 1{tau < n^{1/a}}``.
        ``"Phi"``: tail ``min(1, theta / t^s)`` with ``s`` in ``(0, 1]``,
        ``X_n = n^{1 - 1/s} / log n * tau 1{tau < n^{1/s} log n}``.
    n_list
        Scales, each at least 2.
    theta
        Tail constant (nonnegative).
    index
        ``a`` for Psi or ``s`` for Phi.

    Notes
    -----
    With ``L`` the truncation level, ``E[tau 1{tau < L}] = int_0^L S(t) dt -
    L S(L)`` for a continuous tail ``S``.  The integral is evaluated by
    adaptive quadrature in ``u = log t``.
    """
    kind = TruncatedKind(kind)
    if index is None:
        raise ParameterError("tail index is required")
    a = float(index)
    if not 0 < a <= 1:
        raise ParameterError(f"{kind.value} requires an index in (0, 1], got {a}")
    if theta < 0:
        raise ParameterError("theta must be nonnegative")
    ns = np.asarray(n_list, dtype=float)
    if ns.size == 0 or np.any(ns < 2):
        raise ParameterError("every n must be at least 2")
    if theta == 0:
        return TruncatedMeans(kind, ns.astype(np.int64), np.zeros(ns.size))

    out = np.empty(ns.size)
    if kind is TruncatedKind.PSI:
        tstar = _psi_threshold(a, theta)
        surv = lambda t: 1.0 if t <= tstar else theta / (t**a * math.log(t))
        for i, n in enumerate(ns):
            L = n ** (1.0 / a)
            if L <= tstar:
                body = L
            elif a == 1.0:
                body = tstar + theta * (math.log(math.log(L)) - math.log(math.log(tstar)))
            else:
                body = tstar + theta * _log_integral(1.0 - a, math.log(tstar), math.log(L), True)
            out[i] = n ** (1.0 - 1.0 / a) * (body - L * surv(L))
    else:
        tstar = theta ** (1.0 / a)
        surv = lambda t: 1.0 if t <= tstar else theta * t**-a
        for i, n in enumerate(ns):
            L = n ** (1.0 / a) * math.log(n)
            if L <= tstar:
                body = L
            else:
                body = tstar + theta * _log_integral(1.0 - a, math.log(tstar), math.log(L), False)
            out[i] = n ** (1.0 - 1.0 / a) / math.log(n) * (body - L * surv(L))
    return TruncatedMeans(kind, ns.astype(np.int64), out)
