"""Distribution of the queue extinction time and the inter-price-change time.

Under constant rates the survival of one queue started at depth ``x`` is

    P[sigma > T] = (mu/lam)^(x/2) int_T^inf (x/s) I_x(2 s sqrt(lam mu)) e^{-s(lam+mu)} ds.

The integrand is evaluated as ``(x/s) * ive(x, z) * exp(-s C)`` with
``z = 2 s sqrt(lam mu)`` and ``C = (sqrt(mu) - sqrt(lam))**2`` so nothing
overflows.  The range is split at a cutoff ``S*``: below it adaptive
quadrature on geometric panels, above it the large-argument Bessel series is
integrated term by term in closed form.

Time-dependent rates ``lam * alpha_t``, ``mu * alpha_t`` only rescale time:
``P[sigma_H > T] = P[sigma_Q > A_T]``.

Asymptotic tails come in three variants for the subcritical case:

``"proof"``
    ``(mu/lam)^(x/2) x / sqrt(pi sqrt(lam mu)) * exp(-T C) / sqrt(T)``.
``"printed"``
    ``(mu/lam)^(x/2) x / (C sqrt(pi sqrt(lam mu))) * exp(-T) / sqrt(T)``.
``"integral"``
    ``(mu/lam)^(x/2) x / (2 sqrt(pi sqrt(lam mu))) int_T^inf s^-1.5 e^{-sC} ds``
    evaluated exactly; it behaves like ``exp(-TC) / (C T^1.5)`` and is the only
    one of the three whose ratio to the exact survival tends to one.

The critical case (``lam == mu``) has a single form, ``x / (lam sqrt(pi T))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate, special

from .depth import DepthDistribution, QueueStart
from .errors import ParameterError, UnsupportedFormError
from .rates import CumulativeClock, Form, RateSpec

__all__ = [
    "Case",
    "TailRegime",
    "Moment",
    "survival_const",
    "extinction_density",
    "survival_timechanged",
    "tau_survival",
    "tau_survival_mixture",
    "tau_density_exact",
    "tail_sigma",
    "tail_tau",
    "tau_density_asymptotic",
    "moment_finiteness",
    "mean_tau",
]

TAIL_VARIANTS = ("proof", "printed", "integral")
_SERIES_TERMS = 4
_PANEL_EPSREL = 1e-12


class Case(str, Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"


class Moment(str, Enum):
    FINITE = "finite"
    INFINITE = "infinite"


@dataclass(frozen=True)
class TailRegime:
    case: Case
    C: float

    def __post_init__(self) -> None:
        if self.C < 0:
            raise ParameterError("C must be nonnegative")
        if (self.C == 0) != (self.case is Case.CRITICAL):
            raise ParameterError("C = 0 exactly when the regime is critical")

    @classmethod
    def from_rates(cls, lam: float, mu: float) -> "TailRegime":
        _check_rates(lam, mu)
        if lam == mu:
            return cls(Case.CRITICAL, 0.0)
        return cls(Case.SUBCRITICAL, (math.sqrt(mu) - math.sqrt(lam)) ** 2)


def _check_rates(lam: float, mu: float) -> None:
    if not (lam > 0 and mu > 0):
        raise ParameterError("lambda and mu must be positive")
    if lam > mu:
        raise ParameterError("closed-form survival requires lambda <= mu")


def _check_depth(x) -> int:
    if int(x) != x or x < 1:
        raise ParameterError("x must be >= 1")
    return int(x)


def _bessel_coeffs(x: int) -> list[float]:
    # a_k(x) in I_x(z) e^{-z} ~ (2 pi z)^{-1/2} sum_k (-1)^k a_k / z^k
    out, num = [], 1.0
    for k in range(_SERIES_TERMS):
        if k:
            num *= 4 * x * x - (2 * k - 1) ** 2
        out.append(num / (math.factorial(k) * 8**k))
    return out


def _neg_half_gamma_tails(S: float, C: float, kmax: int) -> list[float]:
    """J_k = int_S^inf s^{-k-3/2} e^{-C s} ds for k = 0..kmax."""
    if C == 0:
        return [S ** (-k - 0.5) / (k + 0.5) for k in range(kmax + 1)]
    eCS = math.exp(-C * S)
    r = math.sqrt(C * S)
    # J_0 = 2 S^-1/2 e^{-CS} - 2 sqrt(pi C) erfc(sqrt(CS))
    J = [eCS * (2.0 / math.sqrt(S) - 2.0 * math.sqrt(math.pi * C) * special.erfcx(r))]
    for k in range(1, kmax + 1):
        a = k + 0.5
        J.append(S ** (-a) * eCS / a - C / a * J[-1])
    return J


def _series_tail(S: float, x: int, lam: float, mu: float) -> float:
    g = math.sqrt(lam * mu)
    C = (math.sqrt(mu) - math.sqrt(lam)) ** 2
    coeffs = _bessel_coeffs(x)
    J = _neg_half_gamma_tails(S, C, _SERIES_TERMS - 1)
    total = sum((-1) ** k * coeffs[k] / (2 * g) ** k * J[k] for k in range(_SERIES_TERMS))
    return (mu / lam) ** (x / 2) * x / math.sqrt(4 * math.pi * g) * total


def _series_cutoff(x: int, lam: float, mu: float) -> float:
    g = math.sqrt(lam * mu)
    return max(2000.0, 500.0 * x * x) / (2 * g)


def extinction_density(T, x: int, lam: float, mu: float):
    """Density of the extinction time under constant rates (the integrand)."""
    x = _check_depth(x)
    _check_rates(lam, mu)
    s = np.asarray(T, dtype=float)
    g = math.sqrt(lam * mu)
    C = (math.sqrt(mu) - math.sqrt(lam)) ** 2
    pref = (mu / lam) ** (x / 2) * x
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(
            s > 0,
            pref / s * special.ive(x, 2 * g * s) * np.exp(-C * s),
            # I_x(z) ~ (z/2)^x / x!: the density at 0 is mu for x = 1, else 0
            (mu if x == 1 else 0.0),
        )
    return out if np.ndim(T) else float(out)


def _survival_scalar(T: float, x: int, lam: float, mu: float) -> float:
    if T == 0:
        return 1.0
    if math.isinf(T):
        return 0.0
    S = _series_cutoff(x, lam, mu)
    if T >= S:
        return _series_tail(T, x, lam, mu)
    f = lambda s: extinction_density(s, x, lam, mu)
    # geometric panels from T to S; the integrand is smooth and positive
    edges = [T]
    width = max(T, 1.0 / (lam + mu))
    while edges[-1] < S:
        edges.append(min(S, edges[-1] + width))
        width *= 2.0
    total = 0.0
    for a, b in zip(edges, edges[1:]):
        val, _ = integrate.quad(f, a, b, epsabs=1e-300, epsrel=_PANEL_EPSREL, limit=200)
        total += val
    return total + _series_tail(S, x, lam, mu)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(30)
_VECTOR_MIN = 64


def _survival_sorted(T: np.ndarray, x: int, lam: float, mu: float) -> np.ndarray:
    """Survival at many points at once.

    The points below the series cutoff are merged with a geometric grid,
    each gap is integrated by fixed-order Gauss-Legendre, and the pieces are
    accumulated from the cutoff downwards.  Every gap is short relative to
    its distance from 0 (or to the mean holding time), where the integrand
    is smooth, so 30 nodes are ample.
    """
    S = _series_cutoff(x, lam, mu)
    out = np.empty(T.size)
    hi = T >= S
    out[hi] = [_series_tail(float(t), x, lam, mu) for t in T[hi]]
    lo = T[~hi]
    if lo.size == 0:
        return out
    floor = 1.0 / (lam + mu)
    grid = [float(lo.min())]
    while grid[-1] < S:
        grid.append(min(S, grid[-1] + 0.25 * max(grid[-1], floor)))
    knots = np.union1d(lo, grid)
    a, b = knots[:-1], knots[1:]
    half = 0.5 * (b - a)
    pts = (a + half)[:, None] + half[:, None] * _GL_NODES[None, :]
    pieces = half * (extinction_density(pts, x, lam, mu) @ _GL_WEIGHTS)
    # survival at knot i = sum of pieces i.. plus the tail beyond S
    tail = np.cumsum(pieces[::-1])[::-1]
    surv = np.append(tail, 0.0) + _series_tail(S, x, lam, mu)
    out[~hi] = surv[np.searchsorted(knots, lo)]
    out[T == 0] = 1.0
    return out


def survival_const(T, x: int, lam: float, mu: float):
    """P[sigma > T] for a queue started at depth ``x`` under constant rates.

    Accepts a scalar or array ``T``; values are clamped to [0, 1].  Large
    arrays share one pass of quadrature over the sorted points.
    """
    x = _check_depth(x)
    _check_rates(lam, mu)
    T_arr = np.asarray(T, dtype=float)
    if np.any(T_arr < 0):
        raise ParameterError("T must be nonnegative")
    flat = T_arr.ravel()
    if flat.size >= _VECTOR_MIN:
        vals = np.empty(flat.size)
        fin = np.isfinite(flat)
        vals[~fin] = 0.0
        vals[fin] = _survival_sorted(flat[fin], x, lam, mu)
    else:
        vals = np.array([_survival_scalar(float(t), x, lam, mu) for t in flat])
    vals = np.clip(vals, 0.0, 1.0).reshape(T_arr.shape)
    return vals if np.ndim(T) else float(vals)


def survival_timechanged(T, x: int, clock: CumulativeClock):
    """P[sigma > T] under rates ``lam alpha_t``, ``mu alpha_t``; equals the
    constant-rate survival at ``A_T``."""
    spec = clock.spec
    return survival_const(clock.cumulative(T), x, spec.lam, spec.mu)


def tau_survival(T, start: QueueStart, clock: CumulativeClock):
    """P[tau > T]: both queues must survive, independently."""
    a = survival_timechanged(T, start.x, clock)
    if start.y == start.x:
        return a * a
    return a * survival_timechanged(T, start.y, clock)


def tau_survival_mixture(T, f: DepthDistribution, clock: CumulativeClock):
    """P[tau > T] with the starting depths drawn from ``f``."""
    A = clock.cumulative(T)
    spec = clock.spec
    cache: dict[int, np.ndarray] = {}

    def surv(d: int):
        if d not in cache:
            cache[d] = np.asarray(survival_const(A, d, spec.lam, spec.mu))
        return cache[d]

    total = sum(p * surv(x) * surv(y) for (x, y), p in f.support)
    return total if np.ndim(T) else float(total)


def tau_density_exact(T, f: DepthDistribution, clock: CumulativeClock):
    """Exact density of tau, ``-d/dT`` of :func:`tau_survival_mixture`."""
    spec = clock.spec
    A = clock.cumulative(T)
    alpha = clock.alpha(T)
    total = 0.0
    for (x, y), p in f.support:
        ux = survival_const(A, x, spec.lam, spec.mu)
        uy = survival_const(A, y, spec.lam, spec.mu)
        hx = extinction_density(A, x, spec.lam, spec.mu)
        hy = extinction_density(A, y, spec.lam, spec.mu)
        total = total + p * alpha * (hx * uy + ux * hy)
    return total


def _check_variant(variant: str) -> None:
    if variant not in TAIL_VARIANTS:
        raise ParameterError(f"variant must be one of {TAIL_VARIANTS}")


def _regime_of(regime: TailRegime | None, lam: float, mu: float) -> TailRegime:
    expected = TailRegime.from_rates(lam, mu)
    if regime is not None and regime.case is not expected.case:
        raise ParameterError("tail regime does not match lambda and mu")
    return expected


def tail_sigma(T, x: int, regime: TailRegime | None, lam: float, mu: float,
               variant: str = "proof"):
    """Large-T asymptote of P[sigma > T] under constant rates."""
    _check_variant(variant)
    x = _check_depth(x)
    regime = _regime_of(regime, lam, mu)
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0):
        raise ParameterError("T must be positive")
    if regime.case is Case.CRITICAL:
        out = x / (lam * math.sqrt(math.pi)) / np.sqrt(T)
        return out if out.ndim else float(out)
    C, g = regime.C, math.sqrt(lam * mu)
    lead = (mu / lam) ** (x / 2) * x / math.sqrt(math.pi * g)
    if variant == "proof":
        out = lead * np.exp(-T * C) / np.sqrt(T)
    elif variant == "printed":
        out = lead / C * np.exp(-T) / np.sqrt(T)
    else:
        out = 0.5 * lead * np.array([_neg_half_gamma_tails(t, C, 0)[0] for t in T.ravel()])
        out = out.reshape(T.shape)
    return out if np.ndim(out) else float(out)


def _tail_integrand(A, x: int, lam: float, mu: float):
    # -d/dA of the "integral" tail
    g = math.sqrt(lam * mu)
    C = (math.sqrt(mu) - math.sqrt(lam)) ** 2
    return (mu / lam) ** (x / 2) * x / (2 * math.sqrt(math.pi * g)) * A**-1.5 * np.exp(-C * A)


def tail_tau(T, start: QueueStart, clock: CumulativeClock, variant: str = "proof"):
    """Large-T asymptote of P[tau > T] for fixed starting depths."""
    _check_variant(variant)
    spec = clock.spec
    lam, mu = spec.lam, spec.mu
    regime = TailRegime.from_rates(lam, mu)
    A = np.asarray(clock.cumulative(T), dtype=float)
    if np.any(A <= 0):
        raise ParameterError("A_T must be positive")
    x, y = start.x, start.y
    if regime.case is Case.CRITICAL:
        out = x * y / (lam**2 * math.pi) / A
    elif variant == "integral":
        out = tail_sigma(A, x, regime, lam, mu, "integral") * tail_sigma(
            A, y, regime, lam, mu, "integral"
        )
    else:
        C, g = regime.C, math.sqrt(lam * mu)
        pref = (mu / lam) ** ((x + y) / 2) * x * y / (math.pi * g)
        if variant == "printed":
            pref /= C**2
        out = pref * np.exp(-2 * A * C) / A
    return out if np.ndim(out) else float(out)


def tau_density_asymptotic(T, f: DepthDistribution, clock: CumulativeClock,
                           variant: str = "printed"):
    """Large-T asymptote of the density of tau, aggregated over ``f``.

    The default is the printed formula; ``"proof"`` and ``"integral"``
    differentiate the corresponding :func:`tail_tau` variants instead.
    """
    _check_variant(variant)
    if not f.support:
        raise ParameterError("depth distribution has no mass")
    spec = clock.spec
    lam, mu = spec.lam, spec.mu
    regime = TailRegime.from_rates(lam, mu)
    A = np.asarray(clock.cumulative(T), dtype=float)
    if np.any(A <= 0):
        raise ParameterError("A_T must be positive")
    alpha = np.asarray(clock.alpha(T), dtype=float)
    xs, ys, ps = f.xs, f.ys, f.probs
    if regime.case is Case.CRITICAL:
        w = float(np.sum(xs * ys * ps)) / (lam**2 * math.pi)
        out = w * alpha / A**2
    elif variant == "integral":
        out = 0.0
        for x, y, p in zip(xs, ys, ps):
            ux = tail_sigma(A, int(x), regime, lam, mu, "integral")
            uy = tail_sigma(A, int(y), regime, lam, mu, "integral")
            out = out + p * alpha * (
                _tail_integrand(A, int(x), lam, mu) * uy + ux * _tail_integrand(A, int(y), lam, mu)
            )
    else:
        C, g = regime.C, math.sqrt(lam * mu)
        w = float(np.sum((mu / lam) ** ((xs + ys) / 2) * xs * ys * ps)) / (math.pi * g)
        if variant == "printed":
            w /= C**2
        out = w * (2 * C * A + 1) * alpha * np.exp(-2 * A * C) / A**2
    return out if np.ndim(out) else float(out)


def moment_finiteness(n: int, regime: TailRegime, spec: RateSpec) -> Moment:
    """Whether E[tau^n] is finite, from the large-t behaviour of alpha.

    Power-type forms with exponent ``s < -1`` have a bounded clock, so tau is
    infinite with positive probability and every moment diverges.
    """
    if n < 1 or int(n) != n:
        raise ParameterError("n must be a positive integer")
    form = spec.form
    if form is Form.PIECEWISE:
        raise UnsupportedFormError("no asymptotic classification for piecewise alpha")
    critical = regime.case is Case.CRITICAL
    if form is Form.RECIPROCAL or (form in (Form.POWER, Form.POWERLOG) and spec.params["s"] == -1):
        if critical:
            return Moment.INFINITE
        k = spec.params["k"] if form is Form.RECIPROCAL else spec.params["K"]
        return Moment.FINITE if n < 2 * k * regime.C else Moment.INFINITE
    s = spec.exponent
    if s < -1:
        return Moment.INFINITE
    if not critical:
        return Moment.FINITE
    return Moment.FINITE if n < s + 1 else Moment.INFINITE


def mean_tau(f: DepthDistribution, clock: CumulativeClock, upper: float | None = None) -> float:
    """E[tau] = int_0^inf P[tau > t] dt (only finite in subcritical regimes).

    Integrates in the internal clock when alpha is constant; otherwise on the
    real time axis up to ``upper``.
    """
    spec = clock.spec
    if spec.lam >= spec.mu and upper is None:
        return math.inf
    g = lambda t: tau_survival_mixture(clock.origin + t, f, clock)
    hi = upper if upper is not None else _mean_cutoff(f, clock)
    edges = np.concatenate([[0.0], np.geomspace(1e-3, hi, 60)])
    return float(sum(
        integrate.quad(g, a, b, epsabs=1e-13, epsrel=1e-11, limit=200)[0]
        for a, b in zip(edges, edges[1:])
    ))


def _mean_cutoff(f: DepthDistribution, clock: CumulativeClock) -> float:
    spec = clock.spec
    C = (math.sqrt(spec.mu) - math.sqrt(spec.lam)) ** 2
    # both sides survive beyond internal time a with prob ~ e^{-2 C a}
    a = 40.0 / C + 50.0 * max(f.xs.max(), f.ys.max())
    return float(clock.inverse(a) - clock.origin)
