"""Rate modulation alpha_t and its cumulative clock A_t.

Both queues share one modulation: limit orders arrive at ``lam * alpha_t`` and
market orders plus cancellations at ``mu * alpha_t``.  Every time change in the
package goes through :class:`CumulativeClock`, which integrates alpha from the
domain origin and inverts that integral exactly (closed form where one exists).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from scipy import integrate

from .errors import DivergenceError, DomainError, ParameterError, RangeError

__all__ = [
    "Form",
    "RateSpec",
    "CumulativeClock",
    "eval_alpha",
    "cumulative",
    "inverse_cumulative",
    "parse_alpha_flag",
]

DEFAULT_SINGULAR_ORIGIN = 1.0
ROOT_MAXITER = 100


class Form(str, Enum):
    CONSTANT = "constant"
    POWER = "power"
    POWERLOG = "powerlog"
    RECIPROCAL = "reciprocal"
    PIECEWISE = "piecewise"


_REQUIRED = {
    Form.CONSTANT: ("c",),
    Form.POWER: ("K", "s"),
    Form.POWERLOG: ("K", "s", "m"),
    Form.RECIPROCAL: ("k", "t0"),
    Form.PIECEWISE: ("breakpoints", "values"),
}


@dataclass(frozen=True)
class RateSpec:
    """Parametric modulation plus the base rates ``lam`` (limit) and ``mu``
    (market + cancel).

    ``params`` holds the family parameters, e.g. ``{"K": 0.17, "s": -0.46}``
    for ``alpha_t = K t**s``.  ``origin`` overrides the start of the time
    domain; it is required to be positive for forms whose integral diverges
    at zero and defaults to one second there.
    """

    form: Form
    params: dict[str, Any]
    lam: float = 1.0
    mu: float = 1.0
    origin: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "form", Form(self.form))
        params = dict(self.params)
        missing = [k for k in _REQUIRED[self.form] if k not in params]
        if missing:
            raise ParameterError(f"{self.form.value} form needs parameters {missing}")
        if not (self.lam > 0 and self.mu > 0):
            raise ParameterError("lambda and mu must be positive")
        if self.form is Form.PIECEWISE:
            bp = tuple(float(b) for b in params["breakpoints"])
            vals = tuple(float(v) for v in params["values"])
            if len(bp) == 0 or len(bp) != len(vals):
                raise ParameterError("piecewise form needs one value per breakpoint")
            if any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
                raise ParameterError("breakpoints must be strictly increasing")
            if any(v < 0 for v in vals):
                raise ParameterError("piecewise values must be nonnegative")
            params["breakpoints"], params["values"] = bp, vals
        else:
            params = {k: float(v) for k, v in params.items()}
        object.__setattr__(self, "params", params)

        if self.form is Form.CONSTANT and params["c"] < 0:
            raise ParameterError("constant modulation must be nonnegative")
        if self.form in (Form.POWER, Form.POWERLOG) and params["K"] <= 0:
            raise ParameterError("power coefficient K must be positive")
        if self.form is Form.POWERLOG and params["m"] < 0:
            raise ParameterError("log exponent m must be nonnegative")
        if self.form is Form.RECIPROCAL:
            if params["t0"] <= 0:
                raise ParameterError("reciprocal form requires t0 > 0")
            if params["k"] <= 0:
                raise ParameterError("reciprocal coefficient k must be positive")
        if self.origin is not None:
            o = float(self.origin)
            if o < 0:
                raise ParameterError("origin must be nonnegative")
            if o == 0 and self._singular_at_zero():
                raise ParameterError(
                    "alpha is not integrable at 0 for this form; supply a positive origin"
                )
            if self.form is Form.PIECEWISE and o < params["breakpoints"][0]:
                raise ParameterError("origin precedes the first breakpoint")
            object.__setattr__(self, "origin", o)

    def _singular_at_zero(self) -> bool:
        if self.form is Form.RECIPROCAL:
            return True
        if self.form is Form.POWER:
            return self.params["s"] <= -1
        if self.form is Form.POWERLOG:
            # log(t) changes sign below 1; the family is only used on [1, inf)
            return self.params["m"] > 0 or self.params["s"] <= -1
        return False

    @property
    def domain_origin(self) -> float:
        if self.origin is not None:
            return self.origin
        if self.form is Form.RECIPROCAL:
            return self.params["t0"]
        if self.form is Form.PIECEWISE:
            return self.params["breakpoints"][0]
        if self._singular_at_zero():
            return DEFAULT_SINGULAR_ORIGIN
        return 0.0

    @property
    def exponent(self) -> float | None:
        """Power-law exponent of alpha at infinity (``-1`` for reciprocal)."""
        if self.form in (Form.POWER, Form.POWERLOG):
            return self.params["s"]
        if self.form is Form.CONSTANT:
            return 0.0
        if self.form is Form.RECIPROCAL:
            return -1.0
        return None

    def clock(self) -> "CumulativeClock":
        return CumulativeClock(self)

    def with_rates(self, lam: float, mu: float) -> "RateSpec":
        return RateSpec(self.form, self.params, lam, mu, self.origin)

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        params = {
            k: list(v) if isinstance(v, tuple) else v for k, v in self.params.items()
        }
        out: dict[str, Any] = {
            "form": self.form.value,
            "params": params,
            "lambda": self.lam,
            "mu": self.mu,
        }
        if self.origin is not None:
            out["origin"] = self.origin
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RateSpec":
        try:
            return cls(
                Form(d["form"]),
                dict(d.get("params", {})),
                float(d["lambda"]),
                float(d["mu"]),
                d.get("origin"),
            )
        except KeyError as exc:
            raise ParameterError(f"rate spec missing field {exc}") from None
        except ValueError as exc:
            raise ParameterError(str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RateSpec":
        return cls.from_dict(json.loads(text))


def parse_alpha_flag(text: str, lam: float, mu: float) -> RateSpec:
    """Parse the command-line grammar ``constant:c``, ``power:K,s``,
    ``powerlog:K,s,m`` or ``recip:k,t0``."""
    name, _, rest = text.partition(":")
    try:
        nums = [float(v) for v in rest.split(",")] if rest else []
    except ValueError:
        raise ParameterError(f"cannot parse rate form {text!r}") from None
    table = {
        "constant": (Form.CONSTANT, ("c",)),
        "power": (Form.POWER, ("K", "s")),
        "powerlog": (Form.POWERLOG, ("K", "s", "m")),
        "recip": (Form.RECIPROCAL, ("k", "t0")),
    }
    if name not in table:
        raise ParameterError(f"unknown rate form {name!r}")
    form, keys = table[name]
    if len(nums) != len(keys):
        raise ParameterError(f"{name} expects {len(keys)} numbers, got {len(nums)}")
    return RateSpec(form, dict(zip(keys, nums)), lam, mu)


def _powlog_antiderivative(c: float, m: int, L: np.ndarray) -> np.ndarray:
    # int_0^L v^m exp(c v) dv for integer m >= 0, c != 0
    L = np.asarray(L, dtype=float)
    total = np.zeros_like(L)
    coef = 1.0
    for j in range(m + 1):
        # term (-1)^j m!/(m-j)! L^(m-j) / c^(j+1)
        total = total + coef * L ** (m - j) / c ** (j + 1)
        coef *= -(m - j)
    closed = np.exp(c * L) * total - (-1.0) ** m * math.factorial(m) / c ** (m + 1)
    small = np.abs(c * L) <= 2.0
    if not np.any(small):
        return closed
    # near zero the closed form cancels; sum c^k L^(m+k+1) / (k! (m+k+1)) instead
    Ls = np.where(small, L, 0.0)
    series = np.zeros_like(L)
    term = Ls ** (m + 1)
    for k in range(60):
        series = series + term / (m + k + 1)
        term = term * c * Ls / (k + 1)
    return np.where(small, series, closed)


@dataclass(frozen=True)
class CumulativeClock:
    """``A(t) = int_origin^t alpha(u) du`` with an exact inverse.

    All methods accept scalars or numpy arrays.
    """

    spec: RateSpec
    origin: float = field(default=None)  # type: ignore[assignment]
    quad_tol: float = 1e-12

    def __post_init__(self) -> None:
        if self.origin is None:
            object.__setattr__(self, "origin", self.spec.domain_origin)
        elif self.origin < self.spec.domain_origin:
            raise DomainError("clock origin precedes the domain of alpha")

    # -- alpha ---------------------------------------------------------
    def alpha(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.spec.domain_origin):
            raise DomainError(f"t below the domain origin {self.spec.domain_origin}")
        p = self.spec.params
        form = self.spec.form
        with np.errstate(divide="ignore"):
            if form is Form.CONSTANT:
                out = np.full_like(t_arr, p["c"])
            elif form is Form.POWER:
                out = p["K"] * t_arr ** p["s"]
            elif form is Form.POWERLOG:
                out = p["K"] * t_arr ** p["s"] * np.log(t_arr) ** p["m"]
            elif form is Form.RECIPROCAL:
                out = p["k"] / t_arr
            else:
                bp = np.asarray(p["breakpoints"])
                vals = np.asarray(p["values"])
                out = vals[np.searchsorted(bp, t_arr, side="right") - 1]
        return out if np.ndim(t) else float(out)

    # -- A(t) ----------------------------------------------------------
    @property
    def sup(self) -> float:
        """Limit of A(t) as t -> infinity."""
        p, form, t0 = self.spec.params, self.spec.form, self.origin
        if form is Form.POWER and p["s"] < -1:
            return p["K"] * t0 ** (p["s"] + 1) / (-(p["s"] + 1))
        if form is Form.POWERLOG and p["s"] < -1:
            return float(self._quad(t0, np.inf))
        if form is Form.PIECEWISE and p["values"][-1] == 0:
            return float(self.cumulative(p["breakpoints"][-1]))
        if form is Form.CONSTANT and p["c"] == 0:
            return 0.0
        return math.inf

    def _quad(self, a: float, b: float) -> float:
        val, _ = integrate.quad(
            self.alpha, a, b, epsabs=self.quad_tol, epsrel=self.quad_tol, limit=500
        )
        return val

    def cumulative(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.origin):
            raise DomainError(f"t below the clock origin {self.origin}")
        p, form, t0 = self.spec.params, self.spec.form, self.origin
        if form is Form.CONSTANT:
            out = p["c"] * (t_arr - t0)
        elif form is Form.POWER:
            s1 = p["s"] + 1.0
            if s1 == 0:
                out = p["K"] * np.log(t_arr / t0)
            elif t0 > 0:
                # t0^s1 (exp(s1 log(t/t0)) - 1) / s1, stable as s1 -> 0
                out = p["K"] * t0**s1 * np.expm1(s1 * np.log(t_arr / t0)) / s1
            else:
                out = p["K"] * t_arr**s1 / s1
        elif form is Form.RECIPROCAL:
            out = p["k"] * np.log(t_arr / t0)
        elif form is Form.POWERLOG:
            out = self._cumulative_powerlog(t_arr)
        else:
            out = self._cumulative_piecewise(t_arr)
        if not np.all(np.isfinite(out)):
            raise DivergenceError("cumulative modulation is infinite on the interval")
        return out if np.ndim(t) else float(out)

    def _cumulative_powerlog(self, t: np.ndarray) -> np.ndarray:
        p, t0 = self.spec.params, self.origin
        m = p["m"]
        if float(m).is_integer() and t0 >= 1.0:
            m = int(m)
            c = p["s"] + 1.0
            lo, hi = math.log(t0), np.log(t)
            if c == 0:
                return p["K"] * (hi ** (m + 1) - lo ** (m + 1)) / (m + 1)
            return p["K"] * (
                _powlog_antiderivative(c, m, hi)
                - _powlog_antiderivative(c, m, np.asarray(lo))
            )
        return self.cumulative_quadrature(t)

    def cumulative_quadrature(self, t):
        """A(t) by adaptive quadrature; a cross-check for the closed forms."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.array([self._quad(self.origin, ti) for ti in t_arr.ravel()])
        out = out.reshape(t_arr.shape)
        return out if np.ndim(t) else float(out[0])

    def _cumulative_piecewise(self, t: np.ndarray) -> np.ndarray:
        bp = np.asarray(self.spec.params["breakpoints"])
        vals = np.asarray(self.spec.params["values"])
        knots = np.concatenate([[0.0], np.cumsum(vals[:-1] * np.diff(bp))])

        def raw(u):
            idx = np.searchsorted(bp, u, side="right") - 1
            return knots[idx] + vals[idx] * (u - bp[idx])

        return raw(t) - raw(np.asarray(self.origin))

    # -- inverse ---------------------------------------------------------
    def inverse(self, a):
        """Smallest t >= origin with A(t) = a."""
        a_arr = np.asarray(a, dtype=float)
        if np.any(a_arr < 0):
            raise RangeError("cumulative value must be nonnegative")
        sup = self.sup
        if np.any(a_arr >= sup) and not (sup == 0 and np.all(a_arr == 0)):
            raise RangeError(f"value exceeds sup A = {sup}")
        p, form, t0 = self.spec.params, self.spec.form, self.origin
        if form is Form.CONSTANT:
            out = t0 + a_arr / p["c"] if p["c"] > 0 else np.full_like(a_arr, t0)
        elif form is Form.POWER:
            s1 = p["s"] + 1.0
            if s1 == 0:
                out = t0 * np.exp(a_arr / p["K"])
            elif t0 > 0:
                out = t0 * np.exp(np.log1p(s1 * a_arr / (p["K"] * t0**s1)) / s1)
            else:
                out = (s1 * a_arr / p["K"]) ** (1.0 / s1)
        elif form is Form.RECIPROCAL:
            out = t0 * np.exp(a_arr / p["k"])
        elif form is Form.PIECEWISE:
            out = self._inverse_piecewise(a_arr)
        else:
            out = np.vectorize(self._inverse_newton, otypes=[float])(a_arr)
        return out if np.ndim(a) else float(out)

    def _inverse_piecewise(self, a: np.ndarray) -> np.ndarray:
        bp = np.asarray(self.spec.params["breakpoints"], dtype=float)
        starts = np.concatenate([[self.origin], bp[bp > self.origin]])
        rates = self.alpha(starts)
        knots = self.cumulative(starts)
        # last segment whose knot is strictly below a (or the first one)
        idx = np.clip(np.searchsorted(knots, a, side="left") - 1, 0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = starts[idx] + np.where(rates[idx] > 0, (a - knots[idx]) / rates[idx], 0.0)
        return out

    def _inverse_newton(self, a: float) -> float:
        t0 = self.origin
        if a == 0:
            return t0
        tol = 1e-10 * max(1.0, a)
        lo, hi = t0, t0 + max(1.0, t0)
        for _ in range(ROOT_MAXITER):
            if self.cumulative(hi) >= a:
                break
            lo, hi = hi, t0 + 2.0 * (hi - t0)
        else:
            raise RangeError("could not bracket the inverse")
        t = 0.5 * (lo + hi)
        for _ in range(ROOT_MAXITER):
            g = self.cumulative(t) - a
            if g == 0:
                return t
            if g > 0:
                hi = t
            else:
                lo = t
            d = self.alpha(t)
            step = t - g / d if d > 0 else 0.5 * (lo + hi)
            new = step if lo < step < hi else 0.5 * (lo + hi)
            # converged in a, and the bracket or Newton step is tight in t
            if abs(g) <= tol and (abs(new - t) <= 1e-12 * max(1.0, t)
                                  or hi - lo <= 1e-12 * max(1.0, t)):
                return new
            t = new
        return t


def eval_alpha(spec: RateSpec, t):
    return CumulativeClock(spec).alpha(t)


def cumulative(clock: CumulativeClock, t):
    return clock.cumulative(t)


def inverse_cumulative(clock: CumulativeClock, a):
    return clock.inverse(a)
