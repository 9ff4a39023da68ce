"""Brute-force survival probabilities for the absorbed birth-death queue.

The chain lives on ``0..cap`` with 0 absorbing and births switched off at
``cap``.  Survival from ``x`` is the backward solution ``u(T) = exp(T Q) 1_{>0}``
evaluated at ``x``; it is computed by uniformization, which for a tridiagonal
generator costs O(cap) per Poisson term.  Time-dependent rates are handled by
running the constant-rate solution to ``A_T`` and, as a second witness, by
stepping the forward equation with alpha-modulated rates through a stiff
integrator.

The truncation error is bounded by the chance that births alone carry the
queue from ``x`` up to ``cap`` before ``T``: a Poisson(lam * A_T) tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, sparse, special, stats

from .depth import QueueStart
from .errors import ParameterError, TruncationError
from .rates import CumulativeClock, Form, RateSpec

__all__ = [
    "TruncatedChain",
    "OracleValue",
    "default_cap",
    "ctmc_survival",
    "ctmc_survival_ode",
    "ctmc_tau_survival",
]

TRUNCATION_LIMIT = 1e-8
_POISSON_TAIL = 1e-17


def default_cap(x: int, lam: float, internal_T: float) -> int:
    """Smallest convenient cap whose truncation bound is below ``TRUNCATION_LIMIT``."""
    m = lam * internal_T
    need = x + 1 + int(stats.poisson.isf(TRUNCATION_LIMIT / 10, m)) if m > 0 else x + 1
    return int(max(10 * x, need, x + 50))


@dataclass(frozen=True)
class TruncatedChain:
    cap: int
    lam: float
    mu: float
    clock: CumulativeClock | None = None

    def __post_init__(self) -> None:
        if self.cap < 1:
            raise ParameterError("cap must be positive")
        if not (self.lam > 0 and self.mu > 0):
            raise ParameterError("lambda and mu must be positive")

    @classmethod
    def for_clock(cls, clock: CumulativeClock, cap: int) -> "TruncatedChain":
        return cls(cap, clock.spec.lam, clock.spec.mu, clock)

    def generator(self) -> sparse.csr_matrix:
        """Sub-generator on states 1..cap (state 0 removed: absorbing)."""
        n = self.cap
        down = np.full(n - 1, self.mu)
        up = np.full(n - 1, self.lam)
        diag = np.full(n, -(self.lam + self.mu))
        diag[-1] = -self.mu
        return sparse.diags([down, diag, up], [-1, 0, 1], format="csr")


@dataclass(frozen=True)
class OracleValue:
    value: float
    truncation_bound: float

    def __float__(self) -> float:
        return self.value


def _truncation_bound(x: int, cap: int, lam: float, internal_T: float) -> float:
    # P[Poisson(lam T) >= cap - x]
    return float(stats.poisson.sf(cap - x - 1, lam * internal_T))


def _uniformized(T: float, chain: TruncatedChain) -> np.ndarray:
    """Survival vector over starting states 1..cap at internal time T."""
    lam, mu, n = chain.lam, chain.mu, chain.cap
    v = np.ones(n)
    if T == 0:
        return v
    rate = lam + mu
    q = rate * T
    # Poisson weights in log space; q can exceed the exp underflow range
    kmax = int(q + 12.0 * math.sqrt(q) + 40)
    k = np.arange(kmax + 1)
    logw = k * math.log(q) - q - special.gammaln(k + 1)
    w = np.exp(logw)
    p_up, p_down = lam / rate, mu / rate
    out = w[0] * v
    for j in range(1, kmax + 1):
        nxt = np.empty_like(v)
        # state i (1-based) jumps to i-1 w.p. p_down (0 contributes 0), to i+1 w.p. p_up
        nxt[0] = p_up * v[1] if n > 1 else p_up * v[0]
        nxt[1:-1] = p_down * v[:-2] + p_up * v[2:]
        if n > 1:
            # births blocked at cap: the suppressed mass stays put
            nxt[-1] = p_down * v[-2] + p_up * v[-1]
        v = nxt
        out += w[j] * v
        if j > q and w[j] < _POISSON_TAIL:
            break
    return out


def _internal_time(T: float, chain: TruncatedChain) -> float:
    return float(chain.clock.cumulative(T)) if chain.clock is not None else float(T)


def ctmc_survival(T: float, x: int, chain: TruncatedChain,
                  check: bool = True) -> OracleValue:
    """Survival from depth ``x`` by uniformization at the changed time ``A_T``.

    Raises :class:`TruncationError` when the truncation bound exceeds 1e-8
    and ``check`` is set.
    """
    if int(x) != x or x < 1:
        raise ParameterError("x must be >= 1")
    if x > chain.cap:
        raise ParameterError("x exceeds the truncation cap")
    if T < 0:
        raise ParameterError("T must be nonnegative")
    a = _internal_time(T, chain)
    bound = _truncation_bound(x, chain.cap, chain.lam, a)
    if check and bound > TRUNCATION_LIMIT:
        raise TruncationError(
            f"truncation bound {bound:.3g} exceeds {TRUNCATION_LIMIT}; raise cap above {chain.cap}"
        )
    vec = _uniformized(a, chain)
    return OracleValue(float(np.clip(vec[x - 1], 0.0, 1.0)), bound)


def ctmc_survival_ode(T: float, x: int, chain: TruncatedChain,
                      rtol: float = 1e-10, atol: float = 1e-13) -> OracleValue:
    """Second witness: forward equation in real time with alpha-modulated
    rates, integrated by an implicit Radau scheme."""
    if chain.clock is None:
        clock = CumulativeClock(RateSpec(Form.CONSTANT, {"c": 1.0}, chain.lam, chain.mu))
    else:
        clock = chain.clock
    t0 = clock.origin
    if T < t0:
        raise ParameterError("T precedes the clock origin")
    a_T = float(clock.cumulative(T))
    bound = _truncation_bound(x, chain.cap, chain.lam, a_T)
    QT = chain.generator().T.tocsc()
    p0 = np.zeros(chain.cap)
    p0[x - 1] = 1.0
    if T == t0:
        return OracleValue(1.0, bound)

    start = t0
    if not np.isfinite(clock.alpha(np.array([t0]))[0]):
        # integrable singularity at the origin: skip an interval carrying
        # less than 1e-14 of internal time; the neglected probability is below
        # (lam + mu) times that
        start = float(clock.inverse(1e-14))

    def rhs(t, p):
        return clock.alpha(t) * (QT @ p)

    def jac(t, p):
        return clock.alpha(t) * QT

    sol = integrate.solve_ivp(
        rhs, (start, T), p0, method="Radau", jac=jac, rtol=rtol, atol=atol,
        first_step=min(1e-6, (T - start) / 10) if start > t0 else None,
    )
    if not sol.success:
        raise RuntimeError(sol.message)
    return OracleValue(float(np.clip(sol.y[:, -1].sum(), 0.0, 1.0)), bound)


def ctmc_tau_survival(T: float, start: QueueStart, lam: float, mu: float,
                      clock: CumulativeClock | None = None,
                      cap: int | None = None) -> OracleValue:
    """P[tau > T] as the product of two independent single-queue survivals."""
    if clock is None:
        clock = CumulativeClock(RateSpec(Form.CONSTANT, {"c": 1.0}, lam, mu))
    a = float(clock.cumulative(T)) if T >= clock.origin else 0.0
    if cap is None:
        cap = default_cap(max(start.x, start.y), lam, a)
    chain = TruncatedChain(cap, lam, mu, clock)
    sx = ctmc_survival(T, start.x, chain)
    sy = sx if start.y == start.x else ctmc_survival(T, start.y, chain)
    return OracleValue(sx.value * sy.value, sx.truncation_bound + sy.truncation_bound)
