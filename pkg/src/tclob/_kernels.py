"""Compiled inner loops for the event-level simulation.

All kernels take a ``numpy.random.Generator`` so every path keeps its own
PCG64 stream.  Internal (constant-rate) time is never accumulated step by
step: while the relevant queues are nonempty the total event rate is constant,
so the elapsed internal time after ``k`` events is Gamma(k, 1/rate).  When a
time limit is given, the walk pauses every ``checkpoint`` events to draw the
elapsed time of that segment, which keeps the draw exact while bounding work.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# status codes
DONE = 0
CENSORED = 1  # step cap reached
BEYOND = 2  # internal time limit exceeded before absorption


@njit(cache=True)
def _checkpoint(rate, remaining):
    if not math.isfinite(remaining):
        return np.iinfo(np.int64).max
    m = rate * remaining
    return np.int64(m + 10.0 * math.sqrt(m) + 10.0)


@njit(cache=True)
def extinction_batch(rng, xs, p_up, rate, step_cap, s_limit):
    """Absorption of single birth-death queues started at ``xs``."""
    n = xs.shape[0]
    times = np.empty(n)
    status = np.zeros(n, dtype=np.int8)
    for i in range(n):
        pos = xs[i]
        elapsed = 0.0
        seg = 0
        total = 0
        check = _checkpoint(rate, s_limit)
        st = DONE
        while pos > 0:
            if rng.random() < p_up:
                pos += 1
            else:
                pos -= 1
            seg += 1
            total += 1
            if total >= step_cap and pos > 0:
                st = CENSORED
                break
            if seg >= check and pos > 0:
                elapsed += rng.gamma(seg, 1.0) / rate
                seg = 0
                if elapsed > s_limit:
                    st = BEYOND
                    break
                check = _checkpoint(rate, s_limit - elapsed)
        if st == DONE and seg > 0:
            elapsed += rng.gamma(seg, 1.0) / rate
            if elapsed > s_limit:
                st = BEYOND
        times[i] = elapsed
        status[i] = st
    return times, status


@njit(cache=True)
def race_batch(rng, xs, ys, p_up, rate, step_cap, s_limit):
    """Run both queues until the first one empties.

    ``rate`` is the total event rate of the pair.  Direction is +1 when the
    ask queue (``xs``) empties first.
    """
    n = xs.shape[0]
    times = np.empty(n)
    dirs = np.zeros(n, dtype=np.int8)
    status = np.zeros(n, dtype=np.int8)
    half_up = 0.5 * p_up
    for i in range(n):
        a = xs[i]
        b = ys[i]
        elapsed = 0.0
        seg = 0
        total = 0
        check = _checkpoint(rate, s_limit)
        st = DONE
        while True:
            u = rng.random()
            if u < 0.5:
                if u < half_up:
                    a += 1
                else:
                    a -= 1
            else:
                if u - 0.5 < half_up:
                    b += 1
                else:
                    b -= 1
            seg += 1
            total += 1
            if a == 0 or b == 0:
                break
            if total >= step_cap:
                st = CENSORED
                break
            if seg >= check:
                elapsed += rng.gamma(seg, 1.0) / rate
                seg = 0
                if elapsed > s_limit:
                    st = BEYOND
                    break
                check = _checkpoint(rate, s_limit - elapsed)
        if st == DONE:
            elapsed += rng.gamma(seg, 1.0) / rate
            if elapsed > s_limit:
                st = BEYOND
            dirs[i] = 1 if a == 0 else -1
        times[i] = elapsed
        status[i] = st
    return times, dirs, status


@njit(cache=True)
def thinning_extinction_batch(rng, xs, lam, mu, K, s, t0, step_cap):
    """Direct simulation in real time for ``alpha_t = K t^s`` with ``s <= 0``
    on ``[t0, inf)``; alpha is nonincreasing so its current value bounds the
    future intensity."""
    n = xs.shape[0]
    times = np.empty(n)
    status = np.zeros(n, dtype=np.int8)
    base = lam + mu
    p_up = lam / base
    for i in range(n):
        pos = xs[i]
        t = t0
        events = 0
        st = DONE
        while pos > 0:
            bound = base * K * t**s
            t += rng.exponential(1.0 / bound)
            if rng.random() * bound <= base * K * t**s:
                if rng.random() < p_up:
                    pos += 1
                else:
                    pos -= 1
                events += 1
                if events >= step_cap and pos > 0:
                    st = CENSORED
                    break
        times[i] = t
        status[i] = st
    return times, status
