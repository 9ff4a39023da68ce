"""Event-level simulation of the level-one book.

Each side is an absorbed birth-death queue with rates ``lam * alpha_t`` and
``mu * alpha_t``.  Draws are made in the constant-rate chain and mapped through
the inverse clock, which is exact even where alpha is singular.  After every
price change the depths are redrawn from ``f`` and the modulation restarts at
its origin, so the inter-change times are i.i.d.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from . import _kernels
from .depth import DepthDistribution, QueueStart
from .errors import ParameterError
from .rates import CumulativeClock, Form, RateSpec

__all__ = [
    "DepthDistribution",
    "BookConfig",
    "PricePath",
    "ExtinctionDraws",
    "simulate_extinction",
    "simulate_book",
    "replicate",
    "iter_paths",
    "derive_seed",
    "summarize",
]

DEFAULT_STEP_CAP = 10**8


@dataclass(frozen=True)
class ExtinctionDraws:
    times: np.ndarray  # clock time of extinction, A^{-1}(internal)
    internal: np.ndarray  # extinction time of the constant-rate chain
    censored: np.ndarray  # bool mask, step cap reached

    @property
    def durations(self) -> np.ndarray:
        return self.times[~self.censored]


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def simulate_extinction(clock: CumulativeClock, x: int, rng, size: int = 1,
                        step_cap: int = DEFAULT_STEP_CAP,
                        method: str = "timechange") -> ExtinctionDraws:
    """Draw ``size`` extinction times of a queue started at depth ``x``.

    ``method="thinning"`` simulates directly in real time and is only
    available for nonincreasing power-type alpha with a finite value at the
    clock origin; its ``internal`` field is ``A(times)``.
    """
    if int(x) != x or x < 1:
        raise ParameterError("x must be >= 1")
    rng = _as_generator(rng)
    spec = clock.spec
    lam, mu = spec.lam, spec.mu
    xs = np.full(size, int(x), dtype=np.int64)
    if method == "timechange":
        internal, status = _kernels.extinction_batch(
            rng, xs, lam / (lam + mu), lam + mu, step_cap, math.inf
        )
        censored = status == _kernels.CENSORED
        times = np.full(size, math.inf)
        ok = ~censored
        if clock.sup < math.inf:
            ok &= internal < clock.sup
        times[ok] = clock.inverse(internal[ok])
        return ExtinctionDraws(times, internal, censored)
    if method == "thinning":
        K, s = _power_params(spec)
        if clock.origin <= 0 and s < 0:
            raise ParameterError("thinning needs a positive origin for singular alpha")
        times, status = _kernels.thinning_extinction_batch(
            rng, xs, lam, mu, K, s, clock.origin, step_cap
        )
        censored = status == _kernels.CENSORED
        internal = np.asarray(clock.cumulative(times), dtype=float)
        return ExtinctionDraws(times, internal, censored)
    raise ParameterError(f"unknown method {method!r}")


def _power_params(spec: RateSpec) -> tuple[float, float]:
    p = spec.params
    if spec.form is Form.CONSTANT:
        return p["c"], 0.0
    if spec.form is Form.POWER and p["s"] <= 0:
        return p["K"], p["s"]
    if spec.form is Form.RECIPROCAL:
        return p["k"], -1.0
    raise ParameterError("thinning requires a nonincreasing power-type alpha")


@dataclass(frozen=True)
class BookConfig:
    clock: CumulativeClock
    depth: DepthDistribution
    x0: int = 1
    y0: int = 1
    seed: int = 0
    s0: int = 0
    step_cap: int = DEFAULT_STEP_CAP
    mode: str = "race"

    def __post_init__(self) -> None:
        QueueStart(self.x0, self.y0)
        if self.mode not in ("race", "independent"):
            raise ParameterError("mode must be 'race' or 'independent'")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")

    def with_seed(self, seed: int) -> "BookConfig":
        return BookConfig(self.clock, self.depth, self.x0, self.y0, seed,
                          self.s0, self.step_cap, self.mode)

    def to_dict(self) -> dict:
        return {
            "rate": self.clock.spec.to_dict(),
            "depth": self.depth.to_pairs(),
            "x0": self.x0,
            "y0": self.y0,
            "seed": int(self.seed),
            "s0": self.s0,
            "step_cap": self.step_cap,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BookConfig":
        try:
            spec = RateSpec.from_dict(d["rate"])
            depth = DepthDistribution.from_pairs(d["depth"])
            return cls(
                CumulativeClock(spec),
                depth,
                int(d.get("x0", 1)),
                int(d.get("y0", 1)),
                int(d.get("seed", 0)),
                int(d.get("s0", 0)),
                int(d.get("step_cap", DEFAULT_STEP_CAP)),
                d.get("mode", "race"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ParameterError):
                raise
            raise ParameterError(f"bad book config: {exc}") from None


@dataclass
class PricePath:
    """Price-change epochs ``S_n`` and directions ``X_n`` of one path.

    ``horizon`` is the time up to which the path is complete; for a path
    that hit the step cap it is the last epoch before the censored draw.
    """

    epochs: np.ndarray
    directions: np.ndarray
    s0: int = 0
    horizon: float = math.inf
    censored: bool = False
    internal: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.epochs = np.asarray(self.epochs, dtype=float)
        self.directions = np.asarray(self.directions, dtype=np.int8)
        if self.epochs.shape != self.directions.shape:
            raise ParameterError("epochs and directions differ in length")

    @property
    def n_changes(self) -> int:
        return int(self.epochs.size)

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.epochs, prepend=0.0)

    @property
    def prices(self) -> np.ndarray:
        return self.s0 + np.cumsum(self.directions, dtype=np.int64)

    def count(self, t) -> np.ndarray:
        """N_t, the number of price changes in [0, t]."""
        return np.searchsorted(self.epochs, t, side="right")

    def price_at(self, t):
        n = self.count(t)
        csum = np.concatenate([[0], np.cumsum(self.directions, dtype=np.int64)])
        return self.s0 + csum[n]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "S_n", "X_n", "price"])
        for i, (e, d, p) in enumerate(zip(self.epochs, self.directions, self.prices), 1):
            w.writerow([i, repr(float(e)), int(d), int(p)])
        return buf.getvalue()

    def summary(self) -> dict:
        return summarize([self])


def summarize(paths: Iterable[PricePath]) -> dict:
    paths = list(paths)
    taus = [p.durations for p in paths if not p.censored and p.n_changes]
    dirs = [p.directions for p in paths if p.n_changes]
    all_tau = np.concatenate(taus) if taus else np.empty(0)
    all_dir = np.concatenate(dirs) if dirs else np.empty(0)
    return {
        "n_paths": len(paths),
        "n_changes": int(sum(p.n_changes for p in paths)),
        "censored_count": int(sum(p.censored for p in paths)),
        "mean_tau": float(all_tau.mean()) if all_tau.size else None,
        "p_up": float((all_dir > 0).mean()) if all_dir.size else None,
    }


def _draw_depths(rng: np.random.Generator, f: DepthDistribution, m: int):
    idx = np.searchsorted(f.cdf(), rng.random(m), side="right")
    return f.xs[idx], f.ys[idx]


def _races(config: BookConfig, rng, xs, ys, s_limit):
    spec = config.clock.spec
    lam, mu = spec.lam, spec.mu
    if config.mode == "race":
        return _kernels.race_batch(
            rng, xs, ys, lam / (lam + mu), 2.0 * (lam + mu), config.step_cap, s_limit
        )
    p_up, rate = lam / (lam + mu), lam + mu
    sa, st_a = _kernels.extinction_batch(rng, xs, p_up, rate, config.step_cap, math.inf)
    sb, st_b = _kernels.extinction_batch(rng, ys, p_up, rate, config.step_cap, math.inf)
    tie = sa == sb
    coin = rng.random(xs.size) < 0.5
    ask_first = (sa < sb) | (tie & coin)
    times = np.minimum(sa, sb)
    dirs = np.where(ask_first, 1, -1).astype(np.int8)
    censored = np.where(ask_first, st_a, st_b) == _kernels.CENSORED
    status = np.where(censored, _kernels.CENSORED, _kernels.DONE).astype(np.int8)
    status[(status == _kernels.DONE) & (times > s_limit)] = _kernels.BEYOND
    return times, dirs, status


def simulate_book(config: BookConfig, horizon: float | None = None,
                  n_changes: int | None = None, keep_internal: bool = False) -> PricePath:
    """Simulate price changes up to ``horizon`` or until ``n_changes`` occur."""
    if (horizon is None) == (n_changes is None):
        raise ParameterError("give exactly one of horizon or n_changes")
    if horizon is not None and not horizon >= 0:
        raise ParameterError("horizon must be nonnegative")
    if n_changes is not None and n_changes < 0:
        raise ParameterError("n_changes must be nonnegative")
    rng = np.random.default_rng(int(config.seed))
    clock = config.clock
    origin = clock.origin
    sup = clock.sup

    epochs: list[np.ndarray] = []
    dirs: list[np.ndarray] = []
    internals: list[np.ndarray] = []
    t = 0.0
    count = 0
    first = True
    batch = 64
    censored = False
    while True:
        if n_changes is not None and count >= n_changes:
            break
        remaining = math.inf if horizon is None else horizon - t
        if n_changes is not None:
            batch = n_changes - count
        s_limit = math.inf if remaining == math.inf else float(clock.cumulative(origin + remaining))
        s_limit = min(s_limit, sup)
        xs, ys = _draw_depths(rng, config.depth, batch)
        if first:
            xs[0], ys[0] = config.x0, config.y0
            first = False
        s, d, status = _races(config, rng, xs, ys, s_limit)
        # stop at the first draw that does not complete inside the horizon
        bad = np.flatnonzero(status != _kernels.DONE)
        stop = bad[0] if bad.size else batch
        tau = clock.inverse(s[:stop]) - origin if stop else np.empty(0)
        cum = t + np.cumsum(tau)
        if horizon is not None:
            within = int(np.searchsorted(cum, horizon, side="right"))
        else:
            within = stop
        epochs.append(cum[:within])
        dirs.append(d[:within])
        internals.append(s[:within])
        count += within
        if within:
            t = float(cum[within - 1])
        if within < stop:
            break
        if stop < batch:
            censored = bool(status[stop] == _kernels.CENSORED)
            break
        # size the next batch from what has been seen so far
        if horizon is not None and count:
            est = (horizon - t) / max(t / count, 1e-300)
            batch = int(min(max(1.25 * est + 16, 64), 1 << 20))
        else:
            batch = min(batch * 2, 1 << 20)

    ep = np.concatenate(epochs) if epochs else np.empty(0)
    path = PricePath(
        ep,
        np.concatenate(dirs) if dirs else np.empty(0, dtype=np.int8),
        config.s0,
        horizon=(t if censored else (horizon if horizon is not None else t)),
        censored=censored,
        internal=np.concatenate(internals) if keep_internal and internals else None,
    )
    return path


def derive_seed(master_seed: int, index: int) -> int:
    """Per-path seed; depends only on the master seed and the path index."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _run_one(args):
    config, seed, horizon, n_changes = args
    return simulate_book(config.with_seed(seed), horizon=horizon, n_changes=n_changes)


def iter_paths(config: BookConfig, n_paths: int, horizon: float | None = None,
               master_seed: int = 0, n_changes: int | None = None,
               n_jobs: int = 1) -> Iterator[PricePath]:
    """Yield ``n_paths`` independent paths in index order.

    Path ``i`` uses ``derive_seed(master_seed, i)``, so the sequence does not
    depend on ``n_jobs``.  Paths are produced lazily, which keeps memory flat
    when each path carries many price changes.
    """
    if n_paths < 1:
        raise ParameterError("n_paths must be >= 1")
    tasks = ((config, derive_seed(master_seed, i), horizon, n_changes) for i in range(n_paths))
    if n_jobs == 1:
        for a in tasks:
            yield _run_one(a)
        return
    from concurrent.futures import ProcessPoolExecutor

    chunk = max(1, min(64, n_paths // (4 * n_jobs)))
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        yield from pool.map(_run_one, tasks, chunksize=chunk)


def replicate(config: BookConfig, n_paths: int, horizon: float | None = None,
              master_seed: int = 0, n_changes: int | None = None,
              n_jobs: int = 1) -> list[PricePath]:
    """``n_paths`` independent paths as a list (see :func:`iter_paths`)."""
    return list(iter_paths(config, n_paths, horizon, master_seed, n_changes, n_jobs))


def paths_to_json(paths: list[PricePath]) -> str:
    return json.dumps(summarize(paths), sort_keys=True)
