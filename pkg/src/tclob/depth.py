"""Queue starting states and the depth redraw law ``f`` on N^2."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ParameterError

__all__ = ["QueueStart", "DepthDistribution"]


@dataclass(frozen=True)
class QueueStart:
    x: int  # ask depth
    y: int  # bid depth

    def __post_init__(self) -> None:
        if int(self.x) != self.x or int(self.y) != self.y:
            raise ParameterError("queue depths must be integers")
        if self.x < 1 or self.y < 1:
            raise ParameterError("queue depths must be >= 1")


@dataclass(frozen=True)
class DepthDistribution:
    """Finite-support law of (ask depth, bid depth) after a price change."""

    support: tuple[tuple[tuple[int, int], float], ...]

    def __post_init__(self) -> None:
        items = tuple(((int(x), int(y)), float(p)) for (x, y), p in self.support)
        if not items:
            raise ParameterError("depth distribution has empty support")
        for (x, y), p in items:
            if x < 1 or y < 1:
                raise ParameterError("depths in the support must be >= 1")
            if not p > 0:
                raise ParameterError("support probabilities must be positive")
        total = sum(p for _, p in items)
        if abs(total - 1.0) > 1e-12:
            raise ParameterError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "support", items)

    @classmethod
    def point(cls, x: int, y: int) -> "DepthDistribution":
        return cls((((x, y), 1.0),))

    @classmethod
    def uniform(cls, xs: Iterable[int], ys: Iterable[int] | None = None) -> "DepthDistribution":
        xs = list(xs)
        ys = xs if ys is None else list(ys)
        cells = [(x, y) for x in xs for y in ys]
        return cls(tuple((c, 1.0 / len(cells)) for c in cells))

    @classmethod
    def from_pairs(cls, pairs: Iterable) -> "DepthDistribution":
        """Build from ``[[x, y, p], ...]`` as stored in config JSON."""
        return cls(tuple(((int(x), int(y)), float(p)) for x, y, p in pairs))

    def to_pairs(self) -> list[list]:
        return [[x, y, p] for (x, y), p in self.support]

    @property
    def xs(self) -> np.ndarray:
        return np.array([c[0] for c, _ in self.support], dtype=np.int64)

    @property
    def ys(self) -> np.ndarray:
        return np.array([c[1] for c, _ in self.support], dtype=np.int64)

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.support])

    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.probs)
        c[-1] = 1.0
        return c

    def is_symmetric(self) -> bool:
        table = {c: p for c, p in self.support}
        return all(abs(table.get((y, x), 0.0) - p) <= 1e-12 for (x, y), p in self.support)
