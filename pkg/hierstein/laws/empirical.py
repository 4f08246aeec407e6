# hierstein/laws/empirical.py
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from hierstein.errors import DegenerateLawError, EmptyLawError, NonFiniteValueError
from hierstein.laws.discrete import DiscreteDistribution, make_discrete
from hierstein.utils.numeric import compensated_sum


@dataclass(frozen=True, eq=False)
class EmpiricalSample:
    """Sorted Monte Carlo draws; every value carries weight 1/N.

    `seed` and `stream` record where the draws came from (master seed, spawn key).
    """

    values: np.ndarray
    seed: Optional[int] = None
    stream: Tuple[int, ...] = ()

    kind = "empirical"

    def __post_init__(self):
        v = np.sort(np.array(self.values, dtype=np.float64, copy=True).ravel(), kind="stable")
        if v.size == 0:
            raise EmptyLawError("an empirical sample needs at least one value")
        if not np.all(np.isfinite(v)):
            raise NonFiniteValueError("sample values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "stream", tuple(int(k) for k in self.stream))

    @classmethod
    def from_draws(cls, draws: Sequence[float], seed: Optional[int] = None,
                   stream: Tuple[int, ...] = ()) -> "EmpiricalSample":
        return cls(np.asarray(draws), seed, stream)

    @property
    def size(self) -> int:
        return int(self.values.size)

    def support(self) -> Tuple[float, float]:
        return float(self.values[0]), float(self.values[-1])

    def mean(self) -> float:
        return compensated_sum(self.values) / self.size

    def central_moment(self, p: int) -> float:
        mu = self.mean()
        return compensated_sum((self.values - mu) ** p) / self.size

    def variance(self) -> float:
        return self.central_moment(2)

    def raw_moment(self, p: int) -> float:
        return compensated_sum(self.values**p) / self.size

    def expect_polynomial(self, poly: Polynomial) -> float:
        return compensated_sum(poly(self.values)) / self.size

    def cdf(self, t):
        out = np.searchsorted(self.values, np.asarray(t, dtype=np.float64), side="right") / self.size
        return float(out) if np.ndim(out) == 0 else out

    def cdf_left(self, t):
        out = np.searchsorted(self.values, np.asarray(t, dtype=np.float64), side="left") / self.size
        return float(out) if np.ndim(out) == 0 else out

    def breakpoints(self) -> np.ndarray:
        return np.unique(self.values)

    def quantile(self, v):
        v = np.asarray(v, dtype=np.float64)
        idx = np.clip(np.floor(v * self.size).astype(np.int64), 0, self.size - 1)
        out = self.values[idx]
        return float(out) if out.ndim == 0 else out

    def to_discrete(self) -> DiscreteDistribution:
        return make_discrete(self.values, np.ones(self.size))

    def standardized(self) -> "EmpiricalSample":
        if self.size < 2:
            raise DegenerateLawError("standardizing needs at least two draws")
        var = self.variance()
        if var <= 0:
            raise DegenerateLawError("all draws are equal")
        return EmpiricalSample((self.values - self.mean()) / math.sqrt(var), self.seed, self.stream)
