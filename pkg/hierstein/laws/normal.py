# hierstein/laws/normal.py
from __future__ import annotations

import math
from typing import Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import ndtr, ndtri

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _scalar(out):
    return float(out) if np.ndim(out) == 0 else out


class StandardNormal:
    """The law of Z. Stateless; `STANDARD_NORMAL` is the shared instance."""

    kind = "normal"
    _instance: "StandardNormal | None" = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "StandardNormal()"

    def support(self) -> Tuple[float, float]:
        return -math.inf, math.inf

    # scipy's ndtr goes through erfc on the far tails, so both tails keep full relative accuracy
    def cdf(self, t):
        return _scalar(ndtr(np.asarray(t, dtype=np.float64)))

    def sf(self, t):
        return _scalar(ndtr(-np.asarray(t, dtype=np.float64)))

    def pdf(self, t):
        t = np.asarray(t, dtype=np.float64)
        return _scalar(_INV_SQRT_2PI * np.exp(-0.5 * t * t))

    def quantile(self, v):
        return _scalar(ndtri(np.asarray(v, dtype=np.float64)))

    sample = quantile

    def primitive(self, t):
        """P(t) = tΦ(t) + φ(t) = ∫_{−∞}^t Φ(s) ds."""
        t = np.asarray(t, dtype=np.float64)
        return _scalar(t * ndtr(t) + _INV_SQRT_2PI * np.exp(-0.5 * t * t))

    def lower_tail_integral(self, t):
        return self.primitive(t)

    def upper_tail_integral(self, t):
        """∫_t^∞ (1 − Φ) = E(Z − t)⁺ = φ(t) − t(1 − Φ(t))."""
        t = np.asarray(t, dtype=np.float64)
        return _scalar(_INV_SQRT_2PI * np.exp(-0.5 * t * t) - t * ndtr(-t))

    def raw_moment(self, p: int) -> float:
        if p % 2:
            return 0.0
        return float(math.prod(range(p - 1, 0, -2)))

    def mean(self) -> float:
        return 0.0

    def variance(self) -> float:
        return 1.0

    def central_moment(self, p: int) -> float:
        return self.raw_moment(p)

    def expect_polynomial(self, poly: Polynomial) -> float:
        return math.fsum(c * self.raw_moment(i) for i, c in enumerate(poly.coef))


STANDARD_NORMAL = StandardNormal()
