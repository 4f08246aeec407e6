# hierstein/laws/piecewise.py
# Continuous laws with piecewise-linear CDF (piecewise-constant density). Mixtures are
# assembled from density-jump events: a jump of size w·Δf at every shifted breakpoint,
# merged within ATOM_MERGE_TOL, then integrated once and renormalised once.
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from hierstein.config import DEFAULT_BREAKPOINT_CAP, PROB_SUM_TOL
from hierstein.errors import (
    CapExceededError,
    DimensionMismatchError,
    InvalidLawError,
    NonFiniteValueError,
)
from hierstein.utils.numeric import compensated_sum, merge_atoms


@dataclass(frozen=True, eq=False)
class PiecewiseLinearCDF:
    breakpoints: np.ndarray
    cdf_values: np.ndarray

    kind = "piecewise"

    def __post_init__(self):
        x = np.array(self.breakpoints, dtype=np.float64, copy=True).ravel()
        F = np.array(self.cdf_values, dtype=np.float64, copy=True).ravel()
        if x.size < 2:
            raise InvalidLawError("a piecewise-linear CDF needs at least two breakpoints")
        if x.shape != F.shape:
            raise DimensionMismatchError(f"{x.size} breakpoints but {F.size} CDF values")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(F))):
            raise NonFiniteValueError("breakpoints and CDF values must be finite")
        if np.any(np.diff(x) <= 0):
            raise InvalidLawError("breakpoints must be strictly increasing")
        if np.any(np.diff(F) < 0):
            raise InvalidLawError("CDF values must be non-decreasing")
        if abs(F[0]) > PROB_SUM_TOL or abs(F[-1] - 1.0) > PROB_SUM_TOL:
            raise InvalidLawError("CDF must start at 0 and end at 1")
        F[0], F[-1] = 0.0, 1.0
        for arr in (x, F):
            arr.setflags(write=False)
        object.__setattr__(self, "breakpoints", x)
        object.__setattr__(self, "cdf_values", F)

    @property
    def size(self) -> int:
        return int(self.breakpoints.size)

    def support(self) -> Tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def masses(self) -> np.ndarray:
        return np.diff(self.cdf_values)

    def densities(self) -> np.ndarray:
        """Constant density on each of the size−1 segments."""
        return self.masses() / np.diff(self.breakpoints)

    def cdf(self, t):
        out = np.interp(np.asarray(t, dtype=np.float64), self.breakpoints, self.cdf_values,
                        left=0.0, right=1.0)
        return float(out) if np.ndim(out) == 0 else out

    cdf_left = cdf

    def quantile(self, v):
        """inf{x : F(x) > v}; flat stretches resolve to their right end."""
        v = np.asarray(v, dtype=np.float64)
        x, F = self.breakpoints, self.cdf_values
        j = np.clip(np.searchsorted(F, v, side="right"), 1, self.size - 1)
        lo, hi = F[j - 1], F[j]
        frac = np.where(hi > lo, (v - lo) / np.where(hi > lo, hi - lo, 1.0), 1.0)
        out = x[j - 1] + np.clip(frac, 0.0, 1.0) * (x[j] - x[j - 1])
        return float(out) if out.ndim == 0 else out

    sample = quantile

    def expect_polynomial(self, poly: Polynomial) -> float:
        """Exact: each segment contributes mass·(P(b) − P(a))/(b − a), P the antiderivative."""
        P = poly.integ()
        x = self.breakpoints
        return compensated_sum(self.densities() * (P(x[1:]) - P(x[:-1])))

    def raw_moment(self, p: int) -> float:
        return self.expect_polynomial(Polynomial.basis(p))

    def mean(self) -> float:
        return self.raw_moment(1)

    def central_moment(self, p: int) -> float:
        return self.expect_polynomial(Polynomial([-self.mean(), 1.0]) ** p)

    def variance(self) -> float:
        return self.central_moment(2)

    def shifted(self, b: float) -> "PiecewiseLinearCDF":
        return PiecewiseLinearCDF(self.breakpoints + b, self.cdf_values)

    def scaled(self, c: float) -> "PiecewiseLinearCDF":
        if c == 0:
            raise InvalidLawError("scaling by 0 leaves the piecewise-linear family")
        if c > 0:
            return PiecewiseLinearCDF(self.breakpoints * c, self.cdf_values)
        return PiecewiseLinearCDF(self.breakpoints[::-1] * c, 1.0 - self.cdf_values[::-1])

    def density_jumps(self) -> Tuple[np.ndarray, np.ndarray]:
        """(positions, jumps) with density(t) = Σ_{pos ≤ t} jump."""
        f = self.densities()
        return self.breakpoints, np.diff(np.concatenate(([0.0], f, [0.0])))


def uniform_cdf(a: float, b: float) -> PiecewiseLinearCDF:
    return PiecewiseLinearCDF([a, b], [0.0, 1.0])


def from_density(breakpoints: np.ndarray, densities: np.ndarray) -> PiecewiseLinearCDF:
    """Integrate a non-negative piecewise-constant density and renormalise it."""
    x = np.asarray(breakpoints, dtype=np.float64)
    f = np.clip(np.asarray(densities, dtype=np.float64), 0.0, None)
    F = np.concatenate(([0.0], np.cumsum(f * np.diff(x))))
    total = F[-1]
    if total <= 0:
        raise InvalidLawError("density integrates to zero")
    return PiecewiseLinearCDF(x, F / total)


def from_density_jumps(positions: np.ndarray, jumps: np.ndarray) -> PiecewiseLinearCDF:
    x, j = merge_atoms(positions, jumps)
    density = np.cumsum(j)[:-1]
    return from_density(x, density)


def mixture_of_shifts(
    base: PiecewiseLinearCDF,
    shifts: Sequence[float],
    weights: Sequence[float],
    cap: int = DEFAULT_BREAKPOINT_CAP,
) -> PiecewiseLinearCDF:
    """Law of base + S with S atomic on `shifts` (independent): Σ w_s·base(· − s)."""
    s = np.asarray(shifts, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    projected = base.size * s.size
    if projected > cap:
        raise CapExceededError(projected, cap, what="breakpoints")
    pos, jump = base.density_jumps()
    return from_density_jumps(np.add.outer(s, pos).ravel(), np.multiply.outer(w, jump).ravel())


def mix(
    laws: Sequence[PiecewiseLinearCDF],
    weights: Sequence[float],
    cap: int = DEFAULT_BREAKPOINT_CAP,
) -> PiecewiseLinearCDF:
    if len(laws) != len(weights) or not laws:
        raise DimensionMismatchError("mix needs one weight per law")
    projected = sum(law.size for law in laws)
    if projected > cap:
        raise CapExceededError(projected, cap, what="breakpoints")
    parts = [law.density_jumps() for law in laws]
    pos = np.concatenate([p for p, _ in parts])
    jump = np.concatenate([w * j for w, (_, j) in zip(weights, parts)])
    return from_density_jumps(pos, jump)
