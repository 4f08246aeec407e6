# hierstein/laws/discrete.py
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from hierstein.config import PROB_SUM_TOL
from hierstein.errors import (
    CapExceededError,
    DegenerateLawError,
    DimensionMismatchError,
    EmptyLawError,
    InvalidLawError,
    NegativeWeightError,
    NonFiniteValueError,
    UnsupportedMomentError,
)
from hierstein.utils.numeric import compensated_sum, merge_atoms


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finite atomic law. Immutable: the arrays are frozen after validation."""

    atoms: np.ndarray
    probs: np.ndarray
    _cum: np.ndarray = field(init=False, repr=False)

    kind = "discrete"

    def __post_init__(self):
        a = np.array(self.atoms, dtype=np.float64, copy=True).ravel()
        p = np.array(self.probs, dtype=np.float64, copy=True).ravel()
        if a.size == 0:
            raise EmptyLawError("a law needs at least one atom")
        if a.shape != p.shape:
            raise DimensionMismatchError(f"{a.size} atoms but {p.size} probabilities")
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(p)):
            raise NonFiniteValueError("atoms and probabilities must be finite")
        if np.any(np.diff(a) <= 0):
            raise InvalidLawError("atoms must be strictly increasing")
        if np.any(p <= 0) or np.any(p > 1):
            raise NegativeWeightError("probabilities must lie in (0, 1]")
        total = compensated_sum(p)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise InvalidLawError(f"probabilities sum to {total!r}, not 1")
        cum = np.cumsum(p)
        cum[-1] = 1.0
        for arr in (a, p, cum):
            arr.setflags(write=False)
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "_cum", cum)

    # ---------- basic facts ----------
    @property
    def size(self) -> int:
        return int(self.atoms.size)

    def support(self) -> Tuple[float, float]:
        return float(self.atoms[0]), float(self.atoms[-1])

    def mean(self) -> float:
        return compensated_sum(self.probs * self.atoms)

    def raw_moment(self, p: int) -> float:
        return compensated_sum(self.probs * self.atoms**p)

    def variance(self) -> float:
        return central_moment(self, 2)

    def expect_polynomial(self, poly: Polynomial) -> float:
        return compensated_sum(self.probs * poly(self.atoms))

    # ---------- CDF / quantile ----------
    def cdf(self, t):
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.atoms, t, side="right")
        out = np.where(idx > 0, self._cum[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf_left(self, t):
        """P(X < t)."""
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.atoms, t, side="left")
        out = np.where(idx > 0, self._cum[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf_values(self) -> np.ndarray:
        """CDF at each atom (right-continuous)."""
        return self._cum

    def quantile(self, v):
        """Right-continuous generalized inverse inf{x : F(x) > v}; ties go to the larger atom."""
        v = np.asarray(v, dtype=np.float64)
        idx = np.minimum(np.searchsorted(self._cum, v, side="right"), self.size - 1)
        out = self.atoms[idx]
        return float(out) if out.ndim == 0 else out

    sample = quantile

    # ---------- transforms ----------
    def shifted(self, b: float) -> "DiscreteDistribution":
        return DiscreteDistribution(self.atoms + b, self.probs)

    def scaled(self, c: float) -> "DiscreteDistribution":
        if c == 0:
            return point_mass(0.0)
        if c > 0:
            return DiscreteDistribution(self.atoms * c, self.probs)
        return DiscreteDistribution(self.atoms[::-1] * c, self.probs[::-1])

    def convolve(self, other: "DiscreteDistribution", cap: int | None = None) -> "DiscreteDistribution":
        """Law of the sum of independent draws from self and other."""
        projected = self.size * other.size
        if cap is not None and projected > cap:
            raise CapExceededError(projected, cap)
        values = np.add.outer(self.atoms, other.atoms).ravel()
        weights = np.multiply.outer(self.probs, other.probs).ravel()
        return _from_merged(values, weights)


def _from_merged(values: np.ndarray, weights: np.ndarray) -> DiscreteDistribution:
    atoms, w = merge_atoms(values, weights)
    keep = w > 0
    atoms, w = atoms[keep], w[keep]
    return DiscreteDistribution(atoms, w / compensated_sum(w))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------
def make_discrete(values: Sequence[float], weights: Sequence[float]) -> DiscreteDistribution:
    """Normalise, sort and merge (duplicates within 1e-12 pooled) into a valid law."""
    v = np.asarray(values, dtype=np.float64).ravel()
    w = np.asarray(weights, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptyLawError("no values given")
    if v.shape != w.shape:
        raise DimensionMismatchError(f"{v.size} values but {w.size} weights")
    if not np.all(np.isfinite(v)):
        raise NonFiniteValueError("values must be finite")
    if not np.all(np.isfinite(w)):
        raise NonFiniteValueError("weights must be finite")
    if np.any(w < 0):
        raise NegativeWeightError("weights must be non-negative")
    if not np.any(w > 0):
        raise EmptyLawError("weights are all zero")
    return _from_merged(v, w)


def central_moment(d: DiscreteDistribution, p: int) -> float:
    if p not in (1, 2, 3, 4):
        raise UnsupportedMomentError(f"central moment of order {p} is not supported")
    mu = d.mean()
    return compensated_sum(d.probs * (d.atoms - mu) ** p)


def standardize(d: DiscreteDistribution) -> DiscreteDistribution:
    var = central_moment(d, 2)
    if var <= 0:
        raise DegenerateLawError("cannot standardize a law with zero variance")
    mu = d.mean()
    return DiscreteDistribution((d.atoms - mu) / np.sqrt(var), d.probs)


# ---------- named laws ----------
def point_mass(x: float) -> DiscreteDistribution:
    return DiscreteDistribution([x], [1.0])


def rademacher() -> DiscreteDistribution:
    return DiscreteDistribution([-1.0, 1.0], [0.5, 0.5])


def bernoulli(p: float) -> DiscreteDistribution:
    if not 0 < p < 1:
        raise InvalidLawError("bernoulli needs 0 < p < 1")
    return DiscreteDistribution([0.0, 1.0], [1.0 - p, p])


def two_point(a: float, b: float) -> DiscreteDistribution:
    """Mean-zero law on {−a, b}: −a w.p. b/(a+b), b w.p. a/(a+b)."""
    if a <= 0 or b <= 0:
        raise InvalidLawError("two_point needs a, b > 0")
    return DiscreteDistribution([-a, b], [b / (a + b), a / (a + b)])


def uniform_on(values: Sequence[float]) -> DiscreteDistribution:
    return make_discrete(values, np.ones(len(values)))
