# hierstein/features/zero_bias.py
# Zero-bias transforms of atomic laws, the inverse-CDF coupling (ξ, ξ*) and the
# random-index construction of the zero-biased sum U* = U − (α_I/λ)(ξ_I − ξ_I*).
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from hierstein.config import DEFAULT_BREAKPOINT_CAP, STANDARDIZED_TOL
from hierstein.errors import (
    CapExceededError,
    DegenerateLawError,
    DimensionMismatchError,
    ModelValidationError,
    NonZeroMeanError,
)
from hierstein.laws import (
    DiscreteDistribution,
    PiecewiseLinearCDF,
    central_moment,
    from_density,
    from_density_jumps,
    point_mass,
    standardize,
)
from hierstein.utils.numeric import compensated_sum
from hierstein.utils.streams import TAG_ZERO_BIAS, chunked_uniforms

log = logging.getLogger("hierstein.zero_bias")

MEAN_ZERO_TOL = 1e-10


def zero_bias(d: DiscreteDistribution) -> PiecewiseLinearCDF:
    """Law X* with E[X f(X)] = σ² E f′(X*).

    Density (1/σ²)·Σ_{xᵢ > x} xᵢpᵢ, constant between consecutive atoms.
    """
    var = central_moment(d, 2)
    if var <= 0 or d.size < 2:
        raise DegenerateLawError("zero bias needs a law with positive variance")
    mu = d.mean()
    if abs(mu) > MEAN_ZERO_TOL:
        raise NonZeroMeanError(f"zero bias needs mean 0, got {mu!r}")
    xp = d.atoms * d.probs
    # tail sums Σ_{j>i} x_j p_j for the size−1 gaps
    tails = np.cumsum(xp[::-1])[::-1][1:]
    return from_density(d.atoms, tails / var)


@dataclass(frozen=True, eq=False)
class ZeroBiasCoupling:
    """(F⁻¹(V), F*⁻¹(V)) for one shared uniform V."""

    base: DiscreteDistribution
    biased: PiecewiseLinearCDF

    @classmethod
    def of(cls, d: DiscreteDistribution) -> "ZeroBiasCoupling":
        return cls(d, zero_bias(d))

    def couple(self, v):
        return self.base.quantile(v), self.biased.quantile(v)


def couple_inverse_cdf(c: ZeroBiasCoupling, v) -> Tuple:
    arr = np.asarray(v, dtype=np.float64)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0) or np.any(np.isnan(arr)):
        raise ValueError("coupling uniforms must lie strictly inside (0, 1)")
    return c.couple(v)


# ---------------------------------------------------------------------------
# Sums with a random index
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class SumComponents:
    """U = Σ (αᵢ/λ) ξᵢ with standardized, independent ξᵢ.

    `groups` labels components that share a law (the X copies and the Y copies of one
    level); the lemma's right side sums one distance per group.
    """

    alphas: Tuple[float, ...]
    laws: Tuple[DiscreteDistribution, ...]
    groups: Tuple[str, ...] = ()
    lam: float = field(init=False)
    couplings: Tuple[ZeroBiasCoupling, ...] = field(init=False, repr=False)

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        laws = tuple(self.laws)
        if len(alphas) != len(laws):
            raise DimensionMismatchError(f"{len(alphas)} coefficients but {len(laws)} laws")
        if len(alphas) < 2:
            raise ModelValidationError("a sum needs at least two components")
        lam = math.sqrt(math.fsum(a * a for a in alphas))
        if lam <= 0:
            raise ModelValidationError("all coefficients are zero")
        for i, law in enumerate(laws):
            if abs(law.mean()) > STANDARDIZED_TOL:
                raise NonZeroMeanError(f"component {i} is not centred")
            if abs(central_moment(law, 2) - 1.0) > STANDARDIZED_TOL:
                raise ModelValidationError(f"component {i} does not have unit variance")
        groups = tuple(self.groups) or tuple(str(i) for i in range(len(laws)))
        if len(groups) != len(laws):
            raise DimensionMismatchError("one group label per component")
        # components sharing a law object share the coupling too
        cache: dict[int, ZeroBiasCoupling] = {}
        for law in laws:
            if id(law) not in cache:
                cache[id(law)] = ZeroBiasCoupling.of(law)
        couplings = tuple(cache[id(law)] for law in laws)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "laws", laws)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "couplings", couplings)

    @property
    def m(self) -> int:
        return len(self.alphas)

    @property
    def weights(self) -> np.ndarray:
        """P(I = i) = αᵢ²/λ²."""
        a = np.asarray(self.alphas)
        return a * a / (self.lam * self.lam)

    @property
    def scaled_alphas(self) -> np.ndarray:
        return np.asarray(self.alphas) / self.lam

    def cumulative_weights(self) -> np.ndarray:
        cum = np.cumsum(self.weights)
        cum[-1] = 1.0
        return cum

    def law_of_sum(self, cap: Optional[int] = None, skip: Optional[int] = None) -> DiscreteDistribution:
        """Atomic law of Σ_{j ≠ skip} (αⱼ/λ) ξⱼ."""
        out = point_mass(0.0)
        for j, (c, law) in enumerate(zip(self.scaled_alphas, self.laws)):
            if j == skip or c == 0.0:
                continue
            out = out.convolve(law.scaled(float(c)), cap=cap)
        return out


def sum_zero_bias_exact(s: SumComponents, cap: int = DEFAULT_BREAKPOINT_CAP) -> PiecewiseLinearCDF:
    """Exact law of U*: Σᵢ (αᵢ²/λ²)·[(αᵢ/λ)ξᵢ* ⊕ Σ_{j≠i}(αⱼ/λ)ξⱼ]."""
    positions, jumps = [], []
    projected = 0
    for i, (c, w) in enumerate(zip(s.scaled_alphas, s.weights)):
        if w == 0.0:
            continue
        rest = s.law_of_sum(cap=cap, skip=i)
        zb = s.couplings[i].biased.scaled(float(c))
        projected += rest.size * zb.size
        if projected > cap:
            raise CapExceededError(projected, cap, what="breakpoints")
        pos, jump = zb.density_jumps()
        positions.append(np.add.outer(rest.atoms, pos).ravel())
        jumps.append(np.multiply.outer(w * rest.probs, jump).ravel())
    log.debug("U* assembled from %d density events", projected)
    return from_density_jumps(np.concatenate(positions), np.concatenate(jumps))


def sum_zero_bias_sample(s: SumComponents, u: Sequence[float], i_select: float) -> Tuple[float, float]:
    """One coupled (U, U*): component uniforms first, then the index selector."""
    v = np.asarray(u, dtype=np.float64).ravel()
    if v.size != s.m:
        raise DimensionMismatchError(f"expected {s.m} component uniforms, got {v.size}")
    rows = np.concatenate([v, [i_select]])[None, :]
    U, Ustar = _coupled_rows(s, rows)
    return float(U[0]), float(Ustar[0])


def _coupled_rows(s: SumComponents, uni: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    m = s.m
    idx = np.minimum(np.searchsorted(s.cumulative_weights(), uni[:, m], side="right"), m - 1)
    c = s.scaled_alphas
    U = np.zeros(uni.shape[0])
    Ustar = np.zeros(uni.shape[0])
    for j in range(m):
        x, x_star = s.couplings[j].couple(uni[:, j])
        U += c[j] * x
        Ustar += c[j] * np.where(idx == j, x_star, x)
    return U, Ustar


def sample_sum_zero_bias(
    s: SumComponents, draws: int, seed: int, threads: int = 1
) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised coupled draws of (U, U*), one row of m + 1 uniforms per draw."""
    uni = chunked_uniforms(seed, (TAG_ZERO_BIAS,), draws, s.m + 1, threads)
    return _coupled_rows(s, uni)


# ---------------------------------------------------------------------------
# Lemma check
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class LemmaCheck:
    w1_exact: float        # W1(L(U), L(U*))
    coupling_mean: float   # E|U − U*| = Σ|αᵢ|³/λ³·W1(ξᵢ, ξᵢ*)
    right_side: float      # Σ over groups of W1(ξ, ξ*)

    @property
    def holds(self) -> bool:
        tol = 1e-12
        return self.w1_exact <= self.coupling_mean + tol and self.coupling_mean <= self.right_side + tol


def lemma_check(s: SumComponents, cap: int = DEFAULT_BREAKPOINT_CAP) -> LemmaCheck:
    from hierstein.features.metrics import w1

    distances = [w1(cp.base, cp.biased) for cp in s.couplings]
    coupling_mean = compensated_sum(
        [abs(c) ** 3 * d for c, d in zip(s.scaled_alphas, distances)]
    )
    per_group: dict[str, float] = {}
    for g, d in zip(s.groups, distances):
        per_group[g] = max(per_group.get(g, 0.0), d)
    exact = w1(s.law_of_sum(cap=cap), sum_zero_bias_exact(s, cap=cap))
    return LemmaCheck(exact, coupling_mean, compensated_sum(list(per_group.values())))


def components_for_level(tm, n: int, law_x: DiscreteDistribution, law_y: DiscreteDistribution) -> SumComponents:
    """SumComponents of U_{n+1} from the level-n laws: k X copies then ℓ Y copies."""
    sx, sy = standardize(law_x), standardize(law_y)
    a = tm.model_x.coefficients_at(n)
    b = tm.model_y.coefficients_at(n)
    return SumComponents(
        alphas=tuple(a) + tuple(b),
        laws=(sx,) * len(a) + (sy,) * len(b),
        groups=("x",) * len(a) + ("y",) * len(b),
    )
