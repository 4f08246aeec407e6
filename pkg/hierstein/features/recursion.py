# hierstein/features/recursion.py
# Two-effect hierarchical recursions X_{n+1} = Σ a_{n,i} X_{n,i} + Δ_n: exact atomic
# propagation, pool Monte Carlo, closed-form moments and the coupled decomposition
# Z̃_{n+1} = r_X U_X + r_Y U_Y + Γ_X + Γ_Y.
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

from hierstein.config import default_atom_cap, default_threads
from hierstein.errors import (
    ConfigError,
    DegenerateLawError,
    ModelValidationError,
    NonFiniteValueError,
    UnsupportedPerturbationError,
)
from hierstein.laws import DiscreteDistribution, EmpiricalSample, central_moment, point_mass
from hierstein.utils.streams import (
    TAG_BETA,
    TAG_X,
    chunked_uniforms,
    chunks,
    open_uniforms,
    parallel_map,
    substream,
)

log = logging.getLogger("hierstein.recursion")

MIN_POOL_SIZE = 1000
PerturbationKind = Literal["none", "independent", "dependent_quadratic"]


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class GeometricRule:
    """base·ratioⁿ"""

    base: float
    ratio: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.base) and math.isfinite(self.ratio)):
            raise NonFiniteValueError("geometric rule needs finite base and ratio")
        if self.base < 0 or self.ratio < 0:
            raise ModelValidationError("geometric rules are non-negative")

    def at(self, n: int) -> float:
        return self.base * self.ratio**n


@dataclass(frozen=True)
class CoefficientSchedule:
    """Rows of coefficients per level; the last row repeats forever and is the limit."""

    levels: Tuple[Tuple[float, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(float(a) for a in row) for row in self.levels)
        if not rows:
            raise ModelValidationError("coefficient schedule is empty")
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ModelValidationError(f"coefficient rows have different lengths {sorted(widths)}")
        if not all(math.isfinite(a) for r in rows for a in r):
            raise NonFiniteValueError("coefficients must be finite")
        object.__setattr__(self, "levels", rows)

    @classmethod
    def constant(cls, coefs: Sequence[float]) -> "CoefficientSchedule":
        return cls((tuple(coefs),))

    @property
    def k(self) -> int:
        return len(self.levels[0])

    @property
    def limit(self) -> np.ndarray:
        return np.asarray(self.levels[-1])

    def at(self, n: int) -> np.ndarray:
        return np.asarray(self.levels[min(n, len(self.levels) - 1)])


@dataclass(frozen=True)
class PerturbationSpec:
    """none | independent (Δ_n = scale(n)·L) | dependent_quadratic (ε_n from `scale`).

    dependent_quadratic: Δ_n = ε_n·((1/k)Σᵢ X̃_{n,i})² − ε_n/k, built from the same
    standardized copies that enter X_{n+1}, so E Δ_n = 0.
    """

    kind: PerturbationKind = "none"
    law: Optional[DiscreteDistribution] = None
    scale: GeometricRule = GeometricRule(0.0)

    def __post_init__(self):
        if self.kind not in ("none", "independent", "dependent_quadratic"):
            raise ModelValidationError(f"unknown perturbation kind {self.kind!r}")
        if self.kind == "independent" and self.law is None:
            raise ModelValidationError("independent perturbation needs a law")
        if self.kind != "independent" and self.law is not None:
            raise ModelValidationError(f"{self.kind} perturbation takes no law")

    @property
    def is_exact(self) -> bool:
        return self.kind != "dependent_quadratic"

    def _require_exact(self) -> None:
        if not self.is_exact:
            raise UnsupportedPerturbationError(
                "dependent perturbations have no exact law; use the pool method"
            )

    def law_at(self, n: int) -> DiscreteDistribution:
        self._require_exact()
        c = self.scale.at(n)
        if self.kind == "none" or c == 0.0:
            return point_mass(0.0)
        return self.law.scaled(c)

    def moments_at(self, n: int) -> Tuple[float, float, float]:
        """(mean, variance, fourth central moment) of Δ_n."""
        self._require_exact()
        if self.kind == "none":
            return 0.0, 0.0, 0.0
        c = self.scale.at(n)
        return c * self.law.mean(), c**2 * central_moment(self.law, 2), c**4 * central_moment(self.law, 4)

    def values(self, n: int, standardized_copies: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Δ_n per row: from the perturbation uniform, or from the row's copies."""
        if self.kind == "none":
            return np.zeros(u.shape[0])
        if self.kind == "independent":
            return np.asarray(self.law_at(n).quantile(u), dtype=np.float64)
        eps = self.scale.at(n)
        k = standardized_copies.shape[1]
        return eps * standardized_copies.mean(axis=1) ** 2 - eps / k


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class RecursionModel:
    coefficients: CoefficientSchedule
    initial: DiscreteDistribution
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)
    name: str = "x"

    def __post_init__(self):
        if self.coefficients.k < 2:
            raise ModelValidationError(f"model {self.name}: k must be at least 2")
        if int(np.count_nonzero(self.coefficients.limit)) < 2:
            raise ModelValidationError(
                f"model {self.name}: at least two limit coefficients must be nonzero"
            )
        if central_moment(self.initial, 2) <= 0:
            raise DegenerateLawError(f"model {self.name}: initial law is constant")

    @property
    def k(self) -> int:
        return self.coefficients.k

    def coefficients_at(self, n: int) -> np.ndarray:
        return self.coefficients.at(n)

    def lambda2_at(self, n: int) -> float:
        return math.fsum(a * a for a in self.coefficients_at(n))

    def lambda_at(self, n: int) -> float:
        return math.sqrt(self.lambda2_at(n))

    @property
    def lambda_limit(self) -> float:
        return math.sqrt(math.fsum(a * a for a in self.coefficients.limit))


@dataclass(frozen=True, eq=False)
class TwoEffectModel:
    """Z_n = X_n + Y_n with independently sampled effects."""

    model_x: RecursionModel
    model_y: RecursionModel

    def lambda2_at(self, n: int) -> float:
        return self.model_x.lambda2_at(n) + self.model_y.lambda2_at(n)

    def lambda_at(self, n: int) -> float:
        return math.sqrt(self.lambda2_at(n))

    @property
    def is_exact(self) -> bool:
        return self.model_x.perturbation.is_exact and self.model_y.perturbation.is_exact


# ---------------------------------------------------------------------------
# Exact propagation
# ---------------------------------------------------------------------------
def _step_exact(m: RecursionModel, level: int, law: DiscreteDistribution, cap: int) -> DiscreteDistribution:
    out = point_mass(0.0)
    for a in m.coefficients_at(level):
        if a != 0.0:
            out = out.convolve(law.scaled(float(a)), cap=cap)
    return out.convolve(m.perturbation.law_at(level), cap=cap)


def propagate_levels(m: RecursionModel, n: int, atom_cap: Optional[int] = None) -> List[DiscreteDistribution]:
    """Exact laws X_0, …, X_n."""
    m.perturbation._require_exact()
    cap = atom_cap or default_atom_cap()
    laws = [m.initial]
    for level in range(n):
        laws.append(_step_exact(m, level, laws[-1], cap))
        log.debug("model %s level %d: %d atoms", m.name, level + 1, laws[-1].size)
    return laws


def propagate_exact(m: RecursionModel, n: int, atom_cap: Optional[int] = None) -> DiscreteDistribution:
    return propagate_levels(m, n, atom_cap)[-1]


# ---------------------------------------------------------------------------
# Pool Monte Carlo
# ---------------------------------------------------------------------------
def _advance_pool(m: RecursionModel, level: int, pool: np.ndarray, seed: int, tag: int,
                  threads: int) -> np.ndarray:
    a = m.coefficients_at(level)
    k, size = a.size, pool.size
    pert = m.perturbation
    mu, sd = 0.0, 1.0
    if pert.kind == "dependent_quadratic":
        mu, sd = float(pool.mean()), float(pool.std())
        if sd <= 0:
            raise DegenerateLawError(f"model {m.name}: pool collapsed at level {level}")

    def _chunk(ch: Tuple[int, int, int]) -> np.ndarray:
        idx, start, stop = ch
        u = open_uniforms(substream(seed, tag, level + 1, idx), (stop - start, k + 1))
        picks = np.minimum((u[:, :k] * size).astype(np.int64), size - 1)
        copies = pool[picks]
        out = np.zeros(stop - start)
        for i in range(k):
            out += a[i] * copies[:, i]
        std_copies = (copies - mu) / sd if pert.kind == "dependent_quadratic" else copies
        return out + pert.values(level, std_copies, u[:, k])

    return np.concatenate(list(parallel_map(_chunk, chunks(size), threads)))


def sample_pool_levels(
    m: RecursionModel,
    n: int,
    pool_size: int,
    seed: int,
    threads: Optional[int] = None,
    tag: int = TAG_X,
) -> List[np.ndarray]:
    """Pools for levels 0..n in draw order. Each output draw picks k members of the previous
    pool with replacement, then consumes one perturbation uniform."""
    if pool_size < MIN_POOL_SIZE:
        raise ConfigError(f"pool_size must be at least {MIN_POOL_SIZE}, got {pool_size}")
    if n < 0:
        raise ConfigError("level must be non-negative")
    threads = threads or default_threads()
    u0 = chunked_uniforms(seed, (tag, 0), pool_size, 1, threads)[:, 0]
    pools = [np.asarray(m.initial.quantile(u0), dtype=np.float64)]
    for level in range(n):
        pools.append(_advance_pool(m, level, pools[-1], seed, tag, threads))
        log.debug("model %s pool level %d ready (%d draws)", m.name, level + 1, pool_size)
    return pools


def sample_pool(m: RecursionModel, n: int, pool_size: int, seed: int,
                threads: Optional[int] = None, tag: int = TAG_X) -> EmpiricalSample:
    pools = sample_pool_levels(m, n, pool_size, seed, threads, tag)
    return EmpiricalSample(pools[-1], seed, (tag, n))


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class MomentState:
    n: int
    mean: float
    variance: float
    fourth: float


def moment_recursion(m: RecursionModel, n_max: int) -> List[MomentState]:
    """Closed-form mean, variance and fourth central moment of X_0..X_{n_max}.

    Var' = λ²Var + VarΔ
    μ4'  = Σa⁴μ4 + 3Σ_{i≠j}a_i²a_j²Var² + μ4(Δ) + 6λ²Var·VarΔ
    """
    m.perturbation._require_exact()
    init = m.initial
    states = [MomentState(0, init.mean(), central_moment(init, 2), central_moment(init, 4))]
    for level in range(n_max):
        s = states[-1]
        a = m.coefficients_at(level)
        lam2 = math.fsum(a**2)
        s4 = math.fsum(a**4)
        cross = math.fsum(a[i] ** 2 * a[j] ** 2 for i in range(a.size) for j in range(a.size) if i != j)
        p_mean, p_var, p_fourth = m.perturbation.moments_at(level)
        states.append(MomentState(
            n=level + 1,
            mean=math.fsum(a) * s.mean + p_mean,
            variance=lam2 * s.variance + p_var,
            fourth=math.fsum([s4 * s.fourth, 3.0 * cross * s.variance**2, p_fourth,
                              6.0 * lam2 * s.variance * p_var]),
        ))
    return states


def perturbation_moments(m: RecursionModel, n_max: int) -> List[Tuple[float, float, float]]:
    return [m.perturbation.moments_at(n) for n in range(n_max + 1)]


def normalized_scale_sequence(m: RecursionModel, n_max: int) -> np.ndarray:
    """σ_{X,n}/(λ_{a,0}⋯λ_{a,n−1}) for n = 0..n_max."""
    states = moment_recursion(m, n_max)
    out = np.empty(n_max + 1)
    prod = 1.0
    for s in states:
        out[s.n] = math.sqrt(s.variance) / prod
        prod *= m.lambda_at(s.n)
    return out


# ---------------------------------------------------------------------------
# Scales for the decomposition
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class LevelScales:
    n: int
    sigma_x: float
    sigma_y: float
    mean_x: float
    mean_y: float
    pert_mean_x: float
    pert_mean_y: float
    pert_var_x: float
    pert_var_y: float
    lambda_a2: float
    lambda_b2: float
    sigma_next: float
    provenance: Literal["exact", "pool"] = "exact"

    @property
    def lam(self) -> float:
        return math.sqrt(self.lambda_a2 + self.lambda_b2)

    @property
    def r_x(self) -> float:
        return self.lam * self.sigma_x / self.sigma_next

    @property
    def r_y(self) -> float:
        return self.lam * self.sigma_y / self.sigma_next


def next_sigma(lam: float, sigma_x: float, sigma_y: float, lambda_b2: float,
               pert_var_x: float, pert_var_y: float) -> float:
    """σ_{n+1} = λσ_X·√(1 + (λ_b²(σ_Y² − σ_X²) + VarΔ + VarΛ)/(λσ_X)²).

    Algebraically √Var Z_{n+1}; the factored form returns exactly λσ_X when the two
    effects coincide and nothing is perturbed.
    """
    base = lam * sigma_x
    rest = lambda_b2 * (sigma_y * sigma_y - sigma_x * sigma_x) + pert_var_x + pert_var_y
    return base * math.sqrt(1.0 + rest / (base * base))


def _require_positive(**sigmas: float) -> None:
    for name, s in sigmas.items():
        if not s > 0:
            raise DegenerateLawError(f"{name} is zero; standardization is undefined")


def _dependent_variance(pert: PerturbationSpec, level: int, k: int, kurtosis: float) -> float:
    eps = pert.scale.at(level)
    fourth = (k * kurtosis + 3.0 * k * (k - 1)) / k**4
    return eps * eps * (fourth - 1.0 / k**2)


def level_scales(
    tm: TwoEffectModel,
    n: int,
    pools_x: Optional[Sequence[np.ndarray]] = None,
    pools_y: Optional[Sequence[np.ndarray]] = None,
) -> LevelScales:
    """σ's, means and perturbation moments at level n.

    Exact moments when both effects allow them and no pools are given; otherwise pool
    estimates (levels n and n+1 needed), flagged with provenance "pool".
    """
    mx, my = tm.model_x, tm.model_y
    la2, lb2 = mx.lambda2_at(n), my.lambda2_at(n)
    if tm.is_exact and pools_x is None:
        sx, sy = moment_recursion(mx, n)[-1], moment_recursion(my, n)[-1]
        px, py = mx.perturbation.moments_at(n), my.perturbation.moments_at(n)
        sigma_x, sigma_y = math.sqrt(sx.variance), math.sqrt(sy.variance)
        _require_positive(sigma_x=sigma_x, sigma_y=sigma_y)
        sigma_next = next_sigma(math.sqrt(la2 + lb2), sigma_x, sigma_y, lb2, px[1], py[1])
        _require_positive(sigma_next=sigma_next)
        return LevelScales(n, sigma_x, sigma_y, sx.mean, sy.mean, px[0], py[0], px[1], py[1],
                           la2, lb2, sigma_next, "exact")

    if pools_x is None or pools_y is None or len(pools_x) < n + 2 or len(pools_y) < n + 2:
        raise UnsupportedPerturbationError(
            f"level {n}: pool estimates need pools through level {n + 1}"
        )
    log.warning("level %d: using pool-estimated σ (provenance=pool)", n)
    moments = []
    for model, pools in ((mx, pools_x), (my, pools_y)):
        p = np.asarray(pools[n])
        mean, var = float(p.mean()), float(p.var())
        _require_positive(**{f"sigma_{model.name}": math.sqrt(var)})
        if model.perturbation.is_exact:
            p_mean, p_var, _ = model.perturbation.moments_at(n)
        else:
            kurt = float(((p - mean) ** 4).mean()) / var**2
            p_mean, p_var = 0.0, _dependent_variance(model.perturbation, n, model.k, kurt)
        moments.append((mean, math.sqrt(var), p_mean, p_var))
    (mean_x, sigma_x, pmx, pvx), (mean_y, sigma_y, pmy, pvy) = moments
    sigma_next = math.sqrt(float(np.var(pools_x[n + 1])) + float(np.var(pools_y[n + 1])))
    _require_positive(sigma_next=sigma_next)
    return LevelScales(n, sigma_x, sigma_y, mean_x, mean_y, pmx, pmy, pvx, pvy,
                       la2, lb2, sigma_next, "pool")


# ---------------------------------------------------------------------------
# Coupled decomposition
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class CoupledDecomposition:
    z_tilde: float
    u: float
    u_x: float
    u_y: float
    gamma_x: float
    gamma_y: float
    r_x: float
    r_y: float


@dataclass(frozen=True, eq=False)
class DecompositionBatch:
    z_tilde: np.ndarray
    u: np.ndarray
    u_x: np.ndarray
    u_y: np.ndarray
    gamma_x: np.ndarray
    gamma_y: np.ndarray
    r_x: float
    r_y: float
    scales: LevelScales

    def __len__(self) -> int:
        return int(self.u.size)

    def row(self, i: int) -> CoupledDecomposition:
        return CoupledDecomposition(
            float(self.z_tilde[i]), float(self.u[i]), float(self.u_x[i]), float(self.u_y[i]),
            float(self.gamma_x[i]), float(self.gamma_y[i]), self.r_x, self.r_y,
        )


def decomposition_width(tm: TwoEffectModel, n: int) -> int:
    """Uniforms per draw: k X copies, ℓ Y copies, Δ, Λ."""
    return tm.model_x.coefficients_at(n).size + tm.model_y.coefficients_at(n).size + 2


def _decompose(tm: TwoEffectModel, n: int, uni: np.ndarray, law_x, law_y,
               sc: LevelScales) -> DecompositionBatch:
    _require_positive(sigma_x=sc.sigma_x, sigma_y=sc.sigma_y, sigma_next=sc.sigma_next)
    a = tm.model_x.coefficients_at(n)
    b = tm.model_y.coefficients_at(n)
    k, ell = a.size, b.size
    if uni.shape[1] != k + ell + 2:
        raise ConfigError(f"expected {k + ell + 2} uniforms per draw, got {uni.shape[1]}")
    lam = sc.lam

    xt = (np.asarray(law_x.quantile(uni[:, :k])) - sc.mean_x) / sc.sigma_x
    yt = (np.asarray(law_y.quantile(uni[:, k:k + ell])) - sc.mean_y) / sc.sigma_y
    u_x = np.zeros(uni.shape[0])
    u_y = np.zeros(uni.shape[0])
    for i in range(k):
        u_x += (a[i] / lam) * xt[:, i]
    for j in range(ell):
        u_y += (b[j] / lam) * yt[:, j]

    delta = tm.model_x.perturbation.values(n, xt, uni[:, k + ell])
    lam_ = tm.model_y.perturbation.values(n, yt, uni[:, k + ell + 1])
    gamma_x = (delta - sc.pert_mean_x) / sc.sigma_next
    gamma_y = (lam_ - sc.pert_mean_y) / sc.sigma_next

    r_x, r_y = sc.r_x, sc.r_y
    z = r_x * u_x + r_y * u_y + gamma_x + gamma_y
    return DecompositionBatch(z, u_x + u_y, u_x, u_y, gamma_x, gamma_y, r_x, r_y, sc)


def _level_laws(tm: TwoEffectModel, n: int, law_x, law_y, atom_cap: Optional[int]):
    if law_x is None or law_y is None:
        if not tm.is_exact:
            raise UnsupportedPerturbationError(
                "dependent perturbations need pool laws for the decomposition"
            )
        if law_x is None:
            law_x = propagate_exact(tm.model_x, n, atom_cap)
        if law_y is None:
            law_y = propagate_exact(tm.model_y, n, atom_cap)
    return law_x, law_y


def coupled_decomposition_sample(
    tm: TwoEffectModel,
    n: int,
    laws: Tuple,
    uniforms: Sequence[float],
    scales: Optional[LevelScales] = None,
) -> CoupledDecomposition:
    """One coupled draw; `laws` are the level-n laws (exact or pooled) of X and Y."""
    law_x, law_y = laws
    sc = scales or level_scales(tm, n)
    uni = np.asarray(uniforms, dtype=np.float64).reshape(1, -1)
    return _decompose(tm, n, uni, law_x, law_y, sc).row(0)


def coupled_decomposition_batch(
    tm: TwoEffectModel,
    n: int,
    draws: int,
    seed: int,
    threads: int = 1,
    law_x=None,
    law_y=None,
    scales: Optional[LevelScales] = None,
    atom_cap: Optional[int] = None,
) -> DecompositionBatch:
    law_x, law_y = _level_laws(tm, n, law_x, law_y, atom_cap)
    sc = scales or level_scales(tm, n)
    uni = chunked_uniforms(seed, (TAG_BETA, n), draws, decomposition_width(tm, n), threads)
    return _decompose(tm, n, uni, law_x, law_y, sc)
