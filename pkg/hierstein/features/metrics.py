# hierstein/features/metrics.py
# Exact Wasserstein-1 distances, couplings, Stein test functions and the β_n functional.
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from hierstein.errors import (
    InsufficientDataError,
    MarginalMismatchError,
    UnsupportedLawError,
)
from hierstein.laws import LAW_TYPES, STANDARD_NORMAL, DiscreteDistribution, EmpiricalSample, Law
from hierstein.utils.numeric import compensated_sum, fmt17

log = logging.getLogger("hierstein.metrics")

_KIND_ORDER = {"discrete": 0, "empirical": 1, "piecewise": 2, "normal": 3}
_BISECTION_STEPS = 80
_MARGINAL_TOL = 1e-9


def _check_law(law) -> None:
    if not isinstance(law, LAW_TYPES):
        raise UnsupportedLawError(f"unsupported law kind {type(law).__name__}")


def _grid(law) -> np.ndarray:
    if isinstance(law, DiscreteDistribution):
        return law.atoms
    if isinstance(law, EmpiricalSample):
        return law.breakpoints()
    return law.breakpoints


# ---------------------------------------------------------------------------
# W1
# ---------------------------------------------------------------------------
def w1(F: Law, G: Law) -> float:
    """∫|F(t) − G(t)| dt, integrated segment by segment with no truncation."""
    _check_law(F)
    _check_law(G)
    if _KIND_ORDER[F.kind] > _KIND_ORDER[G.kind]:
        F, G = G, F
    if G.kind == "normal":
        return 0.0 if F.kind == "normal" else _w1_against_normal(F)
    return _w1_bounded(F, G)


def _abs_linear_area(a, b, Da, Db) -> np.ndarray:
    """∫_a^b |D| for D linear from Da (at a⁺) to Db (at b⁻)."""
    width = b - a
    Aa, Ab = np.abs(Da), np.abs(Db)
    denom = Aa + Ab
    crossing = Da * Db < 0
    safe = np.where(denom > 0, denom, 1.0)
    return np.where(crossing, width * (Da * Da + Db * Db) / (2.0 * safe), 0.5 * width * denom)


def _w1_bounded(F, G) -> float:
    grid = np.union1d(_grid(F), _grid(G))
    if grid.size < 2:
        return 0.0
    a, b = grid[:-1], grid[1:]
    Da = F.cdf(a) - G.cdf(a)
    Db = F.cdf_left(b) - G.cdf_left(b)
    return compensated_sum(_abs_linear_area(a, b, Da, Db))


def _w1_against_normal(F) -> float:
    N = STANDARD_NORMAL
    x = _grid(F)
    parts = [float(N.lower_tail_integral(x[0])), float(N.upper_tail_integral(x[-1]))]
    if x.size >= 2:
        parts.extend(_normal_segments(F, x[:-1], x[1:]))
    return compensated_sum(parts)


def _normal_segments(F, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """|F − Φ| over each (a, b), F linear there.

    D(t) = Fa + c·(t − a) − Φ(t) is concave for t < 0 and convex for t > 0, and D′ = c − φ
    vanishes at most at ±t_e (φ(t_e) = c). Cutting at 0 and ±t_e leaves monotone pieces,
    each holding at most one root.
    """
    N = STANDARD_NORMAL
    Fa = F.cdf(a)
    c = (F.cdf_left(b) - Fa) / (b - a)

    zero = np.where((a < 0) & (b > 0), 0.0, a)
    has_ext = (c > 0) & (c < N.pdf(0.0))
    t_e = np.sqrt(-2.0 * np.log(np.where(has_ext, c, N.pdf(0.0)) * math.sqrt(2.0 * math.pi)))
    neg = np.where(has_ext & (a < -t_e) & (-t_e < b), -t_e, a)
    pos = np.where(has_ext & (a < t_e) & (t_e < b), t_e, a)
    cuts = np.sort(np.stack([a, zero, neg, pos, b], axis=1), axis=1)

    lo = cuts[:, :-1].ravel()
    hi = cuts[:, 1:].ravel()
    base = np.repeat(a, 4)
    level = np.repeat(Fa, 4)
    slope = np.repeat(c, 4)

    def D(t):
        return level + slope * (t - base) - N.cdf(t)

    def integral(l, r):
        return (level * (r - l) + 0.5 * slope * ((r - base) ** 2 - (l - base) ** 2)
                - (N.primitive(r) - N.primitive(l)))

    Dl, Dr = D(lo), D(hi)
    root = _bisect(D, lo, hi, Dl, Dr)
    crossing = Dl * Dr < 0
    area = np.where(
        crossing,
        np.abs(integral(lo, root)) + np.abs(integral(root, hi)),
        np.abs(integral(lo, hi)),
    )
    return np.where(hi > lo, area, 0.0)


def _bisect(D, lo, hi, Dlo, Dhi) -> np.ndarray:
    active = Dlo * Dhi < 0
    l, r = np.where(active, lo, 0.0), np.where(active, hi, 0.0)
    dl = np.where(active, Dlo, 0.0)
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (l + r)
        dm = D(mid)
        left = np.sign(dm) == np.sign(dl)
        l = np.where(left, mid, l)
        dl = np.where(left, dm, dl)
        r = np.where(left, r, mid)
    return np.where(active, 0.5 * (l + r), lo)


# ---------------------------------------------------------------------------
# Couplings
# ---------------------------------------------------------------------------
def _midpoints(n: int) -> np.ndarray:
    return (np.arange(n, dtype=np.float64) + 0.5) / n


@dataclass(frozen=True, eq=False)
class InverseCdfCoupling:
    """One shared uniform fed through both quantile functions."""

    first: Law
    second: Law

    def pair(self, v):
        return self.first.quantile(v), self.second.quantile(v)

    def expected_distance(self, n_grid: int = 1_000_000) -> float:
        x, y = self.pair(_midpoints(n_grid))
        return compensated_sum(np.abs(x - y)) / n_grid


@dataclass(frozen=True, eq=False)
class IndependentCoupling:
    first: Law
    second: Law

    def expected_distance(self, n_grid: int = 1_000_000) -> float:
        if isinstance(self.first, DiscreteDistribution) and isinstance(self.second, DiscreteDistribution):
            diff = np.abs(np.subtract.outer(self.first.atoms, self.second.atoms))
            return compensated_sum(np.multiply.outer(self.first.probs, self.second.probs) * diff)
        m = max(1, math.isqrt(n_grid))
        v = _midpoints(m)
        x, y = self.first.quantile(v), self.second.quantile(v)
        return compensated_sum(np.abs(np.subtract.outer(x, y))) / (m * m)


@dataclass(frozen=True, eq=False)
class IdentityCoupling:
    law: Law

    @property
    def first(self) -> Law:
        return self.law

    @property
    def second(self) -> Law:
        return self.law

    def expected_distance(self, n_grid: int = 1_000_000) -> float:
        return 0.0


def w1_dual_check(F: Law, G: Law, coupling, n_grid: int = 1_000_000) -> Tuple[float, float]:
    """(exact W1, the coupling's E|X − Y| on a deterministic uniform grid)."""
    for given, stored, which in ((F, coupling.first, "first"), (G, coupling.second, "second")):
        if given is not stored and w1(given, stored) > _MARGINAL_TOL:
            raise MarginalMismatchError(f"coupling's {which} marginal differs from the law given")
    return w1(F, G), coupling.expected_distance(n_grid)


# ---------------------------------------------------------------------------
# Stein test functions
# ---------------------------------------------------------------------------
_IDENTITY = Polynomial([0.0, 1.0])


@dataclass(frozen=True, eq=False)
class SteinTestFunction:
    """Polynomial f with f(0) = 0 and degree ≤ 4; h(w) = f′(w) − w·f(w).

    Every such f gives an exact Stein residual, but |h(w) − h(u)| ≤ |w−u| + ½|w³−u³|
    holds only when |h′(t)| ≤ 1 + 3t²/2 everywhere, which `lipschitz_admissible` checks.
    That forces f to degree ≤ 2 with small coefficients (f = w⁴ fails: h(3) − h(0) = −135).
    """

    f: Polynomial
    fprime: Polynomial = field(init=False, repr=False)
    h_poly: Polynomial = field(init=False, repr=False)

    def __post_init__(self):
        f = Polynomial(getattr(self.f, "coef", self.f)).trim()
        if f.degree() > 4:
            raise ValueError(f"test functions have degree ≤ 4, got {f.degree()}")
        if abs(f(0.0)) > 1e-12:
            raise ValueError("test functions must vanish at 0")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "fprime", f.deriv())
        object.__setattr__(self, "h_poly", f.deriv() - _IDENTITY * f)

    @classmethod
    def monomial(cls, p: int) -> "SteinTestFunction":
        return cls(Polynomial.basis(p))

    @classmethod
    def from_coefficients(cls, coefs: Sequence[float]) -> "SteinTestFunction":
        return cls(Polynomial(coefs))

    def h(self, w):
        w = np.asarray(w, dtype=np.float64)
        return self.fprime(w) - w * self.f(w)

    @property
    def lipschitz_admissible(self) -> bool:
        """True iff 1 + 3t²/2 ± h′(t) ≥ 0 for every real t."""
        envelope = Polynomial([1.0, 0.0, 1.5])
        dh = self.h_poly.deriv()
        return _nonnegative(envelope - dh) and _nonnegative(envelope + dh)


def _nonnegative(p: Polynomial, tol: float = 1e-12) -> bool:
    p = p.trim(tol=0.0)
    deg = p.degree()
    if deg == 0:
        return p.coef[0] >= -tol
    if deg % 2 == 1 or p.coef[-1] < 0:
        return False
    crit = p.deriv().roots()
    crit = crit[np.abs(crit.imag) <= 1e-9].real
    return bool(np.all(p(crit) >= -tol))


def stein_residual(law: Law, tf: SteinTestFunction) -> float:
    """E h(W) = E f′(W) − E[W f(W)], exact for every supported law kind."""
    _check_law(law)
    return law.expect_polynomial(tf.h_poly)


# ---------------------------------------------------------------------------
# β_n
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class BetaEstimate:
    n: int
    term1: float
    term2: float
    beta: float
    stderr1: float
    stderr2: float
    stderr: float
    draws: int
    a_terms: Tuple[float, float, float, float]
    provenance: str = "exact"

    @property
    def cubic_bound(self) -> float:
        """½(A₁ + A₂ + A₃ + A₄), which dominates term2."""
        return 0.5 * math.fsum(self.a_terms)


def _mean_and_stderr(x: np.ndarray) -> Tuple[float, float]:
    mean = compensated_sum(x) / x.size
    if x.size < 2:
        return mean, math.nan
    return mean, float(np.std(x, ddof=1) / math.sqrt(x.size))


def beta_estimate(
    tm,
    n: int,
    draws: int,
    seed: int,
    threads: int = 1,
    law_x: Optional[Law] = None,
    law_y: Optional[Law] = None,
    scales=None,
    atom_cap: Optional[int] = None,
) -> BetaEstimate:
    """Monte Carlo β_n = E|Z̃_{n+1} − U_{n+1}| + ½E|Z̃³_{n+1} − U³_{n+1}| on shared draws."""
    from hierstein.features.recursion import coupled_decomposition_batch

    if draws <= 0:
        raise InsufficientDataError("beta_estimate needs at least one draw")
    batch = coupled_decomposition_batch(
        tm, n, draws, seed, threads=threads, law_x=law_x, law_y=law_y,
        scales=scales, atom_cap=atom_cap,
    )
    z, u = batch.z_tilde, batch.u
    d1 = np.abs(z - u)
    d2 = 0.5 * np.abs(z**3 - u**3)
    t1, s1 = _mean_and_stderr(d1)
    t2, s2 = _mean_and_stderr(d2)
    _, s = _mean_and_stderr(d1 + d2)

    lin = batch.r_x * batch.u_x + batch.r_y * batch.u_y
    g = batch.gamma_x + batch.gamma_y
    a_terms = (
        compensated_sum(np.abs(lin**3 - u**3)) / draws,
        3.0 * compensated_sum(np.abs(lin**2 * g)) / draws,
        3.0 * compensated_sum(np.abs(lin * g**2)) / draws,
        compensated_sum(np.abs(g) ** 3) / draws,
    )
    est = BetaEstimate(n, t1, t2, t1 + t2, s1, s2, s, draws, a_terms, batch.scales.provenance)
    log.debug("beta n=%d draws=%d beta=%.6g (±%.2g)", n, draws, est.beta, s)
    return est


BETA_CSV_COLUMNS = ("n", "w1", "beta", "term1", "term2", "stderr")


def write_beta_csv(
    estimates: Iterable[BetaEstimate],
    path: Path | str,
    w1_values: Optional[Sequence[float]] = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    estimates = list(estimates)
    w1_values = list(w1_values) if w1_values is not None else [math.nan] * len(estimates)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BETA_CSV_COLUMNS)
        for est, d in zip(estimates, w1_values):
            writer.writerow([est.n, fmt17(d), fmt17(est.beta), fmt17(est.term1),
                             fmt17(est.term2), fmt17(est.stderr)])
    return path
