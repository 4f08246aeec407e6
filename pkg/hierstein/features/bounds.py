# hierstein/features/bounds.py
# Moment envelopes (C, δ), the rate quantities φ, ψ, γ and the r_n series, with every
# hypothesis kept as a flag rather than an exception.
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from hierstein.config import (
    DELTA_FLOOR,
    DELTA_P2_CAP,
    DELTA_P4_CAP,
    GAP_ZERO_TOL,
)
from hierstein.diagnostics import CheckResult
from hierstein.errors import DegenerateLawError, InfeasibleEnvelopeError, InsufficientDataError
from hierstein.features.recursion import (
    MomentState,
    RecursionModel,
    TwoEffectModel,
    moment_recursion,
    next_sigma,
    perturbation_moments,
)
from hierstein.utils.numeric import binomial_chain, fmt17

log = logging.getLogger("hierstein.bounds")

_ENVELOPE_RTOL = 1e-12


def coefficient_stats(m: RecursionModel, n: Optional[int] = None) -> Tuple[float, float]:
    """(λ_{a,n}, φ_{a,n}) with φ = Σ|a|³/λ³; n=None uses the limit coefficients."""
    a = np.abs(m.coefficients.limit if n is None else m.coefficients_at(n))
    lam = math.sqrt(math.fsum(a**2))
    return lam, math.fsum(a**3) / lam**3


# ---------------------------------------------------------------------------
# Envelope fitting
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ConditionConstants:
    c_x2: float
    delta_x2: float
    c_p2: float
    delta_p2: float
    c_x4: float
    delta_x4: float
    c_p4: float
    delta_p4: float
    lambda_limit: float

    def __post_init__(self):
        if not 0 < self.delta_x2 < self.delta_p2 < 1:
            raise InfeasibleEnvelopeError("envelope", self.delta_x2, self.delta_p2)
        if self.delta_x4 < 0 or self.delta_p4 < 0:
            raise ValueError("fourth-moment δ's are non-negative")
        if min(self.c_x2, self.c_p2, self.c_x4, self.c_p4) <= 0:
            raise ValueError("envelope constants must be positive")

    def violations(
        self,
        moments: Sequence[MomentState],
        pert_moments: Sequence[Tuple[float, float, float]],
    ) -> List[Tuple[int, str]]:
        """Levels where a fitted inequality fails on direct substitution."""
        lam = self.lambda_limit
        bad: List[Tuple[int, str]] = []
        for s, (_, pvar, p4) in zip(moments, pert_moments):
            n = s.n
            checks = {
                "var_x": s.variance >= (self.c_x2 * (lam * (1 - self.delta_x2)) ** n) ** 2 * (1 - _ENVELOPE_RTOL),
                "mu4_x": s.fourth <= (self.c_x4 * (lam * (1 + self.delta_x4)) ** n) ** 4 * (1 + _ENVELOPE_RTOL),
                "var_p": pvar <= (self.c_p2 * (lam * (1 - self.delta_p2)) ** n) ** 2 * (1 + _ENVELOPE_RTOL),
                "mu4_p": p4 <= (self.c_p4 * (lam * (1 - self.delta_p4)) ** n) ** 4 * (1 + _ENVELOPE_RTOL),
            }
            bad.extend((n, name) for name, ok in checks.items() if not ok)
        return bad


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _lower_hull(points: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    hull: List[Tuple[float, float]] = []
    for p in points:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) <= 0:
            hull.pop()
        hull.append(p)
    return hull


def _final_edge_slope(ns: Sequence[int], ys: Sequence[float], upper: bool) -> Optional[float]:
    """Slope of the hull edge ending at the last level, or None below two points."""
    pts = [(float(n), -y if upper else y) for n, y in zip(ns, ys)]
    if len(pts) < 2:
        return None
    hull = _lower_hull(pts)
    (x0, y0), (x1, y1) = hull[-2], hull[-1]
    slope = (y1 - y0) / (x1 - x0)
    return -slope if upper else slope


def _log_profile(values: Sequence[float], lam: float, root: int) -> Tuple[List[int], List[float]]:
    """n ↦ (1/root)·log v_n − n log λ over the levels with v_n > 0."""
    ns, ys = [], []
    for n, v in enumerate(values):
        if v > 0:
            ns.append(n)
            ys.append(math.log(v) / root - n * math.log(lam))
    return ns, ys


def _tight_constant(ns, ys, rate: float, lower: bool) -> float:
    """C making the envelope exp(log C + n log rate) tight at its binding level."""
    shifted = [y - n * math.log(rate) for n, y in zip(ns, ys)]
    return math.exp(min(shifted) if lower else max(shifted))


def fit_condition_constants(
    moments: Sequence[MomentState],
    pert_moments: Sequence[Tuple[float, float, float]],
    lambda_limit: float,
    horizon: int,
    label: str = "x",
) -> ConditionConstants:
    """Finite-horizon envelopes from the log-moment profiles.

    Each δ comes from the hull edge ending at the horizon (lower hull for the state
    variance, upper hull otherwise); C is then the tight constant over every level.
    """
    if horizon < 3:
        raise InsufficientDataError("envelope fitting needs horizon ≥ 3")
    if len(moments) < horizon + 1 or len(pert_moments) < horizon + 1:
        raise InsufficientDataError(f"need moments for levels 0..{horizon}")
    states = list(moments)[: horizon + 1]
    perts = list(pert_moments)[: horizon + 1]
    if any(s.variance <= 0 for s in states):
        raise DegenerateLawError(f"model {label}: zero variance inside the horizon")
    lam = lambda_limit

    ns, ys = _log_profile([s.variance for s in states], lam, 2)
    s = _final_edge_slope(ns, ys, upper=False)
    delta_x2 = max(DELTA_FLOOR, 1.0 - math.exp(s))
    c_x2 = _tight_constant(ns, ys, 1.0 - delta_x2, lower=True)

    ns4, ys4 = _log_profile([st.fourth for st in states], lam, 4)
    s4 = _final_edge_slope(ns4, ys4, upper=True)
    delta_x4 = max(0.0, math.exp(s4) - 1.0)
    c_x4 = _tight_constant(ns4, ys4, 1.0 + delta_x4, lower=False)

    pn, py = _log_profile([p[1] for p in perts], lam, 2)
    sp = _final_edge_slope(pn, py, upper=True)
    if sp is None:
        delta_p2, c_p2 = DELTA_P2_CAP, c_x2
        if pn:
            c_p2 = max(c_p2, _tight_constant(pn, py, 1.0 - delta_p2, lower=False))
    else:
        delta_p2 = 1.0 - math.exp(sp)
        if delta_p2 <= delta_x2 or delta_p2 >= 1.0:
            raise InfeasibleEnvelopeError(label, delta_x2, delta_p2)
        c_p2 = _tight_constant(pn, py, 1.0 - delta_p2, lower=False)

    pn4, py4 = _log_profile([p[2] for p in perts], lam, 4)
    sp4 = _final_edge_slope(pn4, py4, upper=True)
    if sp4 is None:
        delta_p4, c_p4 = DELTA_P4_CAP, c_x4
        if pn4:
            c_p4 = max(c_p4, _tight_constant(pn4, py4, 1.0 - delta_p4, lower=False))
    else:
        delta_p4 = min(max(0.0, 1.0 - math.exp(sp4)), DELTA_P4_CAP)
        c_p4 = _tight_constant(pn4, py4, 1.0 - delta_p4, lower=False)

    if delta_x2 >= delta_p2:
        raise InfeasibleEnvelopeError(label, delta_x2, delta_p2)
    cc = ConditionConstants(c_x2, delta_x2, c_p2, delta_p2, c_x4, delta_x4, c_p4, delta_p4, lam)
    log.debug("model %s envelopes: %s", label, cc)
    return cc


def fit_model_constants(m: RecursionModel, horizon: int) -> ConditionConstants:
    return fit_condition_constants(
        moment_recursion(m, horizon), perturbation_moments(m, horizon),
        m.lambda_limit, horizon, label=m.name,
    )


# ---------------------------------------------------------------------------
# Rate report
# ---------------------------------------------------------------------------
def phi_2(c: ConditionConstants) -> float:
    return (1 - c.delta_p2) * (1 + c.delta_x4) ** 3 / (1 - c.delta_x2) ** 4


def phi_4(c: ConditionConstants) -> float:
    return ((1 - c.delta_p4) / (1 - c.delta_x2)) ** 2


def psi(c_self: ConditionConstants, c_other: ConditionConstants) -> float:
    """ψ_{self,other}: the other effect's perturbation against this effect's state."""
    return ((1 - c_other.delta_p2) * (1 + c_self.delta_x4) ** 3
            / ((1 - c_other.delta_x2) * (1 - c_self.delta_x2) ** 3))


def variance_gap_ok(var_x: float, var_y: float, pvar_x: float, pvar_y: float,
                    lambda_a2: float, lambda_b2: float) -> bool:
    """|VarX − VarY| ≤ (VarΔ + VarΛ)/max(λ_a², λ_b²); with no perturbation, equality."""
    gap = abs(var_x - var_y)
    if pvar_x + pvar_y == 0.0:
        return gap <= GAP_ZERO_TOL
    return gap <= (pvar_x + pvar_y) / max(lambda_a2, lambda_b2)


REPORT_KEYS = (
    "phi_x2", "phi_x4", "phi_y2", "phi_y4", "psi_xy", "psi_yx", "gamma_beta",
    "gamma_x_single", "gamma_y_single", "gamma_total",
)


@dataclass(frozen=True)
class RateReport:
    phi_x2: float
    phi_x4: float
    phi_y2: float
    phi_y4: float
    psi_xy: float
    psi_yx: float
    gamma_beta: float
    gamma_beta_literal: float
    gamma_x_single: float
    gamma_y_single: float
    gamma_total: float
    phi_a_limit: float
    phi_b_limit: float
    horizon: int
    gap_flags: Tuple[bool, ...] = ()
    flags: Dict[str, bool] = field(default_factory=dict)

    @property
    def hypotheses_met(self) -> bool:
        return all(self.flags.values()) and all(self.gap_flags)

    def as_dict(self) -> Dict[str, float]:
        return {k: getattr(self, k) for k in REPORT_KEYS}

    def to_text(self) -> str:
        lines = [f"{k}={fmt17(v)}" for k, v in self.as_dict().items()]
        if self.gamma_beta_literal != self.gamma_beta:
            lines.append(f"gamma_beta_literal={fmt17(self.gamma_beta_literal)}")
        lines.append("gamma_single_note=surrogate max(phi_2, phi_4^1.5, phi_a_limit)")
        for name, ok in self.flags.items():
            lines.append(f"flag_{name}={'pass' if ok else 'fail'}")
        lines.append("flag_variance_gap=" + ("pass" if all(self.gap_flags) else "fail"))
        return "\n".join(lines) + "\n"

    def csv_row(self) -> List[str]:
        return [fmt17(v) for v in self.as_dict().values()]

    def checks(self) -> List[CheckResult]:
        out = [
            CheckResult(f"{name} < 1", ok, f"{name}={getattr(self, name):.6g}")
            for name, ok in self.flags.items()
        ]
        failed = [n for n, ok in enumerate(self.gap_flags) if not ok]
        out.append(CheckResult(
            "variance gap", not failed,
            f"fails at levels {failed}" if failed else f"holds at levels 0..{len(self.gap_flags) - 1}",
        ))
        if self.gamma_beta_literal != self.gamma_beta:
            out.append(CheckResult(
                "gamma_beta literal reading", True,
                f"literal={self.gamma_beta_literal:.6g} vs {self.gamma_beta:.6g}", warn=True,
            ))
        return out


def rate_report(
    cx: ConditionConstants,
    cy: ConditionConstants,
    tm: TwoEffectModel,
    horizon: int,
) -> RateReport:
    phi_x2, phi_y2 = phi_2(cx), phi_2(cy)
    phi_x4, phi_y4 = phi_4(cx), phi_4(cy)
    psi_xy, psi_yx = psi(cx, cy), psi(cy, cx)
    gamma_beta = max(phi_x2, phi_y2, phi_x4**1.5, phi_y4**1.5, psi_xy, psi_yx)
    phi_yx_literal = (1 - cx.delta_p2) * (1 + cy.delta_x4) ** 3 / (1 - cy.delta_x2) ** 4
    gamma_beta_literal = max(phi_x2, phi_y2, phi_x4**1.5, phi_y4**1.5, psi_xy, phi_yx_literal)

    _, phi_a = coefficient_stats(tm.model_x)
    _, phi_b = coefficient_stats(tm.model_y)
    gx = max(phi_x2, phi_x4**1.5, phi_a)
    gy = max(phi_y2, phi_y4**1.5, phi_b)

    mx, my = moment_recursion(tm.model_x, horizon), moment_recursion(tm.model_y, horizon)
    gaps = []
    for n in range(horizon + 1):
        gaps.append(variance_gap_ok(
            mx[n].variance, my[n].variance,
            tm.model_x.perturbation.moments_at(n)[1], tm.model_y.perturbation.moments_at(n)[1],
            tm.model_x.lambda2_at(n), tm.model_y.lambda2_at(n),
        ))
    flags = {
        "phi_x2": phi_x2 < 1, "phi_x4": phi_x4 < 1, "phi_y2": phi_y2 < 1, "phi_y4": phi_y4 < 1,
        "psi_xy": psi_xy < 1, "psi_yx": psi_yx < 1,
    }
    report = RateReport(
        phi_x2, phi_x4, phi_y2, phi_y4, psi_xy, psi_yx, gamma_beta, gamma_beta_literal,
        gx, gy, max(gx, gy, gamma_beta), phi_a, phi_b, horizon, tuple(gaps), flags,
    )
    if not report.hypotheses_met:
        log.warning("hypotheses not met: %s",
                    [c.name for c in report.checks() if not c.ok and not c.warn])
    return report


# ---------------------------------------------------------------------------
# r_n series
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class RnRow:
    n: int
    r_x: float
    r_y: float
    bound: float              # 2√(VarΔ_n + VarΛ_n)/σ_{n+1}
    gap_ok: bool
    r_pow_x: Tuple[float, float, float]   # |r^p − 1|, p = 1, 2, 3
    r_pow_y: Tuple[float, float, float]
    chain_x: Tuple[float, float, float]   # Σ_j C(p,j)|r − 1|^j
    chain_y: Tuple[float, float, float]
    e_gamma_x2: float
    e_gamma_x2_bound: float
    e_u_x2: float
    e_gamma_y2: float
    e_gamma_y2_bound: float
    e_u_y2: float

    @property
    def lemma_holds(self) -> bool:
        slack = 1e-12
        return (abs(self.r_x - 1) <= self.bound + slack) and (abs(self.r_y - 1) <= self.bound + slack)

    @property
    def chain_holds(self) -> bool:
        slack = 1e-12
        return all(r <= c + slack for r, c in zip(self.r_pow_x + self.r_pow_y, self.chain_x + self.chain_y))


@dataclass(frozen=True)
class RnSeries:
    rows: Tuple[RnRow, ...]

    def __iter__(self):
        return iter(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def gap_failures(self) -> List[int]:
        return [r.n for r in self.rows if not r.gap_ok]

    def violations(self) -> List[int]:
        """Levels where the gap hypothesis holds but |r − 1| exceeds the stored bound."""
        return [r.n for r in self.rows if r.gap_ok and not r.lemma_holds]

    def as_records(self) -> List[dict]:
        return [asdict(r) for r in self.rows]


def _powers(r: float) -> Tuple[float, float, float]:
    return tuple(abs(r**p - 1.0) for p in (1, 2, 3))


def _chains(r: float) -> Tuple[float, float, float]:
    return tuple(binomial_chain(r - 1.0, p) for p in (1, 2, 3))


def rn_series(tm: TwoEffectModel, n_max: int) -> RnSeries:
    mx, my = moment_recursion(tm.model_x, n_max + 1), moment_recursion(tm.model_y, n_max + 1)
    rows = []
    for n in range(n_max + 1):
        la2, lb2 = tm.model_x.lambda2_at(n), tm.model_y.lambda2_at(n)
        lam = math.sqrt(la2 + lb2)
        pvx = tm.model_x.perturbation.moments_at(n)[1]
        pvy = tm.model_y.perturbation.moments_at(n)[1]
        sx, sy = math.sqrt(mx[n].variance), math.sqrt(my[n].variance)
        if sx <= 0 or sy <= 0:
            raise DegenerateLawError(f"level {n}: zero σ")
        sigma_next = next_sigma(lam, sx, sy, lb2, pvx, pvy)
        if not sigma_next > 0:
            raise DegenerateLawError(f"level {n}: σ_(n+1) is zero")
        r_x, r_y = lam * sx / sigma_next, lam * sy / sigma_next
        s2 = sigma_next * sigma_next
        rows.append(RnRow(
            n=n, r_x=r_x, r_y=r_y,
            bound=2.0 * math.sqrt(pvx + pvy) / sigma_next,
            gap_ok=variance_gap_ok(mx[n].variance, my[n].variance, pvx, pvy, la2, lb2),
            r_pow_x=_powers(r_x), r_pow_y=_powers(r_y),
            chain_x=_chains(r_x), chain_y=_chains(r_y),
            e_gamma_x2=pvx / s2, e_gamma_x2_bound=pvx / mx[n + 1].variance, e_u_x2=la2 / lam**2,
            e_gamma_y2=pvy / s2, e_gamma_y2_bound=pvy / my[n + 1].variance, e_u_y2=lb2 / lam**2,
        ))
    series = RnSeries(tuple(rows))
    if series.gap_failures():
        log.warning("variance-gap hypothesis fails at levels %s", series.gap_failures())
    return series
