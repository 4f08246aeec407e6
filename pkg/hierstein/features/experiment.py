# hierstein/features/experiment.py
# Experiment configuration (pydantic over JSON), the distance-decay pipeline, the log-linear
# decay fit and the CSV/report artifacts.
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import sympy
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy import stats

from hierstein.config import DEFAULT_FIT_SKIP, GAMMA_MARGIN, default_atom_cap, default_threads
from hierstein.errors import (
    CapExceededError,
    ConfigError,
    HierSteinError,
    InfeasibleEnvelopeError,
    InsufficientDataError,
    ModelValidationError,
)
from hierstein.features import bounds, metrics, recursion
from hierstein.features.zero_bias import zero_bias
from hierstein.laws import (
    STANDARD_NORMAL,
    DiscreteDistribution,
    EmpiricalSample,
    PiecewiseLinearCDF,
    bernoulli,
    make_discrete,
    point_mass,
    rademacher,
    standardize,
    two_point,
    uniform_on,
)
from hierstein.utils.numeric import fmt17
from hierstein.utils.streams import TAG_X, TAG_Y, replicate_seed

log = logging.getLogger("hierstein.experiment")

VERDICT_CONSISTENT = "bound consistent"
VERDICT_INCONSISTENT = "bound inconsistent"
VERDICT_NO_CLAIM = "hypotheses not met — no claim"
DECAY_COLUMNS = ("n", "method", "d_n", "stderr", "beta_n", "r_x", "r_y", "gap_flag")
ZERO_BIAS_COLUMNS = ("n", "d_n", "zb_n", "factor2_ok")


# ---------------------------------------------------------------------------
# Config schema
# ---------------------------------------------------------------------------
class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


Coefficient = Union[float, str]


def parse_coefficient(value: Coefficient) -> float:
    """Numbers pass through; strings such as "1/sqrt(2)" are evaluated with sympy."""
    if isinstance(value, (int, float)):
        out = float(value)
    else:
        try:
            out = float(sympy.sympify(value, rational=True).evalf(30))
        except (sympy.SympifyError, TypeError, ValueError) as e:
            raise ValueError(f"cannot evaluate coefficient {value!r}: {e}") from e
    if not math.isfinite(out):
        raise ValueError(f"coefficient {value!r} is not finite")
    return out


class GeometricRuleSection(_Strict):
    base: float = Field(0.0, ge=0)
    ratio: float = Field(1.0, ge=0)

    def build(self) -> recursion.GeometricRule:
        return recursion.GeometricRule(self.base, self.ratio)


class LawSection(_Strict):
    kind: Literal["rademacher", "bernoulli", "two_point", "uniform_on", "point_mass", "discrete"]
    p: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None
    x: Optional[float] = None
    values: Optional[List[float]] = None
    weights: Optional[List[float]] = None
    standardize: bool = False

    @model_validator(mode="after")
    def _parameters_present(self):
        need = {
            "bernoulli": ("p",), "two_point": ("a", "b"), "uniform_on": ("values",),
            "point_mass": ("x",), "discrete": ("values", "weights"),
        }.get(self.kind, ())
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ValueError(f"law kind {self.kind!r} needs {missing}")
        return self

    def build(self) -> DiscreteDistribution:
        builders = {
            "rademacher": lambda: rademacher(),
            "bernoulli": lambda: bernoulli(self.p),
            "two_point": lambda: two_point(self.a, self.b),
            "uniform_on": lambda: uniform_on(self.values),
            "point_mass": lambda: point_mass(self.x),
            "discrete": lambda: make_discrete(self.values, self.weights),
        }
        law = builders[self.kind]()
        return standardize(law) if self.standardize else law


class PerturbationSection(_Strict):
    kind: Literal["none", "independent", "dependent_quadratic"] = "none"
    law: Optional[LawSection] = None
    scale: GeometricRuleSection = GeometricRuleSection()

    def build(self) -> recursion.PerturbationSpec:
        return recursion.PerturbationSpec(
            self.kind, self.law.build() if self.law else None, self.scale.build()
        )


class CoefficientSection(_Strict):
    rule: Literal["constant", "per_level"] = "constant"
    values: Optional[List[Coefficient]] = None
    levels: Optional[List[List[Coefficient]]] = None

    @field_validator("values")
    @classmethod
    def _parse_values(cls, v):
        return None if v is None else [parse_coefficient(x) for x in v]

    @field_validator("levels")
    @classmethod
    def _parse_levels(cls, v):
        return None if v is None else [[parse_coefficient(x) for x in row] for row in v]

    @model_validator(mode="after")
    def _matches_rule(self):
        if self.rule == "constant" and not self.values:
            raise ValueError("constant rule needs 'values'")
        if self.rule == "per_level" and not self.levels:
            raise ValueError("per_level rule needs 'levels'")
        return self

    def build(self) -> recursion.CoefficientSchedule:
        if self.rule == "constant":
            return recursion.CoefficientSchedule.constant(self.values)
        return recursion.CoefficientSchedule(tuple(tuple(r) for r in self.levels))

    @property
    def width(self) -> int:
        return len(self.values) if self.rule == "constant" else len(self.levels[0])


class ModelSection(_Strict):
    effect: Literal["x", "y"]
    k: int = Field(ge=2)
    coefficients: CoefficientSection
    initial: LawSection
    perturbation: PerturbationSection = PerturbationSection()

    @model_validator(mode="after")
    def _k_matches(self):
        if self.coefficients.width != self.k:
            raise ValueError(f"effect {self.effect}: k={self.k} but {self.coefficients.width} coefficients")
        return self

    def build(self) -> recursion.RecursionModel:
        return recursion.RecursionModel(
            self.coefficients.build(), self.initial.build(), self.perturbation.build(), self.effect
        )


class OutputSection(_Strict):
    dir: Optional[str] = None
    csv: str = "decay.csv"
    report: str = "report.txt"
    beta_csv: str = "beta.csv"
    zero_bias_csv: str = "zero_bias.csv"


class ExperimentConfig(_Strict):
    models: List[ModelSection]
    n_max: int = Field(ge=2)
    method: Literal["exact", "pool", "both"] = "exact"
    pool_size: int = Field(100_000, ge=recursion.MIN_POOL_SIZE)
    replicates: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    atom_cap: Optional[int] = Field(None, ge=1)
    fit_skip: int = Field(DEFAULT_FIT_SKIP, ge=0)
    zero_bias_distances: bool = False
    beta_draws: int = Field(0, ge=0)
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def _one_model_per_effect(self):
        effects = sorted(m.effect for m in self.models)
        if effects != ["x", "y"]:
            raise ValueError(f"need exactly one 'x' and one 'y' model, got {effects}")
        return self

    def model(self, effect: str) -> ModelSection:
        return next(m for m in self.models if m.effect == effect)


def _config_error(e: ValidationError) -> ConfigError:
    parts = [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()]
    return ConfigError("invalid experiment config: " + "; ".join(parts))


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise _config_error(e) from None


def load_config(path: Path | str) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    return parse_config(data)


def build_models(cfg: ExperimentConfig) -> recursion.TwoEffectModel:
    try:
        return recursion.TwoEffectModel(cfg.model("x").build(), cfg.model("y").build())
    except (ModelValidationError, HierSteinError):
        raise
    except ValueError as e:
        raise ModelValidationError(str(e)) from None


# ---------------------------------------------------------------------------
# Decay fit
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class DecayFit:
    c_fit: float
    gamma_fit: float
    band: Tuple[float, float]
    c_band: Tuple[float, float]
    rows_used: int

    def __iter__(self):
        return iter((self.c_fit, self.gamma_fit, self.band))


def fit_decay(rows: Sequence[Tuple[int, float]], confidence: float = 0.95) -> DecayFit:
    """Least squares of log d_n on n; γ = e^slope with a t-quantile band."""
    pts = [(float(n), float(d)) for n, d in rows if d > 0 and math.isfinite(d)]
    if len(pts) < 3:
        raise InsufficientDataError(f"decay fit needs ≥ 3 positive rows, got {len(pts)}")
    ns = np.array([p[0] for p in pts])
    ys = np.log([p[1] for p in pts])
    res = stats.linregress(ns, ys)
    t = stats.t.ppf(0.5 + confidence / 2, df=len(pts) - 2)
    slope_half = t * res.stderr
    icpt_half = t * res.intercept_stderr
    return DecayFit(
        c_fit=math.exp(res.intercept),
        gamma_fit=math.exp(res.slope),
        band=(math.exp(res.slope - slope_half), math.exp(res.slope + slope_half)),
        c_band=(math.exp(res.intercept - icpt_half), math.exp(res.intercept + icpt_half)),
        rows_used=len(pts),
    )


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class DecayRow:
    n: int
    method: str
    d_n: float
    stderr: float = math.nan
    beta_n: float = math.nan
    r_x: float = math.nan
    r_y: float = math.nan
    gap_flag: Optional[bool] = None

    def csv_fields(self) -> List[str]:
        gap = "" if self.gap_flag is None else str(int(self.gap_flag))
        return [str(self.n), self.method, fmt17(self.d_n), fmt17(self.stderr),
                fmt17(self.beta_n), fmt17(self.r_x), fmt17(self.r_y), gap]


@dataclass(frozen=True)
class ZeroBiasRow:
    n: int
    d_n: float
    zb_n: float

    @property
    def factor2_ok(self) -> bool:
        return self.d_n <= 2.0 * self.zb_n + 1e-12


@dataclass
class DecayCurve:
    rows: List[DecayRow]
    fit: Optional[DecayFit]
    report: Optional[bounds.RateReport]
    fit_skip: int = DEFAULT_FIT_SKIP
    zero_bias_rows: List[ZeroBiasRow] = field(default_factory=list)
    beta_estimates: List[metrics.BetaEstimate] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def gamma_fit(self) -> float:
        return self.fit.gamma_fit if self.fit else math.nan

    @property
    def c_fit(self) -> float:
        return self.fit.c_fit if self.fit else math.nan

    @property
    def gamma_total(self) -> float:
        return self.report.gamma_total if self.report else math.nan

    @property
    def verdict(self) -> str:
        return verdict(self.report, self.gamma_fit)


def verdict(report: Optional[bounds.RateReport], gamma_fit: float) -> str:
    """Never claims inconsistency while a hypothesis fails."""
    if report is None or not report.hypotheses_met or not math.isfinite(gamma_fit):
        return VERDICT_NO_CLAIM
    if gamma_fit <= report.gamma_total + GAMMA_MARGIN:
        return VERDICT_CONSISTENT
    return VERDICT_INCONSISTENT


def qualifying_rows(rows: Sequence[DecayRow], fit_skip: int) -> List[Tuple[int, float]]:
    """Exact rows all qualify; sampled rows need d_n > 10·stderr (all, with one replicate)."""
    out = []
    for r in rows:
        if r.n < fit_skip:
            continue
        if r.method == "exact" or not math.isfinite(r.stderr) or r.d_n > 10.0 * r.stderr:
            out.append((r.n, r.d_n))
    return out


def _rate_report(tm: recursion.TwoEffectModel, n_max: int, notes: List[str]):
    if not tm.is_exact:
        notes.append("rate report needs exact moments; dependent perturbation present")
        return None, None
    horizon = max(n_max, 3)
    try:
        cx = bounds.fit_model_constants(tm.model_x, horizon)
        cy = bounds.fit_model_constants(tm.model_y, horizon)
    except InfeasibleEnvelopeError as e:
        log.warning("envelope fit infeasible: %s", e)
        notes.append(str(e))
        return None, None
    return bounds.rate_report(cx, cy, tm, horizon), bounds.rn_series(tm, n_max)


def _exact_z_laws(tm, n_max: int, cap: int):
    xs = recursion.propagate_levels(tm.model_x, n_max, cap)
    ys = recursion.propagate_levels(tm.model_y, n_max, cap)
    zs = [standardize(x.convolve(y, cap=cap)) for x, y in zip(xs, ys)]
    return xs, ys, zs


def _pool_distances(tm, cfg: ExperimentConfig, threads: int, levels: int):
    """Per-level d_n over replicates, plus the first replicate's pools."""
    per_rep = []
    first = None
    for r in range(cfg.replicates):
        seed = replicate_seed(cfg.seed, r)
        px = recursion.sample_pool_levels(tm.model_x, levels, cfg.pool_size, seed, threads, TAG_X)
        py = recursion.sample_pool_levels(tm.model_y, levels, cfg.pool_size, seed, threads, TAG_Y)
        if first is None:
            first = (px, py)
        per_rep.append([
            metrics.w1(EmpiricalSample(px[n] + py[n], seed, (TAG_X, n)).standardized(), STANDARD_NORMAL)
            for n in range(cfg.n_max + 1)
        ])
        log.info("replicate %d/%d done", r + 1, cfg.replicates)
    d = np.asarray(per_rep)
    mean = d.mean(axis=0)
    stderr = d.std(axis=0, ddof=1) / math.sqrt(d.shape[0]) if d.shape[0] > 1 else np.full(d.shape[1], math.nan)
    return mean, stderr, first


def run_experiment(cfg: ExperimentConfig, threads: Optional[int] = None) -> DecayCurve:
    tm = build_models(cfg)
    cap = cfg.atom_cap or default_atom_cap()
    threads = threads or default_threads()
    notes: List[str] = []
    report, rn = _rate_report(tm, cfg.n_max, notes)

    def _r(n):
        if rn is None:
            return math.nan, math.nan, None
        row = rn.rows[n]
        return row.r_x, row.r_y, row.gap_ok

    rows: List[DecayRow] = []
    zb_rows: List[ZeroBiasRow] = []
    betas: Dict[str, List[metrics.BetaEstimate]] = {}

    if cfg.method in ("exact", "both"):
        xs, ys, zs = _exact_z_laws(tm, cfg.n_max, cap)
        est = []
        for n, z in enumerate(zs):
            d = metrics.w1(z, STANDARD_NORMAL)
            beta = math.nan
            if cfg.beta_draws:
                b = metrics.beta_estimate(tm, n, cfg.beta_draws, cfg.seed, threads,
                                          law_x=xs[n], law_y=ys[n], atom_cap=cap)
                est.append(b)
                beta = b.beta
            if cfg.zero_bias_distances:
                zb_rows.append(ZeroBiasRow(n, d, metrics.w1(z, zero_bias(z))))
            r_x, r_y, gap = _r(n)
            rows.append(DecayRow(n, "exact", d, math.nan, beta, r_x, r_y, gap))
            log.info("exact n=%d d_n=%.6g (%d atoms)", n, d, z.size)
        betas["exact"] = est

    if cfg.method in ("pool", "both"):
        levels = cfg.n_max + 1 if cfg.beta_draws else cfg.n_max
        mean, stderr, (px, py) = _pool_distances(tm, cfg, threads, levels)
        est = []
        for n in range(cfg.n_max + 1):
            beta = math.nan
            if cfg.beta_draws:
                scales = None if tm.is_exact else recursion.level_scales(tm, n, px, py)
                b = metrics.beta_estimate(
                    tm, n, cfg.beta_draws, cfg.seed, threads,
                    law_x=EmpiricalSample(px[n]), law_y=EmpiricalSample(py[n]), scales=scales,
                )
                est.append(b)
                beta = b.beta
            r_x, r_y, gap = _r(n)
            rows.append(DecayRow(n, "pool", float(mean[n]), float(stderr[n]), beta, r_x, r_y, gap))
            log.info("pool n=%d d_n=%.6g", n, mean[n])
        betas["pool"] = est

    fit_method = "exact" if cfg.method in ("exact", "both") else "pool"
    fit = None
    try:
        fit = fit_decay(qualifying_rows([r for r in rows if r.method == fit_method], cfg.fit_skip))
    except InsufficientDataError as e:
        log.warning("decay fit skipped: %s", e)
        notes.append(str(e))

    curve = DecayCurve(rows, fit, report, cfg.fit_skip, zb_rows, betas.get(fit_method, []), notes)
    log.info("gamma_fit=%.6g gamma_total=%.6g verdict=%s",
             curve.gamma_fit, curve.gamma_total, curve.verdict)
    return curve


def exact_atom_counts(cfg: ExperimentConfig) -> Tuple[int, int]:
    """Atom counts of X_{n_max} and Y_{n_max}; raises CapExceededError past the cap."""
    tm = build_models(cfg)
    cap = cfg.atom_cap or default_atom_cap()
    x = recursion.propagate_exact(tm.model_x, cfg.n_max, cap)
    y = recursion.propagate_exact(tm.model_y, cfg.n_max, cap)
    if x.size * y.size > cap:
        raise CapExceededError(x.size * y.size, cap)
    return x.size, y.size


def zero_bias_of_level(cfg: ExperimentConfig, n: int, effect: str = "z") -> PiecewiseLinearCDF:
    """Zero-bias law of the standardized exact level-n law of X, Y or Z."""
    tm = build_models(cfg)
    cap = cfg.atom_cap or default_atom_cap()
    if effect == "x":
        law = recursion.propagate_exact(tm.model_x, n, cap)
    elif effect == "y":
        law = recursion.propagate_exact(tm.model_y, n, cap)
    elif effect == "z":
        law = recursion.propagate_exact(tm.model_x, n, cap).convolve(
            recursion.propagate_exact(tm.model_y, n, cap), cap=cap)
    else:
        raise ConfigError(f"effect must be x, y or z, got {effect!r}")
    return zero_bias(standardize(law))


# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------
def report_text(curve: DecayCurve, report: Optional[bounds.RateReport]) -> str:
    if report is not None:
        body = report.to_text()
    else:
        body = "".join(f"{k}=nan\n" for k in bounds.REPORT_KEYS)
    body += f"gamma_fit={fmt17(curve.gamma_fit)}\n"
    body += f"c_fit={fmt17(curve.c_fit)}\n"
    if curve.fit is not None:
        body += f"gamma_fit_band={fmt17(curve.fit.band[0])},{fmt17(curve.fit.band[1])}\n"
    for note in curve.notes:
        body += f"note={note}\n"
    body += f"verdict={verdict(report, curve.gamma_fit)}\n"
    return body


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def emit_report(
    curve: DecayCurve,
    report: Optional[bounds.RateReport],
    path: Path | str,
    output: Optional[OutputSection] = None,
) -> Dict[str, Path]:
    output = output or OutputSection()
    out_dir = Path(path)
    written: Dict[str, Path] = {}
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written["csv"] = out_dir / output.csv
        _write_csv(written["csv"], DECAY_COLUMNS, [r.csv_fields() for r in curve.rows])
        written["report"] = out_dir / output.report
        written["report"].write_text(report_text(curve, report), encoding="utf-8")
        if curve.zero_bias_rows:
            written["zero_bias"] = out_dir / output.zero_bias_csv
            _write_csv(written["zero_bias"], ZERO_BIAS_COLUMNS, [
                [str(z.n), fmt17(z.d_n), fmt17(z.zb_n), str(int(z.factor2_ok))]
                for z in curve.zero_bias_rows
            ])
        if curve.beta_estimates:
            method = "exact" if any(r.method == "exact" for r in curve.rows) else "pool"
            d = [r.d_n for r in curve.rows if r.method == method]
            written["beta"] = metrics.write_beta_csv(
                curve.beta_estimates, out_dir / output.beta_csv, d[: len(curve.beta_estimates)]
            )
    except OSError as e:
        raise HierSteinError(f"cannot write artifacts to {out_dir}: {e}") from None
    log.info("artifacts written to %s", out_dir)
    return written
