# hierstein/main.py
from __future__ import annotations

import functools
import logging
import sys
from pathlib import Path
from typing import Optional

import click
from tabulate import tabulate

from hierstein.config import default_out_dir, setup_logging
from hierstein.diagnostics import DiagnosticsReport
from hierstein.errors import HierSteinError, UnsupportedPerturbationError
from hierstein.features import bounds, experiment
from hierstein.laws import to_record
from hierstein.utils.numeric import fmt17

log = logging.getLogger("hierstein.cli")


# ===================== Shared plumbing =====================
def _load(config: str, seed: Optional[int], method: Optional[str] = None) -> experiment.ExperimentConfig:
    cfg = experiment.load_config(config)
    update = {}
    if seed is not None:
        update["seed"] = seed
    if method is not None:
        update["method"] = method
    return cfg.model_copy(update=update) if update else cfg


def _out_dir(cfg: experiment.ExperimentConfig, out: Optional[str]) -> Path:
    if out:
        return Path(out)
    if cfg.output.dir:
        return Path(cfg.output.dir)
    return default_out_dir()


def _exit_on_error(fn):
    """Uncaught HierSteinError becomes a one-line message plus its exit code."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except HierSteinError as e:
            log.debug("command failed", exc_info=True)
            click.echo(f"error: {e}", err=True)
            sys.exit(e.exit_code)

    return wrapper


config_option = click.option("--config", "config", required=True,
                              type=click.Path(dir_okay=False), help="experiment JSON")
seed_option = click.option("--seed", type=int, default=None, help="override the master seed")
out_option = click.option("--out", type=click.Path(file_okay=False), default=None,
                          help="artifact directory")
threads_option = click.option("--threads", type=int, default=None, help="worker threads")


@click.group()
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING ...")
def cli(log_level: Optional[str]) -> None:
    """Stein/zero-bias checks for two-effect hierarchical recursions."""
    setup_logging(log_level)


# ===================== Commands =====================
@cli.command()
@config_option
@_exit_on_error
def validate(config: str) -> None:
    """Check a config file and the models it describes."""
    cfg = experiment.load_config(config)
    tm = experiment.build_models(cfg)
    rows = []
    for m in (tm.model_x, tm.model_y):
        rows.append([m.name, m.k, fmt17(m.lambda_limit), m.initial.size, m.perturbation.kind])
    click.echo(tabulate(rows, headers=["effect", "k", "lambda_limit", "initial atoms", "perturbation"]))
    if cfg.method in ("exact", "both"):
        sizes = experiment.exact_atom_counts(cfg)
        click.echo(f"exact atoms at n={cfg.n_max}: x={sizes[0]} y={sizes[1]} z<={sizes[0] * sizes[1]}")
    click.echo(f"config ok: n_max={cfg.n_max} method={cfg.method}")


def _run(config, seed, out, threads, method) -> None:
    cfg = _load(config, seed, method)
    curve = experiment.run_experiment(cfg, threads=threads)
    written = experiment.emit_report(curve, curve.report, _out_dir(cfg, out), cfg.output)
    table = [[r.n, r.method, fmt17(r.d_n), fmt17(r.stderr)] for r in curve.rows]
    click.echo(tabulate(table, headers=["n", "method", "d_n", "stderr"]))
    click.echo(f"gamma_fit={fmt17(curve.gamma_fit)} gamma_total={fmt17(curve.gamma_total)}")
    click.echo(f"verdict: {curve.verdict}")
    for name, path in written.items():
        click.echo(f"wrote {name}: {path}")


@cli.command()
@config_option
@seed_option
@out_option
@threads_option
@_exit_on_error
def exact(config, seed, out, threads) -> None:
    """Exact propagation of every level."""
    _run(config, seed, out, threads, "exact")


@cli.command()
@config_option
@seed_option
@out_option
@threads_option
@_exit_on_error
def simulate(config, seed, out, threads) -> None:
    """Monte Carlo pool propagation."""
    _run(config, seed, out, threads, "pool")


@cli.command(name="experiment")
@config_option
@seed_option
@out_option
@threads_option
@_exit_on_error
def experiment_cmd(config, seed, out, threads) -> None:
    """Full pipeline with the method named in the config."""
    _run(config, seed, out, threads, None)


@cli.command()
@config_option
@click.option("--level", "level", type=int, required=True)
@click.option("--effect", type=click.Choice(["x", "y", "z"]), default="z", show_default=True)
@out_option
@_exit_on_error
def zerobias(config: str, level: int, effect: str, out: Optional[str]) -> None:
    """Dump the zero-bias law of a standardized level."""
    cfg = experiment.load_config(config)
    text = to_record(experiment.zero_bias_of_level(cfg, level, effect))
    if out is None:
        click.echo(text, nl=False)
        return
    path = Path(out) / f"zero_bias_{effect}_{level}.txt"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise HierSteinError(f"cannot write {path}: {e}") from None
    click.echo(f"wrote {path}")


@cli.command(name="bounds")
@config_option
@out_option
@_exit_on_error
def bounds_cmd(config: str, out: Optional[str]) -> None:
    """RateReport only: envelopes, φ, ψ, γ and hypothesis flags."""
    cfg = experiment.load_config(config)
    tm = experiment.build_models(cfg)
    if not tm.is_exact:
        raise UnsupportedPerturbationError("bounds need exact perturbation moments")
    horizon = max(cfg.n_max, 3)
    cx = bounds.fit_model_constants(tm.model_x, horizon)
    cy = bounds.fit_model_constants(tm.model_y, horizon)
    report = bounds.rate_report(cx, cy, tm, horizon)
    click.echo(tabulate([[k, fmt17(v)] for k, v in report.as_dict().items()],
                        headers=["key", "value"]))
    click.echo(DiagnosticsReport.from_checks("rate report", report.checks()).as_text())
    if out is not None:
        path = Path(out) / cfg.output.report
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(report.to_text(), encoding="utf-8")
        except OSError as e:
            raise HierSteinError(f"cannot write {path}: {e}") from None
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    cli()
