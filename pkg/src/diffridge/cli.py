"""Command-line front end: simulate, select, tables, calibration, bundles.

Every command writes a manifest.json (resolved parameters + seed + version)
alongside its outputs; re-running the command with `--config manifest.json`
reproduces the outputs byte for byte. Exit codes: 0 success, 1 runtime or
model failure, 2 usage/config error.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np
from click.core import ParameterSource

from . import __version__, bases, baseline, metrics, selection
from .metrics import ExperimentConfig, mise_experiment, mise_experiment_pair
from .sde import BUILTIN_MODEL_IDS, builtin_model, simulate_sample, true_sigma_sq
from .selection import PenaltySpec, calibrate_kappa, select_dimension

MODEL_CHOICES = click.Choice(BUILTIN_MODEL_IDS, case_sensitive=False)
INTERVAL_CHOICES = click.Choice(("compact", "logn", "logN", "growing", "realline"))
BASIS_CHOICES = click.Choice(("bspline", "fourier", "hermite"))
PENALTY_CHOICES = click.Choice(("auto", "multi", "single", "appendix"))

# Penalty constants calibrated for the compact interval and the real line.
KAPPA_COMPACT = 4.0
KAPPA_REALLINE = 5.0


def _fmt(v) -> str:
    return repr(float(v))


def _parse_L(_ctx, _param, value):
    if value is None or value == "auto":
        return None
    try:
        L = float(value)
    except ValueError:
        raise click.BadParameter("expected 'auto' or a number")
    if L <= 0:
        raise click.BadParameter("L must be positive")
    return L


def _resolve_params(ctx: click.Context, config: str | None, params: dict) -> dict:
    """Merge config-file values under explicitly passed flags."""
    if not config:
        return dict(params)
    try:
        data = json.loads(Path(config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"cannot read config {config}: {exc}")
    if isinstance(data, dict) and "params" in data and "command" in data:
        data = data["params"]
    if not isinstance(data, dict):
        raise click.UsageError("config must be a JSON object")
    unknown = set(data) - set(params)
    if unknown:
        raise click.UsageError(f"unknown config keys: {sorted(unknown)}")
    out = dict(params)
    for key, val in data.items():
        if ctx.get_parameter_source(key) != ParameterSource.COMMANDLINE:
            out[key] = val
    return out


def _write_manifest(out_dir: Path, command: str, params: dict) -> None:
    manifest = {"command": command, "version": __version__, "params": params}
    text = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    (out_dir / "manifest.json").write_text(text)


def _prepare_out(out: str) -> Path:
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _runtime_guard(fn):
    """Map unexpected runtime failures to exit code 1."""

    def wrapped(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except Exception as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    wrapped.__name__ = fn.__name__
    wrapped.__doc__ = fn.__doc__
    return wrapped


@click.group()
@click.version_option(version=__version__)
def main():
    """Ridge estimation of the squared diffusion coefficient of a 1-D SDE."""


@main.command()
@click.option("--model", type=MODEL_CHOICES, default="M1", show_default=True)
@click.option("--N", "N", type=int, default=10, show_default=True)
@click.option("--n", "n", type=int, default=100, show_default=True)
@click.option("--substeps", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.pass_context
@_runtime_guard
def simulate(ctx, model, N, n, substeps, seed, out, config):
    """Simulate a path sample and write it as CSV (one row per path)."""
    params = _resolve_params(ctx, config, dict(model=model.upper(), N=N, n=n,
                                               substeps=substeps, seed=seed))
    sample = simulate_sample(builtin_model(params["model"]), params["N"],
                             params["n"], substeps=params["substeps"],
                             master_seed=params["seed"])
    out_dir = _prepare_out(out)
    header = ",".join(f"x{k}" for k in range(params["n"] + 1))
    lines = [header]
    for row in sample.values:
        lines.append(",".join(_fmt(v) for v in row))
    (out_dir / "paths.csv").write_text("\n".join(lines) + "\n")
    _write_manifest(out_dir, "simulate", params)
    click.echo(f"wrote {out_dir / 'paths.csv'}")


@main.command()
@click.option("--model", type=MODEL_CHOICES, default="M1", show_default=True)
@click.option("--interval", type=INTERVAL_CHOICES, default="compact", show_default=True)
@click.option("--basis", type=BASIS_CHOICES, default="bspline", show_default=True)
@click.option("--N", "N", type=int, default=100, show_default=True)
@click.option("--n", "n", type=int, default=100, show_default=True)
@click.option("--substeps", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--kappa", type=float, default=KAPPA_COMPACT, show_default=True)
@click.option("--penalty", type=PENALTY_CHOICES, default="auto", show_default=True)
@click.option("--L", "L", callback=_parse_L, default="auto", show_default=True)
@click.option("--q-max", type=int, default=5, show_default=True)
@click.option("--M", "M", type=int, default=3, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.pass_context
@_runtime_guard
def select(ctx, model, interval, basis, N, n, substeps, seed, kappa, penalty, L,
           q_max, M, out, config):
    """Simulate a sample, select the dimension, write fit + per-K diagnostics."""
    params = _resolve_params(ctx, config, dict(
        model=model.upper(), interval=interval, basis=basis, N=N, n=n,
        substeps=substeps, seed=seed, kappa=kappa, penalty=penalty, L=L,
        q_max=q_max, M=M))
    setting = metrics.resolve_setting(params["interval"], params["N"], params["n"],
                                      params["basis"], L=params["L"])
    form = setting.penalty_form if params["penalty"] == "auto" else params["penalty"]
    sample = simulate_sample(builtin_model(params["model"]), params["N"],
                             params["n"], substeps=params["substeps"],
                             master_seed=params["seed"])
    grid = bases.dimension_grid(params["basis"], params["q_max"])
    result = select_dimension(sample, grid, params["basis"], setting.interval,
                              setting.L, PenaltySpec(kappa=params["kappa"], form=form),
                              M=params["M"])
    out_dir = _prepare_out(out)
    (out_dir / "selection.csv").write_text(result.rows_csv())
    (out_dir / "fit.json").write_text(result.fit.to_json() + "\n")
    _write_manifest(out_dir, "select", params)
    click.echo(f"chosen K = {result.chosen_K}")


def _table_cells(table_id: int):
    models = ("M1", "M2", "M3")
    if table_id in (2, 3):
        n = 100 if table_id == 2 else 250
        for model in models:
            for preset in ("compact", "logN"):
                for N in (10, 100, 1000):
                    yield dict(model=model, interval=preset, N=N, n=n)
    elif table_id == 4:
        for model in models:
            for N, n in ((10, 100), (100, 100), (100, 250)):
                yield dict(model=model, interval="realline", N=N, n=n)
    else:
        for model in models:
            yield dict(model=model, interval="nwcomp", N=1, n=1000)


def _interval_label(preset: str) -> str:
    return {"compact": "[-1,1]", "logN": "R", "realline": "R",
            "nwcomp": "R"}.get(preset, preset)


@main.command()
@click.option("--table", "table_id", type=click.IntRange(2, 5), default=None,
              help="Table id in 2..5 (required here or in --config).")
@click.option("--reps", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--kappa", type=float, default=None,
              help="Override the per-interval penalty constants (4 and 5).")
@click.option("--substeps", type=int, default=10, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.pass_context
@_runtime_guard
def table(ctx, table_id, reps, seed, kappa, substeps, jobs, out, config):
    """Reproduce one of the Monte-Carlo tables (2-5) as CSV."""
    params = _resolve_params(ctx, config, dict(table=table_id, reps=reps, seed=seed,
                                               kappa=kappa, substeps=substeps,
                                               jobs=jobs))
    if params["table"] is None:
        raise click.UsageError("--table is required (directly or via --config)")
    reports = []
    for cell in _table_cells(params["table"]):
        kap = params["kappa"]
        if kap is None:
            kap = KAPPA_COMPACT if cell["interval"] == "compact" else KAPPA_REALLINE
        base = ExperimentConfig(
            model=cell["model"], interval=cell["interval"], N=cell["N"], n=cell["n"],
            reps=params["reps"], seed=params["seed"], substeps=params["substeps"],
            kappa=kap, n_jobs=params["jobs"],
            basis="hermite" if cell["interval"] == "realline" else "bspline")
        if params["table"] in (2, 3):
            pair = mise_experiment_pair(base)
            reports += [pair["adaptive"], pair["oracle"]]
        elif params["table"] == 4:
            reports.append(mise_experiment(replace(base, estimator="oracle")))
        else:
            ridge_kappa = (KAPPA_COMPACT if params["kappa"] is None
                           else params["kappa"])
            reports.append(mise_experiment(
                replace(base, estimator="adaptive", kappa=ridge_kappa)))
            for mode in ("literal", "corrected"):
                rep = mise_experiment(replace(base, estimator="nw", nw_mode=mode))
                rep.estimator = f"nw-{mode}"
                reports.append(rep)

    out_dir = _prepare_out(out)
    lines = ["model,interval,estimator,N,n,mean,sd"]
    raw = ["model,interval,estimator,N,n,rep,mise"]
    for r in reports:
        label = _interval_label(r.interval)
        flag = " (single rep)" if r.sd_flagged else ""
        lines.append(f"{r.model},{label},{r.estimator},{r.N},{r.n},"
                     f"{_fmt(r.mean_mise)},{_fmt(r.sd_mise)}{flag}")
        for i, v in enumerate(r.per_rep):
            raw.append(f"{r.model},{label},{r.estimator},{r.N},{r.n},{i},{_fmt(v)}")
    table_path = out_dir / f"table{params['table']}.csv"
    table_path.write_text("\n".join(lines) + "\n")
    (out_dir / f"table{params['table']}_reps.csv").write_text("\n".join(raw) + "\n")
    _write_manifest(out_dir, "table", params)
    click.echo(f"wrote {table_path}")


@main.command()
@click.option("--V", "V", default="0.1,0.5,1,2,4,5,7,10", show_default=True,
              help="Comma-separated kappa candidates.")
@click.option("--models", default="C1,C2,C3", show_default=True)
@click.option("--reps", type=int, default=100, show_default=True)
@click.option("--N", "N", type=int, default=100, show_default=True)
@click.option("--n", "n", type=int, default=100, show_default=True)
@click.option("--Nprime", "Nprime", type=int, default=100, show_default=True)
@click.option("--penalty", type=click.Choice(("multi", "appendix")), default="multi",
              show_default=True)
@click.option("--substeps", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.pass_context
@_runtime_guard
def calibrate(ctx, V, models, reps, N, n, Nprime, penalty, substeps, seed, out,
              config):
    """Grid-search the penalty constant kappa over V (calibration loop)."""
    params = _resolve_params(ctx, config, dict(V=V, models=models, reps=reps, N=N,
                                               n=n, Nprime=Nprime, penalty=penalty,
                                               substeps=substeps, seed=seed))
    try:
        v_list = [float(s) for s in str(params["V"]).split(",") if s.strip()]
        model_ids = [s.strip().upper() for s in str(params["models"]).split(",")
                     if s.strip()]
        model_list = [builtin_model(mid) for mid in model_ids]
    except (ValueError, KeyError) as exc:
        raise click.UsageError(str(exc))
    if params["penalty"] == "appendix":
        half = math.sqrt(math.log(params["N"]))
        interval = (-half, half)
    else:
        interval = (-1.0, 1.0)
    kappa_star, curves = calibrate_kappa(
        model_list, v_list, params["reps"], params["N"], params["n"],
        params["Nprime"], interval=interval, penalty_form=params["penalty"],
        substeps=params["substeps"], master_seed=params["seed"])
    out_dir = _prepare_out(out)
    lines = ["model,kappa,mean_mise"]
    for mid, model in zip(model_ids, model_list):
        for v in sorted(curves[model.label]):
            lines.append(f"{mid},{_fmt(v)},{_fmt(curves[model.label][v])}")
    (out_dir / "calibration.csv").write_text("\n".join(lines) + "\n")
    (out_dir / "chosen.json").write_text(
        json.dumps({"kappa": kappa_star}, sort_keys=True) + "\n")
    _write_manifest(out_dir, "calibrate", params)
    click.echo(f"chosen kappa = {kappa_star}")


@main.command()
@click.option("--model", type=MODEL_CHOICES, default="M2", show_default=True)
@click.option("--N", "N", type=int, default=1000, show_default=True)
@click.option("--n", "n", type=int, default=500, show_default=True)
@click.option("--count", type=int, default=10, show_default=True)
@click.option("--kappa", type=float, default=KAPPA_COMPACT, show_default=True)
@click.option("--substeps", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.pass_context
@_runtime_guard
def bundle(ctx, model, N, n, count, kappa, substeps, seed, out, config):
    """Evaluate `count` adaptive estimators plus the truth on a grid of [-1, 1]."""
    params = _resolve_params(ctx, config, dict(model=model.upper(), N=N, n=n,
                                               count=count, kappa=kappa,
                                               substeps=substeps, seed=seed))
    if params["count"] < 1:
        raise click.UsageError("count must be >= 1")
    spec_model = builtin_model(params["model"])
    setting = metrics.resolve_setting("compact", params["N"], params["n"])
    grid = bases.dimension_grid("bspline")
    xs = np.linspace(-1.0, 1.0, 201)
    truth = true_sigma_sq(spec_model)(xs)
    curves = []
    from .ridge import truncated_estimator
    for c in range(params["count"]):
        seed_c = int(np.random.SeedSequence(params["seed"],
                                            spawn_key=(c,)).generate_state(1)[0])
        sample = simulate_sample(spec_model, params["N"], params["n"],
                                 substeps=params["substeps"], master_seed=seed_c)
        result = select_dimension(sample, grid, "bspline", setting.interval,
                                  setting.L,
                                  PenaltySpec(kappa=params["kappa"],
                                              form=setting.penalty_form))
        curves.append(truncated_estimator(result.fit)(xs))
    out_dir = _prepare_out(out)
    header = "x,truth," + ",".join(f"est_{c + 1:02d}" for c in range(params["count"]))
    lines = [header]
    for i, x in enumerate(xs):
        vals = [_fmt(x), _fmt(truth[i])] + [_fmt(curve[i]) for curve in curves]
        lines.append(",".join(vals))
    (out_dir / "bundle.csv").write_text("\n".join(lines) + "\n")
    _write_manifest(out_dir, "bundle", params)
    click.echo(f"wrote {out_dir / 'bundle.csv'}")


if __name__ == "__main__":
    main()
