"""Command-line interface: ``cfkm estimate | effect | simulate``.

Exit codes
----------
0 success, 2 usage error (argparse), 1 unexpected failure. Package errors
exit with their own code (see :mod:`cfkm.errors`), e.g. 16 for a CSV schema
problem or 20 for an empty kernel neighborhood, and print a one-line JSON
error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import Grid, validate_sample
from .counterfactual import counterfactual_cdf, cumulative_hazard, counterfactual_curve, policy_effects
from .errors import CfkmError, ConfigError
from .estimators import kaplan_meier
from .inference import build_context, effect_variances, guard_quantile, km_variance, pointwise_ci
from .io import (
    RunManifest,
    load_counterfactual_csv,
    load_grid_file,
    load_sample_csv,
    load_study_config,
    parse_bandwidth,
    render_table,
)
from .kernels import KernelSpec
from .simulation import PAPER_GRID, StudyConfig, run_study

DEFAULT_GRID = "4.25:8.15:0.05"


def _grid(args) -> tuple[Grid, str]:
    if args.grid_file:
        return load_grid_file(args.grid_file), f"file:{args.grid_file}"
    return Grid.parse(args.grid), args.grid


def _hazard(name: str) -> str:
    return name.replace("-", "_")


def _emit(text: str, output: str | None) -> None:
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


def _manifest(args, command: str, inputs, h, grid_spec, seed=None, **extra) -> RunManifest:
    return RunManifest(
        command=command,
        inputs=[str(p) for p in inputs],
        kernel=args.kernel,
        bandwidth=h,
        grid=grid_spec,
        hazard=_hazard(args.hazard),
        alpha=getattr(args, "alpha", None),
        seed=seed,
        version=__version__,
        timestamp=RunManifest.now() if getattr(args, "timestamp", False) else "",
        extra=extra,
    )


def _inference_variances(sample, xstar, h, spec, grid, variant):
    """Effect variances on the part of ``grid`` below the guard quantile, NaN above."""
    zeta = guard_quantile(validate_sample(sample))
    inside = grid.points <= zeta
    out = {}
    if inside.any():
        ctx = build_context(sample, xstar, h, spec, Grid(grid.points[inside]), variant)
        for k, v in effect_variances(ctx).items():
            full = np.full(len(grid), np.nan)
            full[inside] = v
            out[k] = full
    return out, zeta


def _ci_columns(cols, name, est, var, n, alpha):
    if var is None:
        lo = hi = np.full(len(est), np.nan)
    else:
        lo, hi = pointwise_ci(est, var, n, alpha)
        lo = np.where(np.isnan(var), np.nan, lo)
        hi = np.where(np.isnan(var), np.nan, hi)
    cols[f"{name}_lo"] = lo
    cols[f"{name}_hi"] = hi


def cmd_estimate(args) -> int:
    sample = load_sample_csv(args.input)
    n = sample.n
    grid, grid_spec = _grid(args)
    spec = KernelSpec(sample.d, args.kernel)
    h = parse_bandwidth(args.bandwidth)(n)
    curve = args.curve
    if curve == "auto":
        curve = "counterfactual" if args.counterfactual else "km"
    if curve in ("counterfactual", "both") and not args.counterfactual:
        raise ConfigError("--counterfactual is required for the counterfactual curve")
    hz = _hazard(args.hazard)
    cols = {"t": grid.points}
    inputs = [args.input]
    extra = {"curve": curve, "variant": args.variant, "isotonize": args.isotonize}
    if curve in ("km", "both"):
        km = kaplan_meier(sample)
        f = km(grid.points)
        var = km_variance(sample, grid)
        cols["f_base"] = f
        _ci_columns(cols, "f_base", f, var, n, args.alpha)
        if hz == "neg_log":
            lam = cumulative_hazard(f, "neg_log", on_divergence="truncate")
        else:
            lam = cumulative_hazard(method="na_integral", curve=km, grid=grid, on_divergence="truncate")
        cols["lambda_base"] = lam
        with np.errstate(divide="ignore", invalid="ignore"):
            _ci_columns(cols, "lambda_base", lam, var / (1.0 - f) ** 2, n, args.alpha)
    if curve in ("counterfactual", "both"):
        xstar = load_counterfactual_csv(args.counterfactual, d=sample.d)
        inputs.append(args.counterfactual)
        cf = counterfactual_cdf(sample, xstar, h, spec, grid, args.variant, isotonic=args.isotonize)
        f = cf.values
        extra["degenerate_terms"] = cf.degenerate_terms
        variances, zeta = _inference_variances(sample, xstar, h, spec, grid, args.variant)
        extra["inference_limit"] = zeta
        cols["f_star"] = f
        _ci_columns(cols, "f_star", f, variances.get("f_star"), n, args.alpha)
        if hz == "neg_log":
            lam = cumulative_hazard(f, "neg_log", on_divergence="truncate")
        else:
            full = counterfactual_curve(sample, xstar, h, spec, args.variant)
            lam = cumulative_hazard(method="na_integral", curve=full, grid=grid, on_divergence="truncate")
        cols["lambda_star"] = lam
        _ci_columns(cols, "lambda_star", lam, variances.get("lambda_star"), n, args.alpha)
    manifest = _manifest(args, "estimate", inputs, h, grid_spec, **extra)
    _emit(render_table(cols, manifest, args.format), args.output)
    return 0


def cmd_effect(args) -> int:
    sample = load_sample_csv(args.input)
    xstar = load_counterfactual_csv(args.counterfactual, d=sample.d)
    n = sample.n
    grid, grid_spec = _grid(args)
    spec = KernelSpec(sample.d, args.kernel)
    h = parse_bandwidth(args.bandwidth)(n)
    eff = policy_effects(
        sample, xstar, h, spec, grid,
        hazard_method=_hazard(args.hazard), variant=args.variant, isotonic=args.isotonize,
    )
    variances, zeta = _inference_variances(sample, xstar, h, spec, grid, args.variant)
    cols = {
        "t": grid.points,
        "f_star": eff.f_star,
        "f_base": eff.f_base,
        "delta_f": eff.delta_f,
    }
    _ci_columns(cols, "delta_f", eff.delta_f, variances.get("delta_f"), n, args.alpha)
    cols["lambda_star"] = eff.lambda_star
    cols["lambda_base"] = eff.lambda_base
    cols["delta_lambda"] = eff.delta_lambda
    _ci_columns(cols, "delta_lambda", eff.delta_lambda, variances.get("delta_lambda"), n, args.alpha)
    for name in ("f_star", "f_base", "lambda_star", "lambda_base"):
        _ci_columns(cols, name, getattr(eff, name), variances.get(name), n, args.alpha)
    manifest = _manifest(
        args, "effect", [args.input, args.counterfactual], h, grid_spec,
        variant=args.variant, isotonize=args.isotonize, inference_limit=zeta,
        degenerate_terms=eff.warnings["counterfactual_degenerate_terms"],
    )
    _emit(render_table(cols, manifest, args.format), args.output)
    return 0


def _study_config(args) -> StudyConfig:
    cfg = load_study_config(args.config) if args.config else StudyConfig(grid=PAPER_GRID)
    if args.sizes:
        cfg.sizes = tuple(int(v) for v in args.sizes.split(","))
    if args.reps is not None:
        cfg.reps = args.reps
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.bandwidth is not None:
        cfg.bandwidth = parse_bandwidth(args.bandwidth)
    if args.kernel is not None:
        cfg.kernel = args.kernel
    if args.grid is not None or args.grid_file is not None:
        cfg.grid = _grid(args)[0]
    if args.hazard is not None:
        cfg.hazard_method = _hazard(args.hazard)
    if args.no_strict:
        cfg.strict = False
    cfg.__post_init__()
    return cfg


def report_columns(report) -> dict[str, list]:
    """Long-form table: CDF block then hazard block, MIAE then RMISE, ``n`` ascending."""
    cfg = report.config
    cols: dict[str, list] = {"target": [], "metric": [], "n": []}
    for e in cfg.estimators:
        cols[e] = []
    for e in cfg.estimators:
        cols[f"{e}_reps"] = []
    for target in ("cdf", "hazard"):
        for metric in ("miae", "rmise"):
            for n in cfg.sizes:
                cols["target"].append(target)
                cols["metric"].append(metric)
                cols["n"].append(n)
                for e in cfg.estimators:
                    row = report.rows[(n, e, target)]
                    cols[e].append(row[metric])
                    cols[f"{e}_reps"].append(row["reps"])
    return cols


def cmd_simulate(args) -> int:
    cfg = _study_config(args)
    report = run_study(cfg)
    grid = cfg.grid
    manifest = RunManifest(
        command="simulate",
        inputs=[str(args.config)] if args.config else [],
        kernel=cfg.kernel,
        bandwidth=None,
        grid=f"{grid.points[0]:g}:{grid.points[-1]:g}:{grid.step:g}" if grid.step else "custom",
        hazard=cfg.hazard_method,
        seed=cfg.base_seed,
        version=__version__,
        timestamp=RunManifest.now() if args.timestamp else "",
        extra={
            "sizes": list(cfg.sizes),
            "reps": cfg.reps,
            "bandwidth_rule": {
                "constant": cfg.bandwidth.constant,
                "exponent": cfg.bandwidth.exponent,
                "fixed": cfg.bandwidth.fixed,
            },
            "estimators": list(cfg.estimators),
            "strict": cfg.strict,
        },
    )
    output = args.output if args.output is not None else cfg.output
    _emit(render_table(report_columns(report), manifest, args.format), output)
    return 0


def _common(p: argparse.ArgumentParser, study: bool = False) -> None:
    # study overrides default to None so the config file values survive
    p.add_argument("--grid", default=None if study else DEFAULT_GRID, help="start:stop:step")
    p.add_argument("--grid-file", default=None, help="file with one evaluation time per line")
    p.add_argument("--bandwidth", default=None if study else "auto", help="number, 'auto' (3 n^-1/7) or C*n^-a")
    p.add_argument("--kernel", choices=("quartic4", "epanechnikov"), default=None if study else "quartic4")
    p.add_argument("--hazard", choices=("neg-log", "na-integral"), default=None if study else "neg-log")
    p.add_argument("--output", "-o", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--timestamp", action="store_true", help="record wall-clock time in the manifest")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfkm", description="Counterfactual Kaplan-Meier estimation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="Kaplan-Meier and/or counterfactual CDF with pointwise CIs")
    est.add_argument("--input", required=True)
    est.add_argument("--counterfactual")
    est.add_argument("--curve", choices=("auto", "km", "counterfactual", "both"), default="auto")
    _common(est)

    eff = sub.add_parser("effect", help="policy effects on the CDF and cumulative hazard")
    eff.add_argument("--input", required=True)
    eff.add_argument("--counterfactual", required=True)
    _common(eff)

    for p in (est, eff):
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--isotonize", action="store_true")
        p.add_argument("--variant", choices=("exponential", "product_limit"), default="exponential")

    sim = sub.add_parser("simulate", help="Monte Carlo study (MIAE / RMISE tables)")
    sim.add_argument("--config", default=None, help="key = value study file")
    sim.add_argument("--sizes", default=None, help="comma-separated sample sizes")
    sim.add_argument("--reps", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None, help="base seed")
    sim.add_argument("--no-strict", action="store_true", help="exclude failed replications instead of aborting")
    _common(sim, study=True)
    return parser


COMMANDS = {"estimate": cmd_estimate, "effect": cmd_effect, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CfkmError as exc:
        sys.stderr.write(json.dumps(exc.to_record()) + "\n")
        return exc.exit_code
    except OSError as exc:
        rec = {"error": "io", "message": str(exc), "exit_code": 3}
        sys.stderr.write(json.dumps(rec) + "\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
