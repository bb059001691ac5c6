"""Command-line front end.

Each subcommand resolves its settings as defaults < ``--config`` JSON file <
flags, echoes the resolved settings to standard error, and writes artifacts
only to the paths it is given.

Exit status: 0 success, 2 usage/configuration error, 3 input or format error,
4 numerical or degenerate-data error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import correlation, cvt, density, placement
from .errors import ConfigurationError, GaugeCVTError, InputError
from .grf import FieldSpec, generate_grf
from .grid import Grid
from .io import load_field, load_observations, save_field, save_observations
from .render import render_svg

log = logging.getLogger("gaugecvt")

_PIPELINE_DEFAULTS = {k: v for k, v in placement.PipelineConfig(k_g=1).to_dict().items()}
_PIPELINE_DEFAULTS["k_g"] = None

DEFAULTS = {
    "gen-grf": {"nx": 40, "ny": 40, "n_time": 1000, "c0": 1.0, "d0": 9.0, "s0": 1.0, "seed": 0,
                "cell_size_km": 1.0},
    "corr-map": {"d": None, "mc_samples": 100, "annulus_halfwidth": 1.0, "seed": 0, "cell_size_km": 1.0},
    "correlogram": {"max_lag": None, "mc_samples": 100, "annulus_halfwidth": 1.0, "seed": 0,
                    "cell_size_km": 1.0},
    "density": {"alpha": None, "k_g": None, "c_tol": 0.1, "r": 1e-6, "R": 1.0, "alpha_max": 32,
                "interpolation_factor": 1, "cell_size_km": 1.0},
    "optimize": {"k_g": None, "solver": "tn", "seed": 0, "init": "weighted", "solver_options": {},
                 "cell_size_km": 1.0},
    "pipeline": dict(_PIPELINE_DEFAULTS, cell_size_km=1.0),
    "compare": {"radii_km": [2.0, 5.0, 10.0], "cell_size_km": 1.0},
    "render": {"cell_size_km": None},
}

# flag dest -> config key
_FLAG_KEYS = {
    "k_g": "k_g",
    "c_tol": "c_tol",
    "seed": "seed",
    "samples": "mc_samples",
    "d": "d",
    "alpha": "alpha",
    "solver": "solver",
    "radii": "radii_km",
    "interp_factor": "interpolation_factor",
    "cell_size_km": "cell_size_km",
    "max_lag": "max_lag",
    "nx": "nx",
    "ny": "ny",
    "n_time": "n_time",
    "c0": "c0",
    "d0": "d0",
    "s0": "s0",
}


def _radii(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="gaugecvt", description="Correlation-driven CVT rain-gauge placement.")
    p.add_argument("--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp, inp=True, out=True):
        sp.add_argument("--config", type=Path, help="JSON file with settings")
        if inp:
            sp.add_argument("--input", type=Path, required=True)
        if out:
            sp.add_argument("--out", type=Path, required=True)
        sp.add_argument("--cell-size-km", type=float)

    sp = sub.add_parser("gen-grf", help="synthetic Gaussian random field observations")
    common(sp, inp=False)
    for name, typ in (("--nx", int), ("--ny", int), ("--n-time", int), ("--c0", float), ("--d0", float),
                      ("--s0", float)):
        sp.add_argument(name, type=typ)
    sp.add_argument("--seed", type=int)

    sp = sub.add_parser("corr-map", help="Monte Carlo effective-correlation map")
    common(sp)
    sp.add_argument("--d", type=float)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--seed", type=int)

    sp = sub.add_parser("correlogram", help="domain correlogram and decorrelation distance")
    common(sp)
    sp.add_argument("--max-lag", type=int)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--seed", type=int)

    sp = sub.add_parser("density", help="density map from a correlation map")
    common(sp)
    sp.add_argument("--alpha", type=int)
    sp.add_argument("--k-g", type=int)
    sp.add_argument("--c-tol", type=float)
    sp.add_argument("--interp-factor", type=int)
    sp.add_argument("--trace", type=Path, help="write the alpha,k selection trace here")

    sp = sub.add_parser("optimize", help="CVT generators for a density map")
    common(sp)
    sp.add_argument("--k-g", type=int)
    sp.add_argument("--solver", choices=("lloyd", "tn"))
    sp.add_argument("--seed", type=int)

    sp = sub.add_parser("pipeline", help="full placement pipeline")
    common(sp)
    sp.add_argument("--k-g", type=int)
    sp.add_argument("--c-tol", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--alpha", type=int)
    sp.add_argument("--solver", choices=("lloyd", "tn"))
    sp.add_argument("--interp-factor", type=int)
    sp.add_argument("--max-lag", type=int)

    sp = sub.add_parser("compare", help="distance of real gauges to optimal locations")
    common(sp, inp=False)
    sp.add_argument("--real", type=Path, required=True)
    sp.add_argument("--optimal", type=Path, required=True)
    sp.add_argument("--radii", type=_radii)

    sp = sub.add_parser("render", help="SVG drawing of a pipeline or optimize output directory")
    common(sp)
    sp.add_argument("--overlay", type=Path, help="CSV of extra points, e.g. real gauges")
    return p


def resolve_config(command, args) -> dict:
    cfg = dict(DEFAULTS[command])
    if getattr(args, "config", None) is not None:
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise InputError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"config {args.config}: line {exc.lineno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigurationError(f"config {args.config} must hold a JSON object")
        if command == "pipeline" and "alpha" in data:
            data["alpha_override"] = data.pop("alpha")
        unknown = set(data) - set(cfg)
        if unknown:
            raise ConfigurationError(f"unknown config keys for {command}: {sorted(unknown)}")
        cfg.update(data)
    for dest, key in _FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if command == "pipeline" and key == "alpha":
            key = "alpha_override"
        cfg[key] = value
    return cfg


def _require(cfg, key, flag):
    if cfg.get(key) is None:
        raise ConfigurationError(f"missing required setting {key!r} (flag {flag} or config key)")
    return cfg[key]


def _obs(args, cfg):
    return load_observations(args.input, cell_size_km=cfg["cell_size_km"])


def cmd_gen_grf(args, cfg):
    grid = Grid(cfg["nx"], cfg["ny"], cfg["cell_size_km"])
    spec = FieldSpec(grid, cfg["n_time"], cfg["c0"], cfg["d0"], cfg["s0"], cfg["seed"])
    save_observations(generate_grf(spec), args.out)


def cmd_corr_map(args, cfg):
    d = _require(cfg, "d", "--d")
    obs = _obs(args, cfg)
    cmap = correlation.effective_correlation_map(obs, d, cfg["mc_samples"], cfg["annulus_halfwidth"],
                                                 cfg["seed"])
    n_missing = int(cmap.missing.sum())
    if n_missing:
        log.info("%d cell(s) without usable neighbours filled by nearest neighbour", n_missing)
    save_field(correlation.interpolate_field(cmap, 1), args.out)


def cmd_correlogram(args, cfg):
    obs = _obs(args, cfg)
    max_lag = cfg["max_lag"] or max(1, max(obs.grid.nx, obs.grid.ny) // 2)
    cg = correlation.correlogram(obs, max_lag, cfg["mc_samples"], cfg["seed"], cfg["annulus_halfwidth"])
    cg.to_csv(args.out)
    d0, ok = correlation.decorrelation_distance(cg)
    log.info("decorrelation distance %d grid units (%g km)%s", d0, d0 * obs.grid.cell_size_km,
             "" if ok else ", curve never drops below 1/e")


def cmd_density(args, cfg):
    corr = load_field(args.input, cell_size_km=cfg["cell_size_km"])
    corr = correlation.interpolate_field(corr, cfg["interpolation_factor"])
    if cfg["alpha"] is not None:
        alpha = int(cfg["alpha"])
        k = density.count_below_threshold(corr, alpha, cfg["c_tol"])
        sel = density.AlphaSelection(alpha, k, [(alpha, k)])
    else:
        k_g = _require(cfg, "k_g", "--k-g or --alpha")
        sel = density.select_alpha(corr, cfg["c_tol"], k_g, cfg["alpha_max"])
    log.info("alpha=%d marks %d cell(s) below c_tol=%g", sel.alpha, sel.k_at_alpha, cfg["c_tol"])
    save_field(density.build_density(corr, cfg["r"], cfg["R"], sel.alpha), args.out)
    if args.trace is not None:
        args.trace.write_text(sel.trace_csv())


def cmd_optimize(args, cfg):
    dens = load_field(args.input, cell_size_km=cfg["cell_size_km"])
    k_g = _require(cfg, "k_g", "--k-g")
    problem = cvt.DiscreteProblem.from_field(dens)
    init = cvt.initial_generators(problem, k_g, seed=cfg["seed"], mode=cfg["init"])
    result = cvt.solve(problem, init, cfg["solver"], seed=cfg["seed"], **cfg["solver_options"])
    log.info("%s: %s after %d iterations, energy %.6g -> %.6g", result.solver, result.status,
             result.iterations, result.initial_energy, result.final_energy)
    args.out.mkdir(parents=True, exist_ok=True)
    placement.write_generators_csv(args.out / "generators.csv", result.generators.positions,
                                   dens.grid.cell_size_km)
    (args.out / "trace.csv").write_text(result.trace_csv())
    save_field(dens, args.out / "density.bin", "binary")


def cmd_pipeline(args, cfg):
    obs = _obs(args, cfg)
    pc = {k: v for k, v in cfg.items() if k != "cell_size_km"}
    _require(pc, "k_g", "--k-g")
    report = placement.gauge_optim(obs, placement.PipelineConfig.from_dict(pc))
    placement.write_report(report, args.out)
    r = report.result
    log.info("d0=%d grid (%g km), alpha=%d, %s: energy %.6g -> %.6g in %d iterations",
             report.decorrelation_d, report.decorrelation_km, report.alpha.alpha, r.status,
             r.initial_energy, r.final_energy, r.iterations)


def cmd_compare(args, cfg):
    cs = cfg["cell_size_km"]
    _, real_km = placement.read_points_csv(args.real, cs)
    _, opt_km = placement.read_points_csv(args.optimal, cs)
    rep = placement.compare_km(real_km, opt_km, cfg["radii_km"])
    rep.write(args.out)
    for r, a, b in zip(rep.radii_km, rep.counts_within, rep.counts_outside):
        log.info("radius %g km: %d within, %d outside", r, a, b)


def cmd_render(args, cfg):
    run = args.input
    for name in ("density.bin", "generators.csv"):
        if not (run / name).is_file():
            raise InputError(f"{run} has no {name}")
    cs = cfg["cell_size_km"]
    summary = run / "report.json"
    if cs is None and summary.is_file():
        cs = json.loads(summary.read_text())["fine_grid"]["cell_size_km"]
    dens = load_field(run / "density.bin", "binary", cell_size_km=cs or 1.0)
    gens, _ = placement.read_points_csv(run / "generators.csv", dens.grid.cell_size_km)
    overlay = None
    if args.overlay is not None:
        overlay, _ = placement.read_points_csv(args.overlay, dens.grid.cell_size_km)
    args.out.write_text(render_svg(dens, gens, overlay))


HANDLERS = {
    "gen-grf": cmd_gen_grf,
    "corr-map": cmd_corr_map,
    "correlogram": cmd_correlogram,
    "density": cmd_density,
    "optimize": cmd_optimize,
    "pipeline": cmd_pipeline,
    "compare": cmd_compare,
    "render": cmd_render,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="gaugecvt: %(message)s", stream=sys.stderr, force=True)
    command = args.command
    try:
        cfg = resolve_config(command, args)
        log.info("resolved config: %s", json.dumps(cfg, sort_keys=True))
        HANDLERS[command](args, cfg)
    except GaugeCVTError as exc:
        stage = exc.stage or command
        print(f"gaugecvt: error in {stage}: {type(exc).__name__}: {exc.args[0]}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"gaugecvt: error in {command}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
