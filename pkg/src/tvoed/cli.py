"""Command-line interface.

Subcommands: phantom, simulate, reconstruct, design-step, run-sequential,
run-reference, ensemble.  Exit codes: 0 success, 2 invalid config or
arguments, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import PRESETS, ConfigError, ExperimentConfig, load_config, save_config
from .design import coarse_state, initial_cov, select_design
from .errors import InvalidArgument, NumericalFailure
from .grid import Image, build_grid
from .harness import (
    ENSEMBLE_FIELDS, candidate_set, ensemble, equiangular_designs, rel_l2_error,
    roi_weights, run_reference, run_sequential,
)
from .inference import StackedSystem, reference_reconstruction
from .projector import DesignParameter2D, DesignParameter3D
from .sim import simulate_data

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _add_common(p, config=True):
    if config:
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--preset", choices=sorted(PRESETS), help="start from a built-in preset")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a top-level config key (JSON value), repeatable")
    p.add_argument("--seed", type=int, help="experiment seed (unsigned 64-bit)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--verbose", action="store_true")


def _resolve(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise ConfigError("use either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = PRESETS[args.preset or "test1"]()
    raw = cfg.to_dict()
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            raw[key] = json.loads(value)
        except json.JSONDecodeError:
            raw[key] = value
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        raw["seed"] = args.seed
    return ExperimentConfig.from_dict(raw)


def _design_from_args(args, cfg):
    if cfg.dim == 2:
        return DesignParameter2D(args.angle, args.offset, cfg.design.width if args.width is None else args.width)
    q = None if args.quadrant is None or args.quadrant < 0 else args.quadrant
    s = cfg.design
    return DesignParameter3D(args.theta, args.phi, q, s.delta, s.d, s.M)


def cmd_phantom(args):
    cfg = _resolve(args)
    grid = build_grid(cfg.dim, args.N or cfg.N)
    img = cfg.phantom.render(grid)
    args.out.mkdir(parents=True, exist_ok=True)
    io.write_raw(args.out / "phantom.raw", img)
    if grid.dim == 2:
        io.write_pgm(args.out / "phantom.pgm", img)
    save_config(cfg, args.out / "config.json")
    print(args.out / "phantom.raw")


def cmd_simulate(args):
    cfg = _resolve(args)
    grid = build_grid(cfg.dim, cfg.N)
    p = _design_from_args(args, cfg)
    R = cfg.design.matrix(grid, p)
    y = simulate_data(R, cfg.phantom.render(grid), cfg.sigma, cfg.seed, args.round)
    args.out.mkdir(parents=True, exist_ok=True)
    io.write_triplets(args.out / "matrix.txt", R)
    np.savetxt(args.out / "data.txt", y)
    save_config(cfg, args.out / "config.json")
    print(f"{R.shape[0]} rays, {R.nnz} nonzeros")


def cmd_reconstruct(args):
    """Reference reconstruction from ``--projections`` equiangular/listed geometries."""
    cfg = _resolve(args)
    grid = build_grid(cfg.dim, cfg.N)
    truth = cfg.phantom.render(grid)
    j = args.projections
    if cfg.dim == 2:
        designs = equiangular_designs(cfg.design, j)
    else:
        designs = [cfg.design.full_aperture(th, ph) for th, ph in cfg.reference_directions[:j]]
    sys_ = StackedSystem.empty(grid.n)
    for i, p in enumerate(designs):
        R = cfg.design.matrix(grid, p)
        sys_ = sys_.append(R, simulate_data(R, truth, cfg.sigma, cfg.seed, 10_000 * j + i), cfg.sigma)
    res = reference_reconstruction(sys_, cfg.prior, cfg.tau, grid, max_iter=cfg.max_inner)
    img = Image(grid, res.u)
    args.out.mkdir(parents=True, exist_ok=True)
    io.write_raw(args.out / "reconstruction.raw", img)
    if grid.dim == 2:
        io.write_pgm(args.out / "reconstruction.pgm", img)
    save_config(cfg, args.out / "config.json")
    print(f"rel_l2={float(rel_l2_error(img, truth))!r} J={res.iterations}")


def cmd_design_step(args):
    """Score every candidate for the next projection given a current image."""
    cfg = _resolve(args)
    fine = build_grid(cfg.dim, cfg.N)
    coarse = build_grid(cfg.dim, cfg.N_coarse)
    u = io.read_raw(args.image) if args.image else Image.constant(fine, 1.0)
    cands = candidate_set(coarse, cfg.design)
    coarse_sys = StackedSystem.empty(coarse.n)
    if args.designs:
        for row in io.read_csv(args.designs):
            if cfg.dim == 2:
                p = DesignParameter2D(float(row["angle"]), float(row["offset"]), float(row["width"]))
            else:
                q = int(row["quadrant"])
                s = cfg.design
                p = DesignParameter3D(float(row["theta"]), float(row["phi"]), None if q < 0 else q,
                                      s.delta, s.d, s.M)
            R = cfg.design.matrix(coarse, p)
            coarse_sys = coarse_sys.append(R, np.zeros(R.shape[0]), cfg.sigma)
    if len(coarse_sys):
        cov = coarse_state(u, coarse, coarse_sys, cfg.prior)
    else:
        cov = initial_cov(u, coarse, cfg.prior)
    idx, p, score, scores = select_design(cov, cands, cfg.sigma, roi_weights(coarse, cfg.roi))
    args.out.mkdir(parents=True, exist_ok=True)
    rows = [{"round": len(coarse_sys) + 1, "candidate": i, **q.fields(), "score": repr(float(s))}
            for i, (q, s) in enumerate(zip(cands.params, scores))]
    io.write_csv(args.out / "scores.csv", rows, list(rows[0]))
    print(f"candidate={idx} {p} score={float(score)!r}")


def _write_report(rep, args):
    out = rep.write(args.out, dump_images=args.dump_images)
    for r in rep.records:
        print(f"round={r.round} dose_rays={r.dose_rays} rel_l2={r.rel_l2:.6f} J={r.J}")
    print(out)


def cmd_run_sequential(args):
    cfg = _resolve(args).replace(mode="optimized")
    _write_report(run_sequential(cfg, keep_images=args.dump_images, verbose=args.verbose), args)


def cmd_run_reference(args):
    cfg = _resolve(args)
    if args.mode:
        cfg = cfg.replace(mode=args.mode)
    elif cfg.mode == "optimized":
        cfg = cfg.replace(mode="reference_equiangular" if cfg.dim == 2 else "reference_list")
    _write_report(run_reference(cfg, keep_images=args.dump_images), args)


def cmd_ensemble(args):
    cfg = _resolve(args)
    modes = tuple(args.modes.split(","))
    rows, failures = ensemble(cfg, args.count, modes=modes)
    args.out.mkdir(parents=True, exist_ok=True)
    io.write_csv(args.out / "ensemble.csv", rows, ENSEMBLE_FIELDS)
    if failures:
        io.write_csv(args.out / "failures.csv", failures, ["member", "mode", "error"])
    save_config(cfg, args.out / "config.json")
    for row in rows:
        print(f"{row['mode']} round={row['round']} mean={row['mean_rel_l2']:.4f} sd={row['sd_rel_l2']:.4f}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tvoed", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="write a phantom image")
    _add_common(p)
    p.add_argument("--N", type=int, help="grid size (default: config N)")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("simulate", help="projection matrix and noisy data for one geometry")
    _add_common(p)
    p.add_argument("--angle", type=float, default=0.0)
    p.add_argument("--offset", type=float, default=0.0)
    p.add_argument("--width", type=float)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--quadrant", type=int, help="0-3, or -1 for the full aperture")
    p.add_argument("--round", type=int, default=1, help="noise substream index")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="reference reconstruction from fixed projections")
    _add_common(p)
    p.add_argument("--projections", type=int, default=1)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("design-step", help="score all candidates for the next projection")
    _add_common(p)
    p.add_argument("--image", type=Path, help="current reconstruction (.raw); default all ones")
    p.add_argument("--designs", type=Path, help="designs.csv of past geometries")
    p.set_defaults(func=cmd_design_step)

    for name, fn, helptext in (("run-sequential", cmd_run_sequential, "sequential optimized design"),
                               ("run-reference", cmd_run_reference, "non-adaptive reference runs")):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        p.add_argument("--dump-images", action="store_true")
        if name == "run-reference":
            p.add_argument("--mode", choices=["reference_equiangular", "reference_list",
                                              "reference_gaussian"])
        p.set_defaults(func=fn)

    p = sub.add_parser("ensemble", help="error statistics over seeded members")
    _add_common(p)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--modes", default="optimized,reference_equiangular")
    p.set_defaults(func=cmd_ensemble)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
