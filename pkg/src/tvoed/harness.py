"""End-to-end experiments: the sequential design loop and its references."""
from __future__ import annotations

import functools
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .config import ExperimentConfig, save_config
from .design import (
    CandidateSet, coarse_state, gaussian_design_sequence, initial_cov, select_design,
)
from .errors import ConvergenceFailure, InvalidArgument
from .grid import Grid, Image, build_grid
from .inference import StackedSystem, lagged_diffusivity, reference_reconstruction
from .prior import gaussian_cov
from .projector import ParallelSpace, ray_count
from .sim import simulate_data

log = logging.getLogger(__name__)

ERRORS_FIELDS = ["round", "dose_rays", "rel_l2", "J"]
TIMING_FIELDS = ["round", "seconds"]


@dataclass
class RoundRecord:
    round: int
    design: object
    dose_rays: int
    rel_l2: float
    J: int
    seconds: float
    score: float = float("nan")
    candidate: int = -1


@dataclass
class RunReport:
    mode: str
    records: list = field(default_factory=list)
    final: Image | None = None
    coarse_cov: np.ndarray | None = None
    config: ExperimentConfig | None = None
    images: list = field(default_factory=list)
    failure: str | None = None

    def errors(self) -> np.ndarray:
        return np.array([r.rel_l2 for r in self.records])

    def error_rows(self) -> list:
        return [
            {"round": r.round, "dose_rays": r.dose_rays, "rel_l2": repr(r.rel_l2),
             "J": r.J}
            for r in self.records
        ]

    def timing_rows(self) -> list:
        return [{"round": r.round, "seconds": f"{r.seconds:.3f}"} for r in self.records]

    def design_rows(self) -> list:
        rows = []
        for r in self.records:
            designs = r.design if isinstance(r.design, list) else [r.design]
            for p in designs:
                rows.append({"round": r.round, "candidate": r.candidate,
                             **p.fields(), "score": repr(r.score)})
        return rows

    def write(self, out_dir, dump_images: bool = False) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        # seconds are wall-clock; errors.csv stays bitwise reproducible without them
        io.write_csv(out / "errors.csv", self.error_rows(), ERRORS_FIELDS)
        io.write_csv(out / "timings.csv", self.timing_rows(), TIMING_FIELDS)
        rows = self.design_rows()
        if rows:
            io.write_csv(out / "designs.csv", rows, list(rows[0]))
        if self.config is not None:
            save_config(self.config, out / "config.json")
        if self.final is not None:
            io.write_raw(out / "final.raw", self.final)
        if dump_images:
            for k, img in enumerate(self.images, start=1):
                io.write_raw(out / f"round_{k:03d}.raw", img)
                if img.grid.dim == 2:
                    io.write_pgm(out / f"round_{k:03d}.pgm", img)
        return out


def rel_l2_error(u, truth) -> float:
    u = u.values if isinstance(u, Image) else np.asarray(u, dtype=float)
    t = truth.values if isinstance(truth, Image) else np.asarray(truth, dtype=float)
    if u.shape != t.shape:
        raise InvalidArgument("images live on different grids")
    norm = np.linalg.norm(t)
    if norm == 0.0:
        raise InvalidArgument("relative error undefined for a zero target")
    return float(np.linalg.norm(u - t) / norm)


@functools.lru_cache(maxsize=4)
def candidate_set(grid: Grid, space) -> CandidateSet:
    return CandidateSet(grid, space)


def roi_weights(grid: Grid, roi):
    if roi is None:
        return None
    x = grid.centers()
    mask = np.ones(grid.n, dtype=bool)
    for a, (lo, hi) in enumerate(roi):
        mask &= (x[:, a] >= lo) & (x[:, a] <= hi)
    return mask.astype(float)


class _Measurement:
    """Truth and forward model used to simulate data, optionally on a 2x finer grid."""

    def __init__(self, cfg: ExperimentConfig, fine: Grid):
        self.cfg = cfg
        self.grid = build_grid(fine.dim, 2 * fine.N) if cfg.simulate_fine else fine
        self.truth_sim = cfg.phantom.render(self.grid)
        self.truth = cfg.phantom.render(fine)

    def measure(self, p, stream_index: int):
        R = self.cfg.design.matrix(self.grid, p)
        return simulate_data(R, self.truth_sim, self.cfg.sigma, self.cfg.seed, stream_index)


def _grids(cfg: ExperimentConfig):
    return build_grid(cfg.dim, cfg.N), build_grid(cfg.dim, cfg.N_coarse)


def run_sequential(cfg: ExperimentConfig, candidates=None, keep_images: bool = False,
                   verbose: bool = False) -> RunReport:
    """Sequential A-optimal design with lagged-diffusivity reconstruction.

    Each round picks a geometry on the coarse grid from the current
    reconstruction, measures it, and re-runs the inner loop on the fine grid
    warm-started from the previous reconstruction.  The first geometry is
    scored against ``H(1)^-1`` on the coarse grid, later ones against the
    surrogate posterior covariance.
    """
    if cfg.mode != "optimized":
        raise InvalidArgument("run_sequential expects mode 'optimized'")
    fine, coarse = _grids(cfg)
    meas = _Measurement(cfg, fine)
    cands = candidates or candidate_set(coarse, cfg.design)
    A = roi_weights(coarse, cfg.roi)
    report = RunReport(cfg.mode, config=cfg)
    u = Image.constant(fine, 1.0)
    fine_sys = StackedSystem.empty(fine.n)
    coarse_sys = StackedSystem.empty(coarse.n)
    dose = 0
    for k in range(1, cfg.K + 1):
        t0 = time.perf_counter()
        if k == 1:
            cov = initial_cov(u, coarse, cfg.prior)
        else:
            cov = coarse_state(u, coarse, coarse_sys, cfg.prior)
        idx, p, score, _ = select_design(cov, cands, cfg.sigma, A)
        y = meas.measure(p, k)
        R = cfg.design.matrix(fine, p)
        fine_sys = fine_sys.append(R, y, cfg.sigma)
        coarse_sys = coarse_sys.append(cands.matrices[idx], y, cfg.sigma)
        dose += R.shape[0]
        try:
            res = lagged_diffusivity(u, fine_sys, cfg.prior, cfg.tau, max_iter=cfg.max_inner,
                                     callback=_verbose_cb(k) if verbose else None)
        except ConvergenceFailure as exc:
            report.failure = str(exc)
            if exc.last_iterate is not None:
                report.final = Image(fine, exc.last_iterate)
            raise _attach(exc, report)
        u = Image(fine, res.u)
        report.records.append(RoundRecord(k, p, dose, rel_l2_error(u, meas.truth), res.iterations,
                                          time.perf_counter() - t0, score, idx))
        if keep_images:
            report.images.append(u)
        log.info("round %d: design %s, rel error %.4f, J=%d", k, p, report.records[-1].rel_l2,
                 res.iterations)
    report.final = u
    report.coarse_cov = coarse_state(u, coarse, coarse_sys, cfg.prior)
    return report


def _verbose_cb(k):
    def cb(j, phi, dphi):
        print(f"{k},{j},{float(phi)!r},{float(dphi)!r}")
    return cb


def _attach(exc, report):
    exc.report = report
    return exc


def equiangular_designs(space: ParallelSpace, count: int) -> list:
    return [space.full_width(i * math.pi / count) for i in range(count)]


def reference_levels(cfg: ExperimentConfig) -> int:
    """Number of full-width/full-aperture reference projections matching K rounds."""
    if cfg.reference_projections is not None:
        return cfg.reference_projections
    space = cfg.design
    if cfg.dim == 2:
        per_round = ray_count(space.width, space.detectors_full)
        full = space.detectors_full
    else:
        per_round = (space.M // 2) ** 2 if space.aperture == "quadrant" else space.M**2
        full = space.M**2
    return max(1, int(round(cfg.K * per_round / full)))


def run_reference(cfg: ExperimentConfig, keep_images: bool = False,
                  candidates=None) -> RunReport:
    """Non-adaptive comparison runs.

    ``reference_equiangular``: ``j`` full-width projections at angles
    ``i*pi/j``, reconstructed from scratch for each ``j``.
    ``reference_list``: the first ``j`` full-aperture directions of
    ``cfg.reference_directions`` (cumulative).
    ``reference_gaussian``: designs precomputed under a fixed squared-
    exponential prior on the coarse grid, then reconstructed sequentially.
    """
    fine, coarse = _grids(cfg)
    meas = _Measurement(cfg, fine)
    report = RunReport(cfg.mode, config=cfg)
    if cfg.mode == "reference_gaussian":
        return _run_gaussian(cfg, fine, coarse, meas, report, keep_images, candidates)
    if cfg.mode == "reference_equiangular":
        levels = reference_levels(cfg)
        design_sets = [equiangular_designs(cfg.design, j) for j in range(1, levels + 1)]
    elif cfg.mode == "reference_list":
        levels = min(reference_levels(cfg), len(cfg.reference_directions))
        design_sets = [
            [cfg.design.full_aperture(th, ph) for th, ph in cfg.reference_directions[:j]]
            for j in range(1, levels + 1)
        ]
    else:
        raise InvalidArgument(f"run_reference does not handle mode {cfg.mode!r}")
    for j, designs in enumerate(design_sets, start=1):
        t0 = time.perf_counter()
        sys = StackedSystem.empty(fine.n)
        for i, p in enumerate(designs):
            # one noise stream per (level, projection); levels are independent experiments
            y = meas.measure(p, 10_000 * j + i)
            sys = sys.append(cfg.design.matrix(fine, p), y, cfg.sigma)
        try:
            res = reference_reconstruction(sys, cfg.prior, cfg.tau, fine, max_iter=cfg.max_inner)
        except ConvergenceFailure as exc:
            report.failure = str(exc)
            raise _attach(exc, report)
        u = Image(fine, res.u)
        report.records.append(RoundRecord(j, list(designs), sys.rows, rel_l2_error(u, meas.truth),
                                          res.iterations, time.perf_counter() - t0))
        if keep_images:
            report.images.append(u)
        report.final = u
    return report


def gaussian_designs(cfg: ExperimentConfig, candidates=None):
    _, coarse = _grids(cfg)
    cands = candidates or candidate_set(coarse, cfg.design)
    cov0 = gaussian_cov(coarse, cfg.gaussian.eta, cfg.gaussian.ell)
    picks = gaussian_design_sequence(cov0, cands, cfg.sigma, cfg.K, roi_weights(coarse, cfg.roi))
    return [(idx, cands.params[idx], score) for idx, score in picks]


def _run_gaussian(cfg, fine, coarse, meas, report, keep_images, candidates):
    plan = gaussian_designs(cfg, candidates)
    u = Image.constant(fine, 1.0)
    sys = StackedSystem.empty(fine.n)
    for k, (idx, p, score) in enumerate(plan, start=1):
        t0 = time.perf_counter()
        y = meas.measure(p, k)
        sys = sys.append(cfg.design.matrix(fine, p), y, cfg.sigma)
        try:
            res = lagged_diffusivity(u, sys, cfg.prior, cfg.tau, max_iter=cfg.max_inner)
        except ConvergenceFailure as exc:
            report.failure = str(exc)
            raise _attach(exc, report)
        u = Image(fine, res.u)
        report.records.append(RoundRecord(k, p, sys.rows, rel_l2_error(u, meas.truth),
                                          res.iterations, time.perf_counter() - t0, score, idx))
        if keep_images:
            report.images.append(u)
    report.final = u
    return report


def run(cfg: ExperimentConfig, **kwargs) -> RunReport:
    if cfg.mode == "optimized":
        return run_sequential(cfg, **kwargs)
    return run_reference(cfg, **kwargs)


ENSEMBLE_FIELDS = ["mode", "round", "dose_rays", "mean_rel_l2", "sd_rel_l2", "members"]


def ensemble(cfg: ExperimentConfig, count: int, modes=("optimized", "reference_equiangular"),
             vary_seed: bool = True):
    """Mean and standard deviation of the error curves over seeded members.

    Member ``i`` uses seed ``cfg.seed + i`` for both the phantom (random
    kinds) and the noise.  Failed members are skipped and listed.

    Returns ``(rows, failures)``.
    """
    if count < 2:
        raise InvalidArgument("an ensemble needs at least two members")
    curves = {m: [] for m in modes}
    failures = []
    for i in range(count):
        seed = cfg.seed + i if vary_seed else cfg.seed
        phantom = cfg.phantom.__class__(cfg.phantom.kind, seed)
        for mode in modes:
            member = cfg.replace(seed=seed, phantom=phantom, mode=mode)
            try:
                rep = run(member)
            except ConvergenceFailure as exc:
                failures.append({"member": i, "mode": mode, "error": str(exc)})
                continue
            curves[mode].append([(r.round, r.dose_rays, r.rel_l2) for r in rep.records])
    rows = []
    for mode, members in curves.items():
        if not members:
            continue
        rounds = min(len(c) for c in members)
        for r in range(rounds):
            errs = np.array([c[r][2] for c in members])
            rows.append({"mode": mode, "round": members[0][r][0], "dose_rays": members[0][r][1],
                         "mean_rel_l2": float(errs.mean()),
                         "sd_rel_l2": float(errs.std(ddof=1)) if errs.size > 1 else 0.0,
                         "members": int(errs.size)})
    return rows, failures
