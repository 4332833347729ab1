"""Experiment configuration and the presets used in the shipped experiments.

A config file is JSON with the keys of :class:`ExperimentConfig`; nested
``phantom``, ``prior``, ``design`` and ``gaussian`` objects mirror the
corresponding dataclasses.  Example::

    {"N": 100, "N_coarse": 31, "K": 16, "sigma": 1e-3, "tau": 1e-4,
     "prior": {"T": 1e-6, "gamma": 1e-2},
     "phantom": {"kind": "shapes2d"},
     "design": {"width": 0.25, "detectors_full": 51, "n_angles": 60, "n_offsets": 41},
     "mode": "optimized", "seed": 0}
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidArgument
from .projector import ConeSpace, ParallelSpace
from .prior import TvParams
from .sim import PhantomSpec

MODES = ("optimized", "reference_equiangular", "reference_list", "reference_gaussian")

# full-aperture reference directions (polar, azimuth) for the 3D experiment
REFERENCE_DIRECTIONS_3D = (
    (0.0, 0.0),
    (0.0, 2 * math.pi / 3),
    (0.0, 4 * math.pi / 3),
    (math.pi / 4, math.pi),
    (math.pi / 4, 0.0),
    (-math.pi / 4, math.pi / 2),
    (-math.pi / 4, 3 * math.pi / 2),
    (0.0, math.pi / 6),
    (0.0, 3 * math.pi / 2),
    (0.0, 5 * math.pi / 6),
)


class ConfigError(InvalidArgument):
    pass


@dataclass(frozen=True)
class GaussianPrior:
    eta: float = 0.2
    ell: float = 0.1


@dataclass
class ExperimentConfig:
    phantom: PhantomSpec = field(default_factory=PhantomSpec)
    N: int = 100
    N_coarse: int = 31
    prior: TvParams = field(default_factory=TvParams)
    tau: float = 1e-4
    K: int = 16
    sigma: float = 1e-3
    design: object = field(default_factory=ParallelSpace)
    mode: str = "optimized"
    gaussian: GaussianPrior = field(default_factory=GaussianPrior)
    seed: int = 0
    reference_projections: int | None = None
    reference_directions: tuple = REFERENCE_DIRECTIONS_3D
    max_inner: int = 200
    simulate_fine: bool = False
    roi: tuple | None = None  # per-axis (lo, hi) box for a diagonal 0/1 weight

    def __post_init__(self):
        self.validate()

    @property
    def dim(self) -> int:
        return self.phantom.dim

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        for name in ("tau", "sigma"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.N < 2 or self.N_coarse < 2:
            raise ConfigError("grid sizes must be >= 2")
        if self.N_coarse > self.N:
            raise ConfigError("N_coarse must not exceed N")
        if self.design.dim != self.dim:
            raise ConfigError(
                f"phantom {self.phantom.kind!r} is {self.dim}D but the design space is {self.design.dim}D"
            )
        if self.mode == "reference_equiangular" and self.dim != 2:
            raise ConfigError("reference_equiangular is defined for 2D parallel beams")
        if self.mode == "reference_gaussian" and not (self.gaussian.eta > 0 and self.gaussian.ell > 0):
            raise ConfigError("reference_gaussian needs positive eta and ell")
        if self.max_inner < 1:
            raise ConfigError("max_inner must be >= 1")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if dataclasses.is_dataclass(v):
                v = dataclasses.asdict(v)
                if f.name == "design":
                    v = {"type": "parallel" if self.dim == 2 else "cone", **v}
            elif isinstance(v, tuple):
                v = [list(x) if isinstance(x, tuple) else x for x in v]
            d[f.name] = v
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "phantom" in raw:
                raw["phantom"] = PhantomSpec(**raw["phantom"])
            if "prior" in raw:
                raw["prior"] = TvParams(**raw["prior"])
            if "gaussian" in raw:
                raw["gaussian"] = GaussianPrior(**raw["gaussian"])
            dim = raw.get("phantom", PhantomSpec()).dim
            if "design" in raw:
                design = dict(raw["design"])
                kind = design.pop("type", "parallel" if dim == 2 else "cone")
                if kind == "parallel":
                    raw["design"] = ParallelSpace(**design)
                elif kind == "cone":
                    if "polar_angles" in design:
                        design["polar_angles"] = tuple(design["polar_angles"])
                    raw["design"] = ConeSpace(**design)
                else:
                    raise ConfigError(f"unknown design type {kind!r}")
            elif dim == 3:
                raw["design"] = ConeSpace()
            if "reference_directions" in raw:
                raw["reference_directions"] = tuple(tuple(x) for x in raw["reference_directions"])
            if raw.get("roi") is not None:
                raw["roi"] = tuple(tuple(x) for x in raw["roi"])
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        except InvalidArgument as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(raw)


def save_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    return path


def test1_2d(**changes) -> ExperimentConfig:
    """Three-shape target, quarter-width beams, 16 rounds."""
    cfg = ExperimentConfig(phantom=PhantomSpec("shapes2d"), N=100, N_coarse=31, K=16,
                           sigma=1e-3, design=ParallelSpace(width=0.25))
    return cfg.replace(**changes)


def test2_2d(seed: int = 0, width: float = 0.25, **changes) -> ExperimentConfig:
    """Random-ellipse target; 20 rounds at width 0.25 or 10 at width 0.5."""
    K = 20 if width == 0.25 else 10
    cfg = ExperimentConfig(phantom=PhantomSpec("random_ellipses", seed), N=100, N_coarse=31,
                           K=K, sigma=1e-3, design=ParallelSpace(width=width), seed=seed,
                           reference_projections=5)
    return cfg.replace(**changes)


def test3_2d(**changes) -> ExperimentConfig:
    """Shepp-Logan target, 40 quarter-width rounds."""
    cfg = ExperimentConfig(phantom=PhantomSpec("shepp_logan"), N=100, N_coarse=31, K=40,
                           sigma=1e-3, design=ParallelSpace(width=0.25),
                           reference_projections=10)
    return cfg.replace(**changes)


def test_3d(**changes) -> ExperimentConfig:
    """Two balls and a cuboid, quarter-aperture cone beams, 40 rounds."""
    cfg = ExperimentConfig(phantom=PhantomSpec("balls_cuboid_3d"), N=50, N_coarse=20, K=40,
                           sigma=2e-3, design=ConeSpace(), reference_projections=10)
    return cfg.replace(**changes)


PRESETS = {"test1": test1_2d, "test2": test2_2d, "test3": test3_2d, "test3d": test_3d}
