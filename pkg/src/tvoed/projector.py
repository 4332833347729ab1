"""Projection geometries and sparse projection matrices.

2D geometries are parallel-beam source/receiver pairs described by an angle
and a lateral offset.  3D geometries are cone beams from a point source with
a detector gridded in the source-local polar/azimuthal angles; the polar
angle is an elevation (0 means parallel to the xy-plane).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument
from .raytrace import trace_batch

CENTER2 = np.array([0.5, 0.5])
CENTER3 = np.array([0.5, 0.5, 0.5])


@dataclass(frozen=True)
class DesignParameter2D:
    angle: float
    offset: float
    width: float = 1.0

    def validate(self):
        w = self.width
        if not 0.0 < w <= 1.0:
            raise InvalidArgument(f"beam width must lie in (0, 1], got {w}")
        bound = (1.0 - w) / 2.0 + 1e-12
        if abs(self.offset) > bound:
            raise InvalidArgument(
                f"offset {self.offset} outside [{(w - 1) / 2}, {(1 - w) / 2}]"
            )

    def fields(self) -> dict:
        return {"angle": self.angle, "offset": self.offset, "width": self.width}


@dataclass(frozen=True)
class DesignParameter3D:
    theta: float
    phi: float
    quadrant: int | None = None  # None selects the full aperture
    delta: float = 0.24
    d: float = 2.5
    M: int = 20

    def validate(self):
        if self.delta <= 0:
            raise InvalidArgument("opening half-angle delta must be positive")
        if self.M < 2 or self.M % 2:
            raise InvalidArgument("detector count M must be even and >= 2")
        if self.quadrant is not None and self.quadrant not in (0, 1, 2, 3):
            raise InvalidArgument(f"quadrant must be 0..3 or None, got {self.quadrant}")
        src = self.source()
        if np.all((src >= 0.0) & (src <= 1.0)):
            raise InvalidArgument(f"source {src} lies inside the unit cube")

    def source(self) -> np.ndarray:
        return CENTER3 - self.d * spherical_direction(self.theta, self.phi)

    def fields(self) -> dict:
        q = -1 if self.quadrant is None else self.quadrant
        return {"theta": self.theta, "phi": self.phi, "quadrant": q}


def spherical_direction(theta, phi):
    """Unit vector(s) with elevation ``theta`` and azimuth ``phi``."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.stack(
        [np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), np.sin(theta)], axis=-1
    )


def ray_count(width: float, detectors_full: int) -> int:
    # round() is half-to-even: 0.25*50 = 12.5 -> 12, giving 13 rays
    return int(round(width * (detectors_full - 1))) + 1


def parallel_rays(p: DesignParameter2D, detectors_full: int):
    """Origins and directions of the rays of a parallel-beam geometry.

    The beam of lateral extent ``width`` is cut into ``m`` equal strips and one
    ray passes through the middle of each strip.
    """
    if detectors_full < 2:
        raise InvalidArgument("detectors_full must be >= 2")
    p.validate()
    m = ray_count(p.width, detectors_full)
    lateral = np.array([math.cos(p.angle), math.sin(p.angle)])
    direction = np.array([-math.sin(p.angle), math.cos(p.angle)])
    s = p.offset - p.width / 2 + (np.arange(m) + 0.5) * p.width / m
    origins = CENTER2[None, :] + s[:, None] * lateral[None, :]
    return origins, np.tile(direction, (m, 1))


def assemble_parallel(grid, p: DesignParameter2D, detectors_full: int = 51) -> sp.csr_matrix:
    if grid.dim != 2:
        raise InvalidArgument("parallel-beam geometry needs a 2D grid")
    origins, directions = parallel_rays(p, detectors_full)
    return trace_batch(grid, origins, directions)


def cone_rays(p: DesignParameter3D):
    """Source point and unit ray directions of a cone-beam geometry.

    Detector cells split ``[theta-delta, theta+delta] x [phi-delta, phi+delta]``
    uniformly; rays pass through each cell's angular midpoint.  Quadrant ``q``
    keeps the polar half ``q // 2`` and azimuthal half ``q % 2``.
    """
    p.validate()
    M = p.M
    frac = (np.arange(M) + 0.5) / M
    thetas = p.theta - p.delta + 2 * p.delta * frac
    phis = p.phi - p.delta + 2 * p.delta * frac
    if p.quadrant is not None:
        half = M // 2
        ti, pj = divmod(p.quadrant, 2)
        thetas = thetas[ti * half:(ti + 1) * half]
        phis = phis[pj * half:(pj + 1) * half]
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    directions = spherical_direction(tt.ravel(), pp.ravel())
    return p.source(), directions


def assemble_cone(grid, p: DesignParameter3D) -> sp.csr_matrix:
    if grid.dim != 3:
        raise InvalidArgument("cone-beam geometry needs a 3D grid")
    source, directions = cone_rays(p)
    m = directions.shape[0]
    return trace_batch(
        grid, np.tile(source, (m, 1)), directions, t_lo=np.zeros(m), t_hi=np.full(m, np.inf)
    )


@dataclass(frozen=True)
class ParallelSpace:
    """Candidate 2D geometries: ``n_angles`` angles in [0, pi) x ``n_offsets`` offsets."""

    width: float = 0.25
    detectors_full: int = 51
    n_angles: int = 60
    n_offsets: int = 41

    dim = 2

    def candidates(self) -> list:
        angles = np.arange(self.n_angles) * np.pi / self.n_angles
        bound = (1.0 - self.width) / 2.0
        if bound <= 0.0 or self.n_offsets == 1:
            offsets = np.zeros(1)
        else:
            offsets = np.linspace(-bound, bound, self.n_offsets)
        return [
            DesignParameter2D(float(a), float(s), self.width)
            for a, s in itertools.product(angles, offsets)
        ]

    def full_width(self, angle: float) -> DesignParameter2D:
        return DesignParameter2D(float(angle), 0.0, 1.0)

    def matrix(self, grid, p) -> sp.csr_matrix:
        return assemble_parallel(grid, p, self.detectors_full)

    def rays_per_projection(self, p) -> int:
        return ray_count(p.width, self.detectors_full)


@dataclass(frozen=True)
class ConeSpace:
    """Candidate 3D geometries: azimuths x polar angles x apertures."""

    delta: float = 0.24
    d: float = 2.5
    M: int = 20
    n_azimuth: int = 60
    polar_angles: tuple = (-math.pi / 4, 0.0, math.pi / 4)
    aperture: str = "quadrant"

    dim = 3

    def candidates(self) -> list:
        phis = np.arange(self.n_azimuth) * 2 * np.pi / self.n_azimuth
        quadrants = (0, 1, 2, 3) if self.aperture == "quadrant" else (None,)
        return [
            DesignParameter3D(float(th), float(ph), q, self.delta, self.d, self.M)
            for ph, th, q in itertools.product(phis, self.polar_angles, quadrants)
        ]

    def full_aperture(self, theta: float, phi: float) -> DesignParameter3D:
        return DesignParameter3D(float(theta), float(phi), None, self.delta, self.d, self.M)

    def matrix(self, grid, p) -> sp.csr_matrix:
        return assemble_cone(grid, p)

    def rays_per_projection(self, p) -> int:
        return self.M**2 if p.quadrant is None else (self.M // 2) ** 2


def enumerate_designs(space) -> list:
    return space.candidates()


def assemble(grid, p, detectors_full: int = 51) -> sp.csr_matrix:
    if isinstance(p, DesignParameter2D):
        return assemble_parallel(grid, p, detectors_full)
    if isinstance(p, DesignParameter3D):
        return assemble_cone(grid, p)
    raise InvalidArgument(f"unknown design parameter type {type(p).__name__}")
