"""Phantoms and noisy data simulation.

All randomness goes through :func:`rng_for`, a Philox counter-based
generator keyed by ``(seed, round, stream)``, so every draw is reproducible
bit for bit and different rounds/streams are independent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .grid import Grid, Image

STREAM_NOISE = 1
STREAM_PHANTOM = 2

# Test-1 fixture; no coordinates are published, these mimic the figure layout
SHAPES2D = {
    "rectangle": {"lo": (0.12, 0.58), "hi": (0.42, 0.85), "level": 1.0},
    "circle": {"center": (0.72, 0.55), "radius": 0.14, "level": 0.5},
    "ellipse": {"center": (0.45, 0.22), "axes": (0.22, 0.09), "angle": 0.35, "level": 0.8},
}

# modified Shepp-Logan (Toft): value, a, b, x0, y0, rotation in degrees, on [-1, 1]^2
SHEPP_LOGAN = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
)

BALLS = (((0.2, 0.2, 0.2), 0.2), ((0.3, 0.6, 0.6), 0.2))
BALL_LEVEL = 1.0
CUBOID = ((0.6, 0.8), (0.5, 0.9), (0.5, 0.9))
CUBOID_LEVEL = 2.0


def rng_for(seed: int, round_index: int = 0, stream: int = STREAM_NOISE) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(round_index), int(stream)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class PhantomSpec:
    kind: str = "shapes2d"
    seed: int = 0

    KINDS = ("shapes2d", "random_ellipses", "shepp_logan", "balls_cuboid_3d")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidArgument(f"unknown phantom kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return 3 if self.kind == "balls_cuboid_3d" else 2

    def render(self, grid: Grid) -> Image:
        if self.kind == "shapes2d":
            return shapes2d(grid)
        if self.kind == "random_ellipses":
            return random_ellipses(self.seed, grid)
        if self.kind == "shepp_logan":
            return shepp_logan(grid)
        return balls_cuboid_3d(grid)


def _require(grid: Grid, dim: int):
    if grid.dim != dim:
        raise InvalidArgument(f"phantom needs a {dim}D grid")


def _in_ellipse(x, y, cx, cy, a, b, angle):
    c, s = math.cos(angle), math.sin(angle)
    dx, dy = x - cx, y - cy
    xr = c * dx + s * dy
    yr = -s * dx + c * dy
    return (xr / a) ** 2 + (yr / b) ** 2 <= 1.0


def shapes2d(grid: Grid) -> Image:
    """Rectangle (level 1), circle (0.5) and ellipse (0.8) on a zero background."""
    _require(grid, 2)
    x, y = grid.centers().T
    u = np.zeros(grid.n)
    r = SHAPES2D["rectangle"]
    u[(x >= r["lo"][0]) & (x <= r["hi"][0]) & (y >= r["lo"][1]) & (y <= r["hi"][1])] = r["level"]
    c = SHAPES2D["circle"]
    u[(x - c["center"][0]) ** 2 + (y - c["center"][1]) ** 2 <= c["radius"] ** 2] = c["level"]
    e = SHAPES2D["ellipse"]
    u[_in_ellipse(x, y, *e["center"], *e["axes"], e["angle"])] = e["level"]
    return Image(grid, u)


def sample_ellipses(seed: int) -> list:
    """Parameters of the random-ellipse target for ``seed``.

    Returns a list of ``(level, cx, cy, a, b, angle)``.
    """
    rng = rng_for(seed, 0, STREAM_PHANTOM)
    count = int(rng.integers(2, 6))
    out = []
    for _ in range(count):
        level = rng.uniform(0.5, 1.5)
        # uniform on the disk of radius 0.5 around the domain midpoint
        rad = 0.5 * math.sqrt(rng.uniform())
        ang = rng.uniform(0.0, 2 * math.pi)
        a, b = rng.uniform(0.05, 0.2, size=2)
        orient = rng.uniform(0.0, math.pi)
        out.append((level, 0.5 + rad * math.cos(ang), 0.5 + rad * math.sin(ang), a, b, orient))
    return out


def random_ellipses(seed: int, grid: Grid) -> Image:
    """Sum of 2-5 random constant ellipses, rasterized at cell centers."""
    _require(grid, 2)
    x, y = grid.centers().T
    u = np.zeros(grid.n)
    for level, cx, cy, a, b, orient in sample_ellipses(seed):
        u[_in_ellipse(x, y, cx, cy, a, b, orient)] += level
    return Image(grid, u)


def shepp_logan(grid: Grid) -> Image:
    """Modified (high-contrast) Shepp-Logan phantom mapped onto the unit square."""
    _require(grid, 2)
    x, y = grid.centers().T
    X, Y = 2 * x - 1, 2 * y - 1
    u = np.zeros(grid.n)
    for val, a, b, x0, y0, deg in SHEPP_LOGAN:
        u[_in_ellipse(X, Y, x0, y0, a, b, math.radians(deg))] += val
    return Image(grid, np.clip(u, 0.0, None))


def balls_cuboid_3d(grid: Grid) -> Image:
    _require(grid, 3)
    pts = grid.centers()
    u = np.zeros(grid.n)
    for center, radius in BALLS:
        u[np.sum((pts - np.asarray(center)) ** 2, axis=1) <= radius**2] = BALL_LEVEL
    inside = np.ones(grid.n, dtype=bool)
    for a, (lo, hi) in enumerate(CUBOID):
        inside &= (pts[:, a] >= lo) & (pts[:, a] <= hi)
    u[inside] = CUBOID_LEVEL
    return Image(grid, u)


def simulate_data(R, truth, sigma: float, seed: int, round_index: int = 0) -> np.ndarray:
    """``y = R u + sigma * xi`` with ``xi`` drawn from the round's noise stream."""
    values = truth.values if isinstance(truth, Image) else np.asarray(truth, dtype=float)
    if R.shape[1] != values.size:
        raise InvalidArgument("projection matrix and image sizes differ")
    if sigma < 0:
        raise InvalidArgument("sigma must be nonnegative")
    clean = np.asarray(R @ values, dtype=float)
    if sigma == 0:
        return clean
    return clean + sigma * rng_for(seed, round_index, STREAM_NOISE).standard_normal(clean.size)
