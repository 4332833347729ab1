"""Uniform pixel/voxel grids on the unit square or cube.

The ``N`` interior cells per edge tile ``[0, 1]`` exactly (``h = 1/N``).  A
layer of zero-valued cells sits just outside the domain; it is never stored
but acts as homogeneous Dirichlet data for the finite-element prior and for
interpolation.

Flat cell indices run with x fastest: ``i = ix + N*iy + N**2*iz``.  Use
:meth:`Grid.as_array` to get an ``(N,)*dim`` view indexed ``[ix, iy, (iz)]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import InvalidArgument


@dataclass(frozen=True)
class Grid:
    dim: int
    N: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise InvalidArgument(f"dim must be 2 or 3, got {self.dim}")
        if int(self.N) != self.N or self.N < 2:
            raise InvalidArgument(f"N must be an integer >= 2, got {self.N}")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def n(self) -> int:
        return self.N**self.dim

    @property
    def n_total(self) -> int:
        """Cells per edge including the zero boundary layer."""
        return self.N + 2

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.dim

    def lattice(self, i):
        """Lattice coordinates ``(ix, iy[, iz])`` of flat index ``i``."""
        i = np.asarray(i)
        if np.any((i < 0) | (i >= self.n)):
            raise InvalidArgument(f"cell index out of range [0, {self.n})")
        return np.unravel_index(i, self.shape, order="F")

    def index(self, *coords) -> int:
        return int(np.ravel_multi_index(coords, self.shape, order="F"))

    def cell_center(self, i) -> np.ndarray:
        if not 0 <= int(i) < self.n:
            raise InvalidArgument(f"cell index {i} out of range [0, {self.n})")
        lat = np.array(self.lattice(int(i)), dtype=float)
        return (lat + 0.5) * self.h

    def centers(self) -> np.ndarray:
        """All cell centers, shape ``(n, dim)`` in flat-index order."""
        ax = (np.arange(self.N) + 0.5) * self.h
        mesh = np.meshgrid(*([ax] * self.dim), indexing="ij")
        return np.stack([m.ravel(order="F") for m in mesh], axis=1)

    def as_array(self, values) -> np.ndarray:
        values = np.asarray(values)
        if values.shape != (self.n,):
            raise InvalidArgument(f"expected {self.n} values, got shape {values.shape}")
        return values.reshape(self.shape, order="F")

    def flatten(self, arr) -> np.ndarray:
        return np.asarray(arr).reshape(-1, order="F")


def build_grid(dim: int, N: int) -> Grid:
    return Grid(int(dim), int(N))


@dataclass(frozen=True, eq=False)
class Image:
    """Absorption values on the interior cells of ``grid``."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise InvalidArgument(
                f"image needs {self.grid.n} values, got shape {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "Image":
        return cls(grid, np.full(grid.n, float(c)))

    def as_array(self) -> np.ndarray:
        return self.grid.as_array(self.values)

    def __add__(self, other):
        return Image(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return Image(self.grid, self.values - _vals(other))

    def __mul__(self, c):
        return Image(self.grid, self.values * float(c))

    __rmul__ = __mul__


def _vals(x):
    return x.values if isinstance(x, Image) else np.asarray(x, dtype=float)


def padded_array(img: Image) -> np.ndarray:
    """Image values with the zero boundary layer attached on every side."""
    return np.pad(img.as_array(), 1)


def restrict(img: Image, coarse: Grid) -> Image:
    """Multilinear interpolation of ``img`` at the cell centers of ``coarse``."""
    fine = img.grid
    if coarse.dim != fine.dim:
        raise InvalidArgument("restrict: grids differ in dimension")
    if coarse.N > fine.N:
        raise InvalidArgument("restrict: coarse grid is finer than the image grid")
    if coarse == fine:
        return Image(coarse, img.values.copy())
    # nodes include the boundary layer centers at -h/2 and 1 + h/2
    nodes = (np.arange(fine.N + 2) - 0.5) * fine.h
    interp = RegularGridInterpolator([nodes] * fine.dim, padded_array(img), method="linear")
    return Image(coarse, interp(coarse.centers()))
