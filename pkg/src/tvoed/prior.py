"""Smoothened total-variation prior and its lagged-diffusivity stiffness matrix.

Images are identified with their multilinear interpolant on the dual mesh
whose nodes are the cell centers (boundary-layer nodes carry zero).  Each
dual element is clipped to the unit domain and integrated with a tensor
2-point Gauss rule.  The TV functional, the stiffness matrix and the
surrogate all use that one rule, which makes

    grad tv_value(u) == stiffness(u) @ u
    surrogate_value(w, w) == tv_value(w)

hold to rounding error, and makes ``stiffness(0, T)`` the exact
constant-coefficient stiffness matrix scaled by ``1/T``.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument
from .grid import Grid, Image

_GAUSS = 1.0 / (2.0 * np.sqrt(3.0))
# local parameter interval inside [0, 1] for the left-clipped, full and right-clipped element
_CLIP = ((0.5, 1.0), (0.0, 1.0), (0.0, 0.5))


@dataclass(frozen=True)
class TvParams:
    T: float = 1e-6
    gamma: float = 1e-2

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidArgument(f"T must be positive, got {self.T}")
        if not self.gamma > 0:
            raise InvalidArgument(f"gamma must be positive, got {self.gamma}")


def _local_rule(h, types):
    """Quadrature points, weights and basis gradients on one element type."""
    dim = len(types)
    pts_1d, w_1d = [], []
    for t in types:
        a, b = _CLIP[t]
        mid, half = 0.5 * (a + b), (b - a) * _GAUSS
        pts_1d.append((mid - half, mid + half))
        w_1d.append(0.5 * (b - a) * h)
    # corner c has bit a set iff it sits on the upper node along axis a
    corners = [tuple((c >> a) & 1 for a in range(dim)) for c in range(2**dim)]
    quad = list(itertools.product((0, 1), repeat=dim))
    Q, C = len(quad), len(corners)
    weights = np.full(Q, np.prod(w_1d))
    B = np.zeros((Q, dim, C))
    for q, qi in enumerate(quad):
        t = [pts_1d[a][qi[a]] for a in range(dim)]
        for c, cc in enumerate(corners):
            vals = [t[a] if cc[a] else 1.0 - t[a] for a in range(dim)]
            for a in range(dim):
                dval = (1.0 if cc[a] else -1.0) / h
                B[q, a, c] = dval * np.prod([vals[b] for b in range(dim) if b != a])
    return weights, B


class FEStructure:
    """Element connectivity, quadrature and sparsity pattern for one grid."""

    def __init__(self, grid: Grid):
        self.grid = grid
        N, dim, n = grid.N, grid.dim, grid.n
        self.groups = []
        keys = []
        offset = 0
        corner_offsets = np.array(
            [[(c >> a) & 1 for a in range(dim)] for c in range(2**dim)]
        )
        axis_elems = (np.array([0]), np.arange(1, N), np.array([N]))
        for types in itertools.product(range(3), repeat=dim):
            coords = np.meshgrid(*[axis_elems[t] for t in types], indexing="ij")
            elems = np.stack([c.ravel() for c in coords], axis=1)  # (E, dim)
            if elems.shape[0] == 0:
                continue
            lat = elems[:, None, :] - 1 + corner_offsets[None, :, :]  # (E, C, dim)
            inside = np.all((lat >= 0) & (lat < N), axis=2)
            flat = np.zeros(inside.shape, dtype=np.int64)
            for a in range(dim):
                flat += lat[:, :, a] * N**a
            nodes = np.where(inside, flat, n)  # n indexes an appended zero
            weights, B = _local_rule(grid.h, types)
            local_K = np.einsum("q,qai,qaj->qij", weights, B, B)
            C = nodes.shape[1]
            rows = np.repeat(nodes, C, axis=1).reshape(-1, C, C)
            cols = np.tile(nodes, (1, C)).reshape(-1, C, C)
            valid = (rows < n) & (cols < n)
            keys.append((rows * n + cols)[valid])
            self.groups.append(
                {"nodes": nodes, "weights": weights, "B": B, "K": local_K,
                 "valid": valid, "slice": slice(offset, offset + int(valid.sum()))}
            )
            offset += int(valid.sum())
        keys = np.concatenate(keys)
        pattern, self._pos = np.unique(keys, return_inverse=True)
        self._nnz = pattern.size
        rows = pattern // n
        self._indices = (pattern % n).astype(np.int32)
        self._indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=n))])

    def gradients(self, values):
        """Gradient of the interpolant at every quadrature point, per element group."""
        ext = np.append(np.asarray(values, dtype=float), 0.0)
        return [np.einsum("qac,ec->eqa", g["B"], ext[g["nodes"]]) for g in self.groups]

    def integrate(self, values, fn):
        """Quadrature of ``fn(|grad u|^2)`` over the unit domain."""
        total = 0.0
        for g, grad in zip(self.groups, self.gradients(values)):
            total += np.sum(fn(np.einsum("eqa,eqa->eq", grad, grad)) @ g["weights"])
        return float(total)

    def weighted_stiffness(self, values, coef) -> sp.csr_matrix:
        """Assemble ``sum_q w_q coef(|grad w|^2) grad phi_i . grad phi_j``."""
        data = np.empty(self._pos.size)
        for g, grad in zip(self.groups, self.gradients(values)):
            rho = coef(np.einsum("eqa,eqa->eq", grad, grad))
            elem = np.einsum("eq,qij->eij", rho, g["K"])
            data[g["slice"]] = elem[g["valid"]]
        csr_data = np.bincount(self._pos, weights=data, minlength=self._nnz)
        n = self.grid.n
        return sp.csr_matrix((csr_data, self._indices, self._indptr), shape=(n, n))


@functools.lru_cache(maxsize=8)
def fe_structure(grid: Grid) -> FEStructure:
    return FEStructure(grid)


def _values(img, grid=None):
    if isinstance(img, Image):
        return img.grid, img.values
    if grid is None:
        raise InvalidArgument("a Grid is required when passing a plain array")
    return grid, np.asarray(img, dtype=float)


def tv_value(u, T: float, grid: Grid | None = None) -> float:
    """Discrete smoothened TV, the integral of ``sqrt(|grad u|^2 + T^2)``."""
    grid, vals = _values(u, grid)
    return fe_structure(grid).integrate(vals, lambda s: np.sqrt(s + T * T))


def stiffness(w, T: float, grid: Grid | None = None) -> sp.csr_matrix:
    """Stiffness matrix with coefficient ``1/sqrt(|grad w|^2 + T^2)``.

    Homogeneous Dirichlet data on the boundary layer; the result is symmetric
    positive definite over the ``n`` interior nodes.
    """
    grid, vals = _values(w, grid)
    return fe_structure(grid).weighted_stiffness(vals, lambda s: 1.0 / np.sqrt(s + T * T))


def laplace_stiffness(grid: Grid) -> sp.csr_matrix:
    """Constant-coefficient Dirichlet stiffness matrix."""
    return fe_structure(grid).weighted_stiffness(np.zeros(grid.n), np.ones_like)


def surrogate_value(u, w, T: float, grid: Grid | None = None, H=None) -> float:
    """Quadratic majorant of the TV functional built at ``w``."""
    grid, uv = _values(u, grid)
    _, wv = _values(w, grid)
    if H is None:
        H = stiffness(wv, T, grid)
    const = fe_structure(grid).integrate(wv, lambda s: T * T / np.sqrt(s + T * T))
    return float(0.5 * uv @ (H @ uv) + 0.5 * wv @ (H @ wv) + const)


def gaussian_cov(grid: Grid, eta: float, ell: float) -> np.ndarray:
    """Squared-exponential covariance over the cell centers."""
    if eta <= 0 or ell <= 0:
        raise InvalidArgument("eta and ell must be positive")
    x = grid.centers()
    sq = np.sum(x * x, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * x @ x.T, 0.0)
    np.fill_diagonal(d2, 0.0)
    cov = eta**2 * np.exp(-d2 / (2.0 * ell**2))
    return 0.5 * (cov + cov.T)
