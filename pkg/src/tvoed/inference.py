"""Gaussian-surrogate posterior and the lagged-diffusivity loop."""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CapacityError, ConvergenceFailure, InvalidArgument, NumericalFailure
from .grid import Grid, Image
from .prior import TvParams, stiffness, tv_value

log = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 200
DEFAULT_COV_CAP = 5000


@dataclass(frozen=True)
class StackedSystem:
    """All projection matrices and data gathered so far.

    ``noise_sd`` holds one standard deviation per experiment, so the noise
    covariance is diagonal with ``noise_sd[k]**2`` on the rows of block ``k``.
    """

    n: int
    matrices: tuple = ()
    data: tuple = ()
    noise_sd: tuple = ()

    def __post_init__(self):
        if not (len(self.matrices) == len(self.data) == len(self.noise_sd)):
            raise InvalidArgument("matrices, data and noise_sd must have equal length")
        for R, y in zip(self.matrices, self.data):
            if R.shape[1] != self.n:
                raise InvalidArgument(f"matrix has {R.shape[1]} columns, expected {self.n}")
            if R.shape[0] != len(y):
                raise InvalidArgument("rows of a projection matrix and its data differ")
        if any(not s > 0 for s in self.noise_sd):
            raise InvalidArgument("noise standard deviations must be positive")

    @classmethod
    def empty(cls, n: int) -> "StackedSystem":
        return cls(n)

    def append(self, R, y, sigma: float) -> "StackedSystem":
        return StackedSystem(
            self.n,
            self.matrices + (sp.csr_matrix(R),),
            self.data + (np.asarray(y, dtype=float),),
            self.noise_sd + (float(sigma),),
        )

    def __len__(self):
        return len(self.matrices)

    @property
    def rows(self) -> int:
        return sum(R.shape[0] for R in self.matrices)

    @property
    def R(self) -> sp.csr_matrix:
        if not self.matrices:
            return sp.csr_matrix((0, self.n))
        return sp.vstack(self.matrices, format="csr")

    @property
    def y(self) -> np.ndarray:
        return np.concatenate(self.data) if self.data else np.zeros(0)

    @property
    def noise_var(self) -> np.ndarray:
        """Diagonal of the stacked noise covariance."""
        if not self.matrices:
            return np.zeros(0)
        return np.concatenate(
            [np.full(R.shape[0], s * s) for R, s in zip(self.matrices, self.noise_sd)]
        )


@functools.lru_cache(maxsize=8)
def dissection_order(grid: Grid, leaf: int = 4) -> np.ndarray:
    """Geometric nested-dissection ordering of the interior nodes.

    Boxes are split across their longest axis by a one-node-thick plane,
    which separates the two halves for the 9/27-point stencil.  The two
    halves come first, the separator last.
    """
    shape = (grid.N,) * grid.dim
    strides = [grid.N**a for a in range(grid.dim)]
    parts = []

    def flat(lo, hi):
        axes = np.meshgrid(*[np.arange(a, b) for a, b in zip(lo, hi)], indexing="ij")
        return sum(ax * s for ax, s in zip(axes, strides)).ravel(order="F")

    def split(lo, hi):
        size = [b - a for a, b in zip(lo, hi)]
        if min(size) <= 0:
            return
        if max(size) <= leaf:
            parts.append(flat(lo, hi))
            return
        ax = int(np.argmax(size))
        mid = (lo[ax] + hi[ax]) // 2
        split(lo, hi[:ax] + (mid,) + hi[ax + 1:])
        split(lo[:ax] + (mid + 1,) + lo[ax + 1:], hi)
        parts.append(flat(lo[:ax] + (mid,) + lo[ax + 1:], hi[:ax] + (mid + 1,) + hi[ax + 1:]))

    split((0,) * grid.dim, shape)
    order = np.concatenate(parts)
    order.setflags(write=False)
    return order


class _PermutedFactor:
    """LU of ``H[p][:, p]`` presented as a solver for ``H``."""

    def __init__(self, lu, perm):
        self.lu, self.perm = lu, perm

    def solve(self, B):
        out = np.empty_like(B)
        out[self.perm] = self.lu.solve(np.asarray(B[self.perm], order="F"))
        return out


def _factor(H, grid: Grid | None = None):
    H = sp.csc_matrix(H)
    try:
        if grid is None or grid.n != H.shape[0]:
            return spla.splu(H, permc_spec="MMD_AT_PLUS_A")
        perm = dissection_order(grid)
        # H is SPD: keep the symmetric ordering and skip pivoting
        lu = spla.splu(H[perm][:, perm].tocsc(), permc_spec="NATURAL", diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
        return _PermutedFactor(lu, perm)
    except RuntimeError as exc:
        raise NumericalFailure(f"stiffness factorization failed: {exc}") from exc


def posterior_mean(H, sys: StackedSystem, gamma: float, factor=None) -> np.ndarray:
    """Mean of the Gaussian with precision ``gamma*H + R^T N^-1 R``.

    Computed in data space: ``Z = H^-1 R^T``, then
    ``u = Z (R Z + gamma N)^-1 y`` with ``N`` the noise covariance.
    """
    if len(sys) == 0:
        return np.zeros(sys.n)
    R = sys.R
    factor = factor or _factor(H)
    Z = factor.solve(np.asarray(R.T.toarray(), order="F"))
    S = np.asarray(R @ Z)
    S[np.diag_indices_from(S)] += gamma * sys.noise_var
    try:
        coef = la.cho_solve(la.cho_factor(S, lower=True), sys.y)
    except la.LinAlgError as exc:
        raise NumericalFailure(f"data-space system not positive definite: {exc}") from exc
    return Z @ coef


class _DataSpaceSolver:
    """Solves ``(R H^-1 R^T + gamma N) c = y`` along a lagged-diffusivity run.

    The first step forms the system exactly.  Later steps run conjugate
    gradients preconditioned by the Cholesky factor of the last exactly
    formed system and warm-started from the previous coefficients; ``H``
    changes little between steps, so a handful of single-vector solves
    replaces one solve per data row.  If CG stalls the exact route is
    taken again and becomes the new preconditioner.
    """

    def __init__(self, sys: StackedSystem, gamma: float, rtol: float = 1e-10):
        self.R = sys.R
        self.RT = self.R.T.tocsr()
        self.y = sys.y
        self.shift = gamma * sys.noise_var
        self.rtol = rtol
        self.max_cg = max(8, sys.rows // 4)
        self.chol = None
        self.coef = None
        self.cg_steps = 0

    def mean(self, factor) -> np.ndarray:
        if self.chol is not None:
            coef = self._cg(factor)
            if coef is not None:
                self.coef = coef
                return factor.solve(self.RT @ coef)
        Z = factor.solve(np.asarray(self.RT.toarray(), order="F"))
        S = np.asarray(self.R @ Z)
        S[np.diag_indices_from(S)] += self.shift
        try:
            self.chol = la.cho_factor(S, lower=True)
        except la.LinAlgError as exc:
            raise NumericalFailure(f"data-space system not positive definite: {exc}") from exc
        self.coef = la.cho_solve(self.chol, self.y)
        return Z @ self.coef

    def _cg(self, factor):
        def apply(v):
            return self.R @ factor.solve(self.RT @ v) + self.shift * v

        target = self.rtol * np.linalg.norm(self.y)
        x = self.coef.copy()
        r = self.y - apply(x)
        if np.linalg.norm(r) <= target:
            return x
        z = la.cho_solve(self.chol, r)
        p = z.copy()
        rz = r @ z
        for _ in range(self.max_cg):
            q = apply(p)
            alpha = rz / (p @ q)
            x += alpha * p
            r -= alpha * q
            self.cg_steps += 1
            if np.linalg.norm(r) <= target:
                return x
            z = la.cho_solve(self.chol, r)
            rz, rz_old = r @ z, rz
            p = z + (rz / rz_old) * p
        return None


@dataclass
class LaggedResult:
    u: np.ndarray
    H: sp.csr_matrix
    iterations: int
    history: list = field(default_factory=list)  # (j, Phi, dPhi)


def lagged_diffusivity(u_init, sys: StackedSystem, params: TvParams, tau: float,
                       grid: Grid | None = None, max_iter: int = DEFAULT_MAX_ITER,
                       callback=None) -> LaggedResult:
    """Fixed-point iteration on the frozen-coefficient quadratic surrogate.

    Each step rebuilds ``H`` at the previous iterate and replaces the iterate
    with the surrogate posterior mean, until the relative change of the TV
    functional drops to ``tau``.  The returned ``H`` is the one that produced
    the accepted iterate.
    """
    if isinstance(u_init, Image):
        grid, u = u_init.grid, u_init.values.copy()
    else:
        if grid is None:
            raise InvalidArgument("grid is required with a plain initial array")
        u = np.asarray(u_init, dtype=float).copy()
    if not tau > 0:
        raise InvalidArgument("tau must be positive")
    if len(sys) == 0:
        raise InvalidArgument("lagged diffusivity needs at least one projection")
    T, gamma = params.T, params.gamma
    phi_prev = tv_value(u, T, grid)
    history = []
    H = None
    solver = _DataSpaceSolver(sys, gamma, rtol=min(1e-10, 1e-2 * tau))
    for j in range(1, max_iter + 1):
        H = stiffness(u, T, grid)
        u = solver.mean(_factor(H, grid))
        phi = tv_value(u, T, grid)
        dphi = abs(phi_prev - phi) / phi
        history.append((j, phi, dphi))
        if callback is not None:
            callback(j, phi, dphi)
        if j >= 2 and phi > phi_prev:
            log.warning("TV functional increased at inner step %d: %.6g -> %.6g", j, phi_prev, phi)
        phi_prev = phi
        if dphi <= tau:
            return LaggedResult(u, H, j, history)
    raise ConvergenceFailure(
        f"lagged diffusivity did not reach tau={tau} in {max_iter} steps",
        last_iterate=u, iterations=max_iter,
    )


def posterior_cov(H, sys: StackedSystem, gamma: float, cap: int = DEFAULT_COV_CAP) -> np.ndarray:
    """Dense covariance ``(gamma*H + R^T N^-1 R)^-1``."""
    n = H.shape[0]
    if n > cap:
        raise CapacityError(f"refusing a dense {n}x{n} covariance (cap {cap})")
    P = gamma * (H.toarray() if sp.issparse(H) else np.array(H, dtype=float))
    if len(sys):
        R = sys.R
        P += np.asarray((R.T @ sp.diags(1.0 / sys.noise_var) @ R).toarray())
    try:
        c = la.cho_factor(P, lower=True)
    except la.LinAlgError as exc:
        raise NumericalFailure(f"posterior precision not positive definite: {exc}") from exc
    cov = la.cho_solve(c, np.eye(n))
    return 0.5 * (cov + cov.T)


def reference_reconstruction(sys: StackedSystem, params: TvParams, tau: float,
                             grid: Grid, max_iter: int = DEFAULT_MAX_ITER) -> LaggedResult:
    """Inner loop from the constant-one start with all projections known upfront."""
    return lagged_diffusivity(np.ones(grid.n), sys, params, tau, grid=grid, max_iter=max_iter)
