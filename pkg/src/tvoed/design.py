"""A-optimal selection of the next projection by exhaustive search."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import InvalidArgument, NumericalFailure
from .grid import Grid, Image, restrict
from .inference import DEFAULT_COV_CAP, StackedSystem, posterior_cov
from .prior import TvParams, stiffness

# candidates scored per batch; bounds the dense (batch, m, n) work arrays
_BATCH_BYTES = 64 * 2**20


def _weight_terms(cov, A):
    """Return ``(tr(A cov A^T), apply)`` where ``apply(X) = X A^T``."""
    if A is None:
        return float(np.trace(cov)), lambda X: X
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        return float(np.sum(A * A * np.diag(cov))), lambda X: X * A
    return float(np.trace(A @ cov @ A.T)), lambda X: X @ A.T


def a_value(cov, Rp, sigma: float, A=None) -> float:
    """``tr(A Gamma_post A^T)`` after adding projection ``Rp`` with noise ``sigma``.

    ``A`` is ``None`` (identity), a 1D array of diagonal weights (e.g. a 0/1
    region-of-interest mask) or a dense ``(l, n)`` matrix.  The updated
    covariance is never formed: the reduction is ``||L^-1 R cov A^T||_F^2``
    with ``L L^T = R cov R^T + sigma^2 I``.
    """
    if sigma <= 0:
        raise InvalidArgument("sigma must be positive")
    prior_trace, apply = _weight_terms(cov, A)
    Rd = Rp.toarray() if sp.issparse(Rp) else np.asarray(Rp, dtype=float)
    if Rd.shape[1] != cov.shape[0]:
        raise InvalidArgument("projection matrix and covariance sizes differ")
    X = Rd @ cov
    S = X @ Rd.T
    S[np.diag_indices_from(S)] += sigma * sigma
    try:
        L = la.cholesky(S, lower=True)
    except la.LinAlgError as exc:
        raise NumericalFailure(f"R cov R^T + sigma^2 I is not positive definite: {exc}") from exc
    V = la.solve_triangular(L, apply(X), lower=True)
    return prior_trace - float(np.sum(V * V))


@dataclass
class DesignScore:
    index: int
    value: float


class CandidateSet:
    """Candidate geometries with their projection matrices on one grid.

    The matrices are assembled once; the geometry set does not change
    between rounds.
    """

    def __init__(self, grid: Grid, space, candidates=None):
        self.grid = grid
        self.space = space
        self.params = list(space.candidates() if candidates is None else candidates)
        if not self.params:
            raise InvalidArgument("empty candidate list")
        self.matrices = [space.matrix(grid, p) for p in self.params]

    def __len__(self):
        return len(self.params)

    def scores(self, cov, sigma: float, A=None) -> np.ndarray:
        return score_candidates(cov, self.matrices, sigma, A)


def score_candidates(cov, matrices, sigma: float, A=None) -> np.ndarray:
    """Vectorized :func:`a_value` over a list of projection matrices."""
    if sigma <= 0:
        raise InvalidArgument("sigma must be positive")
    n = cov.shape[0]
    prior_trace, apply = _weight_terms(cov, A)
    out = np.empty(len(matrices))
    by_rows = {}
    for i, R in enumerate(matrices):
        by_rows.setdefault(R.shape[0], []).append(i)
    for m, idx in by_rows.items():
        if m == 0:
            out[idx] = prior_trace
            continue
        batch = max(1, _BATCH_BYTES // (8 * m * n))
        for start in range(0, len(idx), batch):
            sel = idx[start:start + batch]
            Rs = sp.vstack([matrices[i] for i in sel], format="csr")
            X = np.asarray(Rs @ cov).reshape(len(sel), m, n)
            Rd = Rs.toarray().reshape(len(sel), m, n)
            S = X @ Rd.transpose(0, 2, 1)
            S[:, np.arange(m), np.arange(m)] += sigma * sigma
            try:
                L = np.linalg.cholesky(S)
            except np.linalg.LinAlgError as exc:
                raise NumericalFailure(f"candidate system not positive definite: {exc}") from exc
            V = np.linalg.solve(L, apply(X))
            out[sel] = prior_trace - np.einsum("cmi,cmi->c", V, V)
    return out


def select_design(cov, candidates, sigma: float, A=None):
    """Exhaustive A-optimal choice; ties go to the lowest index.

    ``candidates`` is a :class:`CandidateSet` or a list of ``(param, matrix)``
    pairs.  Returns ``(index, param, score, all_scores)``.
    """
    if isinstance(candidates, CandidateSet):
        params, matrices = candidates.params, candidates.matrices
    else:
        candidates = list(candidates)
        if not candidates:
            raise InvalidArgument("empty candidate list")
        params, matrices = zip(*candidates)
    scores = score_candidates(cov, matrices, sigma, A)
    best = int(np.argmin(scores))
    return best, params[best], float(scores[best]), scores


def coarse_state(u_fine: Image, coarse: Grid, coarse_sys: StackedSystem, params: TvParams,
                 cap: int = DEFAULT_COV_CAP) -> np.ndarray:
    """Approximate posterior covariance on the coarse design grid.

    The current reconstruction is interpolated to ``coarse`` and the
    covariance is ``(gamma H(u~) + R~^T N^-1 R~)^-1`` with the past
    geometries reassembled on the coarse grid.
    """
    u_coarse = restrict(u_fine, coarse)
    H = stiffness(u_coarse, params.T)
    return posterior_cov(H, coarse_sys, params.gamma, cap=cap)


def initial_cov(u0: Image, coarse: Grid, params: TvParams,
                cap: int = DEFAULT_COV_CAP) -> np.ndarray:
    """Start-up covariance ``H(u~0)^-1`` on the coarse grid.

    This is the plain inverse stiffness used before any projection is taken;
    it lacks the ``1/gamma`` factor that :func:`coarse_state` carries.
    """
    H = stiffness(restrict(u0, coarse), params.T)
    return posterior_cov(H, StackedSystem.empty(coarse.n), 1.0, cap=cap)


def gaussian_design_sequence(cov0, candidates, sigma: float, rounds: int, A=None):
    """Sequential A-optimal designs under a fixed Gaussian prior.

    No data enter, so the list depends only on ``cov0`` and the noise level.
    """
    cov = np.array(cov0, dtype=float)
    picks = []
    for _ in range(rounds):
        idx, _, score, _ = select_design(cov, candidates, sigma, A)
        Rd = candidates.matrices[idx].toarray()
        X = Rd @ cov
        S = X @ Rd.T
        S[np.diag_indices_from(S)] += sigma * sigma
        cov = cov - X.T @ la.cho_solve(la.cho_factor(S, lower=True), X)
        cov = 0.5 * (cov + cov.T)
        picks.append((idx, score))
    return picks
