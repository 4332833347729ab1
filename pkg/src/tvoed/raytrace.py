"""Exact ray/grid intersection lengths.

The compiled kernel (``tvoed._siddon``) is used when it was built; otherwise
the pure-Python tracer is selected at import.  Set ``TVOED_BACKEND=python``
to force the fallback.
"""
from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

from . import _siddon_py
from .errors import InvalidArgument

try:
    if os.environ.get("TVOED_BACKEND", "").lower() == "python":
        raise ImportError("fallback forced")
    from . import _siddon as _compiled
except ImportError:
    _compiled = None

BACKENDS = {"python": _siddon_py.trace_rays}
if _compiled is not None:
    BACKENDS["cython"] = _compiled.trace_rays
BACKEND = "cython" if _compiled is not None else "python"

# segments shorter than this fraction of h are rounding debris at lattice corners
_MIN_REL_LENGTH = 1e-12


def trace_batch(grid, origins, directions, t_lo=None, t_hi=None, backend=None):
    """Trace many rays at once.

    Parameters
    ----------
    grid : Grid
    origins, directions : (R, dim) arrays
        Ray ``r`` is the set ``origins[r] + t * directions[r]``.
    t_lo, t_hi : (R,) arrays, optional
        Parameter limits; default to the full line.
    backend : {"cython", "python"}, optional

    Returns
    -------
    scipy.sparse.csr_matrix of shape ``(R, grid.n)`` holding intersection
    lengths.
    """
    origins = np.ascontiguousarray(np.atleast_2d(origins), dtype=float)
    directions = np.ascontiguousarray(np.atleast_2d(directions), dtype=float)
    R = origins.shape[0]
    if origins.shape != directions.shape or origins.shape[1] != grid.dim:
        raise InvalidArgument("origins/directions must both have shape (R, grid.dim)")
    if np.any(np.all(directions == 0.0, axis=1)):
        raise InvalidArgument("zero ray direction")
    t_lo = np.full(R, -np.inf) if t_lo is None else np.ascontiguousarray(t_lo, dtype=float)
    t_hi = np.full(R, np.inf) if t_hi is None else np.ascontiguousarray(t_hi, dtype=float)
    fn = BACKENDS[backend or BACKEND]
    indptr, indices, lengths = fn(origins, directions, grid.N, t_lo, t_hi, _MIN_REL_LENGTH * grid.h)
    mat = sp.csr_matrix((lengths, indices, indptr), shape=(R, grid.n))
    mat.sum_duplicates()
    return mat


def trace_ray(grid, origin, direction, t_lo=-np.inf, t_hi=np.inf, backend=None):
    """Intersection lengths of one line with the interior cells.

    Returns ``(indices, lengths)``.  ``direction`` must have unit length.
    """
    direction = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        raise InvalidArgument("zero ray direction")
    if abs(norm - 1.0) > 1e-12:
        raise InvalidArgument(f"direction must be a unit vector (|d| = {norm!r})")
    row = trace_batch(grid, [origin], [direction], [t_lo], [t_hi], backend=backend)
    return row.indices.copy(), row.data.copy()


def box_chord(origin, direction, t_lo=-np.inf, t_hi=np.inf):
    """Length of ``{origin + t*direction : t_lo <= t <= t_hi}`` inside ``[0,1]^dim``."""
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    tin, tout = t_lo, t_hi
    for a in range(o.size):
        if d[a] == 0.0:
            if not 0.0 <= o[a] <= 1.0:
                return 0.0
            continue
        t0, t1 = sorted(((0.0 - o[a]) / d[a], (1.0 - o[a]) / d[a]))
        tin, tout = max(tin, t0), min(tout, t1)
    return max(tout - tin, 0.0) * float(np.linalg.norm(d))
