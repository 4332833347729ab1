"""Independent reference computations used by the tests.

None of these call into the package's assembly, tracing or solver code.
"""
import math

import numpy as np

GAUSS = (0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0))


def tv_loop_2d(values, N, T):
    """Explicit element/quadrature loop for the 2D smoothened TV value.

    ``values`` is indexed ``[ix, iy]``; nodes sit at cell centers and the
    surrounding layer of nodes is zero.  Elements are clipped to [0, 1]^2.
    Works with complex input (no abs), so complex-step derivatives are exact.
    """
    h = 1.0 / N
    pad = np.zeros((N + 2, N + 2), dtype=np.asarray(values).dtype)
    pad[1:-1, 1:-1] = values
    total = 0.0
    for ex in range(N + 1):
        for ey in range(N + 1):
            # element spans node (ex, ey)..(ex+1, ey+1) in padded indexing, x from (ex-0.5)h
            u00, u10 = pad[ex, ey], pad[ex + 1, ey]
            u01, u11 = pad[ex, ey + 1], pad[ex + 1, ey + 1]
            sx = (0.5, 1.0) if ex == 0 else (0.0, 0.5) if ex == N else (0.0, 1.0)
            sy = (0.5, 1.0) if ey == 0 else (0.0, 0.5) if ey == N else (0.0, 1.0)
            for gx in GAUSS:
                s = sx[0] + (sx[1] - sx[0]) * gx
                for gy in GAUSS:
                    t = sy[0] + (sy[1] - sy[0]) * gy
                    wt = 0.25 * (sx[1] - sx[0]) * (sy[1] - sy[0]) * h * h
                    dx = ((1 - t) * (u10 - u00) + t * (u11 - u01)) / h
                    dy = ((1 - s) * (u01 - u00) + s * (u11 - u10)) / h
                    total = total + wt * (dx * dx + dy * dy + T * T) ** 0.5
    return total


def complex_step_grad(f, x, step=1e-30):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        xc = x.astype(complex)
        xc[i] += 1j * step
        g[i] = np.imag(f(xc)) / step
    return g


def sampled_lengths(origin, direction, N, dim, step=1e-5, t_lo=-10.0, t_hi=10.0):
    """Per-cell lengths by dense point sampling along the ray (midpoint rule)."""
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    # restrict sampling to the part of the line near the unit box
    lo, hi = t_lo, t_hi
    for a in range(dim):
        if d[a] != 0:
            t0, t1 = sorted(((-o[a]) / d[a], (1 - o[a]) / d[a]))
            lo, hi = max(lo, t0), min(hi, t1)
    out = {}
    if hi <= lo:
        return out
    n = int(math.ceil((hi - lo) / step))
    ts = lo + (np.arange(n) + 0.5) * (hi - lo) / n
    pts = o[None, :] + ts[:, None] * d[None, :]
    inside = np.all((pts >= 0) & (pts < 1), axis=1)
    cells = np.floor(pts[inside] * N).astype(int)
    flat = sum(cells[:, a] * N**a for a in range(dim))
    ds = (hi - lo) / n * np.linalg.norm(d)
    idx, counts = np.unique(flat, return_counts=True)
    for i, c in zip(idx, counts):
        out[int(i)] = c * ds
    return out


def slab_chord(o, d, t_lo=-math.inf, t_hi=math.inf):
    lo, hi = t_lo, t_hi
    for a in range(len(o)):
        if d[a] == 0:
            if not 0 <= o[a] <= 1:
                return 0.0
            continue
        t0, t1 = sorted(((-o[a]) / d[a], (1 - o[a]) / d[a]))
        lo, hi = max(lo, t0), min(hi, t1)
    return max(hi - lo, 0.0) * math.sqrt(sum(x * x for x in d))


def dense_posterior(H, R, noise_var, y, gamma):
    """Information-form mean and covariance via dense inverses."""
    H = np.asarray(H)
    R = np.asarray(R)
    P = gamma * H + R.T @ np.diag(1.0 / noise_var) @ R
    cov = np.linalg.inv(P)
    return cov @ (R.T @ (y / noise_var)), cov


def explicit_update_trace(cov, R, sigma, A=None):
    """Trace of the explicitly formed updated covariance."""
    R = np.asarray(R)
    S = R @ cov @ R.T + sigma**2 * np.eye(R.shape[0])
    post = cov - cov @ R.T @ np.linalg.inv(S) @ R @ cov
    if A is None:
        return np.trace(post)
    A = np.diag(A) if np.ndim(A) == 1 else np.asarray(A)
    return np.trace(A @ post @ A.T)


def random_spd(rng, n):
    X = rng.normal(size=(n, n))
    return X @ X.T + n * np.eye(n)


def tv_vec_2d(values, N, T):
    """Vectorized twin of :func:`tv_loop_2d` (same rule, complex-safe)."""
    h = 1.0 / N
    v = np.asarray(values).reshape(N, N)
    pad = np.zeros((N + 2, N + 2), dtype=v.dtype)
    pad[1:-1, 1:-1] = v
    u00, u10 = pad[:-1, :-1], pad[1:, :-1]
    u01, u11 = pad[:-1, 1:], pad[1:, 1:]
    lo = np.full(N + 1, 0.0)
    hi = np.full(N + 1, 1.0)
    lo[0], hi[-1] = 0.5, 0.5
    span = hi - lo
    total = 0.0
    for gx in GAUSS:
        s = (lo + span * gx)[:, None]
        for gy in GAUSS:
            t = (lo + span * gy)[None, :]
            wt = 0.25 * span[:, None] * span[None, :] * h * h
            dx = ((1 - t) * (u10 - u00) + t * (u11 - u01)) / h
            dy = ((1 - s) * (u01 - u00) + s * (u11 - u10)) / h
            total = total + np.sum(wt * (dx * dx + dy * dy + T * T) ** 0.5)
    return total
