"""Pure-Python ray traversal, used when the compiled kernel is unavailable.

Instead of stepping cell to cell, each ray's plane-crossing parameters are
collected per axis, merged, and the segment midpoints are binned into cells.
"""
import numpy as np


def trace_rays(origins, directions, N, t_lo, t_hi, min_length):
    origins = np.asarray(origins, dtype=float)
    directions = np.asarray(directions, dtype=float)
    R, dim = origins.shape
    planes = np.arange(1, N) / N
    indptr = np.zeros(R + 1, dtype=np.int64)
    all_idx, all_len = [], []
    strides = N ** np.arange(dim)
    for r in range(R):
        o, d = origins[r], directions[r]
        norm = np.sqrt(d @ d)
        tin, tout = t_lo[r], t_hi[r]
        empty = False
        for a in range(dim):
            if d[a] != 0.0:
                t0, t1 = sorted(((0.0 - o[a]) / d[a], (1.0 - o[a]) / d[a]))
                tin, tout = max(tin, t0), min(tout, t1)
            elif not 0.0 <= o[a] <= 1.0:
                empty = True
        if empty or tout <= tin:
            indptr[r + 1] = indptr[r]
            continue
        ts = [np.array([tin, tout])]
        for a in range(dim):
            if d[a] != 0.0:
                t = (planes - o[a]) / d[a]
                ts.append(t[(t > tin) & (t < tout)])
        t = np.sort(np.concatenate(ts))
        seg = np.diff(t) * norm
        keep = seg > min_length
        mid = 0.5 * (t[:-1] + t[1:])[keep]
        pts = o[None, :] + mid[:, None] * d[None, :]
        cells = np.clip(np.floor(pts * N).astype(np.int64), 0, N - 1)
        all_idx.append(cells @ strides)
        all_len.append(seg[keep])
        indptr[r + 1] = indptr[r] + keep.sum()
    if all_idx:
        return indptr, np.concatenate(all_idx), np.concatenate(all_len)
    return indptr, np.zeros(0, dtype=np.int64), np.zeros(0)
