"""Pure numpy versions of the hot kernels (fallback when the extension is absent)."""

import numpy as np

# Points per partial sum; shared with the compiled kernels so both reduce
# over the same tree shape.
CHUNK = 256


def pairwise_rows(parts):
    """Sum the rows of ``parts`` with a fixed pairwise tree."""
    parts = np.asarray(parts, dtype=np.float64)
    if parts.shape[0] == 0:
        return np.zeros(parts.shape[1:])
    while parts.shape[0] > 1:
        m = parts.shape[0]
        head = parts[0 : m - (m % 2) : 2] + parts[1 : m - (m % 2) : 2]
        if m % 2:
            head = np.concatenate([head, parts[m - 1 :]], axis=0)
        parts = head
    return parts[0].copy()


def monomial_matrix(pts, parent, var, nthreads=1):
    pts = np.asarray(pts, dtype=np.float64)
    T = len(parent)
    out = np.empty((pts.shape[0], T))
    out[:, 0] = 1.0
    for k in range(1, T):
        out[:, k] = out[:, parent[k]] * pts[:, var[k]]
    return out


def weighted_moments(pts, weights, parent, var, nthreads=1):
    pts = np.asarray(pts, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    N = pts.shape[0]
    T = len(parent)
    nchunks = -(-N // CHUNK)
    parts = np.empty((nchunks, T))
    for c in range(nchunks):
        lo, hi = c * CHUNK, min(N, (c + 1) * CHUNK)
        P = monomial_matrix(pts[lo:hi], parent, var)
        parts[c] = w[lo:hi] @ P
    return pairwise_rows(parts) if nchunks else np.zeros(T)


def poly_eval(pts, parent, var, coeffs, nthreads=1):
    pts = np.asarray(pts, dtype=np.float64)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    N = pts.shape[0]
    out = np.empty(N)
    step = 16 * CHUNK
    for lo in range(0, N, step):
        hi = min(N, lo + step)
        out[lo:hi] = monomial_matrix(pts[lo:hi], parent, var) @ coeffs
    return out
