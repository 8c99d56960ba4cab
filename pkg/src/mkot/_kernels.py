"""Hot inner loops, compiled with numba when available.

Each kernel has a pure-numpy twin with the same signature.  The module-level
names (``slice_min``, ``slice_logsumexp``, ...) point at the numba versions
unless numba is missing or ``MK_NUMBA=0`` is set in the environment; both
variants stay importable (``*_nb`` / ``*_np``) for tests and benchmarks.

``MK_THREADS`` caps the numba worker pool.  Slice reductions parallelize
over the output index only; every slice is reduced sequentially in a fixed
order, so results do not depend on the thread count.
"""

import os

import numpy as np
from scipy.special import logsumexp

try:
    import numba
    from numba import njit, prange
    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the TBB layer warns on older TBB builds; workqueue is always present
        numba.config.THREADING_LAYER = "workqueue"
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("MK_NUMBA", "1").strip() not in ("0", "false", "no")

if HAVE_NUMBA and os.environ.get("MK_THREADS"):
    numba.set_num_threads(max(1, min(int(os.environ["MK_THREADS"]),
                                     numba.config.NUMBA_NUM_THREADS)))


# ---------------------------------------------------------------- numpy path

def slice_min_np(C2, P):
    """``out[i] = min_r C2[i, r] - P[r]``; rows of +inf give +inf."""
    return np.min(C2 - P[None, :], axis=1)


def slice_logsumexp_np(C2, P, logw, eps):
    """``out[i] = log sum_r exp((P[r] - C2[i, r]) / eps + logw[r])``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        A = (P[None, :] - C2) / eps + logw[None, :]
        return logsumexp(A, axis=1)


def first_negative_np(c, idx, offsets, y, skip, tol):
    """First column ``q`` (not in ``skip``) whose reduced cost is below -tol.

    The reduced cost of column ``q`` is ``c[q] - sum_j y[offsets[j] + idx[q, j]]``.
    Returns -1 when none qualifies.
    """
    red = c.copy()
    for j in range(idx.shape[1]):
        red -= y[offsets[j] + idx[:, j]]
    hits = np.flatnonzero((red < -tol) & ~skip)
    return int(hits[0]) if hits.size else -1


def coulomb_tensor_np(pts, sizes):
    """Dense Coulomb tensor over the product of supports.

    ``pts`` has shape ``(n, max_size, d)`` (zero padded), ``sizes`` the true
    support sizes.  Coincident points give +inf.
    """
    n = len(sizes)
    out = np.zeros(tuple(int(s) for s in sizes))
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            pa = pts[a, :sizes[a]]
            pb = pts[b, :sizes[b]]
            diff = pa[:, None, :] - pb[None, :, :]
            dist = np.sqrt(np.sum(diff * diff, axis=-1))
            with np.errstate(divide="ignore"):
                inv = 1.0 / dist
            inv[np.all(diff == 0, axis=-1)] = np.inf
            shape = [1] * n
            shape[a] = sizes[a]
            shape[b] = sizes[b]
            # broadcasting needs axis order a < b
            out = out + (inv if a < b else inv.T).reshape(shape)
    return out


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def slice_min_nb(C2, P):
        m, R = C2.shape
        out = np.empty(m)
        for i in prange(m):
            best = np.inf
            for r in range(R):
                v = C2[i, r] - P[r]
                if v < best:
                    best = v
            out[i] = best
        return out

    @njit(parallel=True, cache=True)
    def slice_logsumexp_nb(C2, P, logw, eps):
        m, R = C2.shape
        out = np.empty(m)
        for i in prange(m):
            mx = -np.inf
            s = 0.0
            for r in range(R):
                c = C2[i, r]
                if c == np.inf:
                    continue
                v = (P[r] - c) / eps + logw[r]
                if v == -np.inf:
                    continue
                if v > mx:
                    s = s * np.exp(mx - v) + 1.0
                    mx = v
                else:
                    s += np.exp(v - mx)
            if mx == -np.inf:
                out[i] = -np.inf
            else:
                out[i] = mx + np.log(s)
        return out

    @njit(cache=True)
    def first_negative_nb(c, idx, offsets, y, skip, tol):
        N, n = idx.shape
        for q in range(N):
            if skip[q]:
                continue
            red = c[q]
            for j in range(n):
                red -= y[offsets[j] + idx[q, j]]
            if red < -tol:
                return q
        return -1

    @njit(cache=True)
    def _coulomb_flat(pts, sizes, out):
        n = sizes.shape[0]
        d = pts.shape[2]
        cur = np.zeros(n, np.int64)
        for f in range(out.shape[0]):
            rem = f
            for a in range(n - 1, -1, -1):
                cur[a] = rem % sizes[a]
                rem //= sizes[a]
            tot = 0.0
            for a in range(n):
                for b in range(n):
                    if a == b:
                        continue
                    ss = 0.0
                    same = True
                    for k in range(d):
                        t = pts[a, cur[a], k] - pts[b, cur[b], k]
                        if t != 0.0:
                            same = False
                        ss += t * t
                    if same or ss == 0.0:
                        tot = np.inf
                    else:
                        tot += 1.0 / np.sqrt(ss)
            out[f] = tot

    def coulomb_tensor_nb(pts, sizes):
        sizes = np.asarray(sizes, dtype=np.int64)
        out = np.empty(int(np.prod(sizes)))
        _coulomb_flat(np.ascontiguousarray(pts, dtype=np.float64), sizes, out)
        return out.reshape(tuple(int(s) for s in sizes))

else:  # pragma: no cover
    slice_min_nb = slice_min_np
    slice_logsumexp_nb = slice_logsumexp_np
    first_negative_nb = first_negative_np
    coulomb_tensor_nb = coulomb_tensor_np


if USE_NUMBA:
    slice_min = slice_min_nb
    slice_logsumexp = slice_logsumexp_nb
    first_negative = first_negative_nb
    coulomb_tensor = coulomb_tensor_nb
else:
    slice_min = slice_min_np
    slice_logsumexp = slice_logsumexp_np
    first_negative = first_negative_np
    coulomb_tensor = coulomb_tensor_np
