"""Hot loops of the particle scheme, with numba and pure-numpy variants.

The backend is picked once at import time from ``EBT_RADIAL_BACKEND``
(``numba`` by default, ``numpy`` to force the fallback).  Both variants sum
each row in ascending column order and produce bit-identical results.

Band layout: ``vals[k, i] = L(x_i, x_{i+k-s})`` for k = 0..2s, zero where
the column falls outside the grid.  Masses are read from a zero-padded copy
``mpad`` with ``mpad[s + j] = m[j]``.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

BACKEND = os.environ.get("EBT_RADIAL_BACKEND", "numba").strip().lower()
if BACKEND not in ("numba", "numpy"):
    raise ImportError(f"EBT_RADIAL_BACKEND must be 'numba' or 'numpy', got {BACKEND!r}")
if numba is None:
    BACKEND = "numpy"
USE_NUMBA = BACKEND == "numba"


# numpy's SIMD arcsin and libm's asin differ in the last bit on a fraction of
# inputs; every 2D kernel evaluation goes through libm so all paths agree.
if USE_NUMBA:
    @numba.vectorize(["float64(float64)"], cache=True)
    def asin(c):
        return math.asin(c)
else:
    _asin_obj = np.frompyfunc(math.asin, 1, 1)

    def asin(c):
        return np.asarray(_asin_obj(c), dtype=np.float64)


# -- pure numpy ---------------------------------------------------------------

def band_matvec_np(vals, mpad, out):
    w, n = vals.shape
    out[:] = 0.0
    for k in range(w):
        out += vals[k] * mpad[k:k + n]
    return out


def dense_matvec_np(dense, m, out):
    out[:] = 0.0
    for j in range(m.size):
        out += dense[:, j] * m[j]
    return out


def kernel_diagonal_3d(x, k, s, pref, sigma):
    """Values L(x_i, x_{i+k-s}) for all rows i (zero outside the grid)."""
    n = x.size
    off = k - s
    out = np.zeros(n)
    lo, hi = max(0, -off), min(n, n - off)
    if lo >= hi:
        return out
    R = x[lo:hi]
    r = x[lo + off:hi + off]
    d = np.abs(R - r)
    lt = np.maximum(np.minimum(4.0 * (R * r), (sigma - d) * (sigma + d)), 0.0)
    out[lo:hi] = pref * (lt / (R * r))
    return out


def kernel_diagonal_2d(x, k, s, pref, sigma):
    n = x.size
    off = k - s
    out = np.zeros(n)
    lo, hi = max(0, -off), min(n, n - off)
    if lo >= hi:
        return out
    R = x[lo:hi]
    r = x[lo + off:hi + off]
    c = np.clip((R * R + r * r - sigma * sigma) / (2.0 * R * r), -1.0, 1.0)
    val = np.where(np.abs(R - r) <= sigma, 0.5 * np.pi - asin(c), 0.0)
    out[lo:hi] = pref * val
    return out


def free_matvec_np(x, s, pref, sigma, dim, mpad, out):
    n = x.size
    out[:] = 0.0
    diag = kernel_diagonal_3d if dim == 3 else kernel_diagonal_2d
    for k in range(2 * s + 1):
        out += diag(x, k, s, pref, sigma) * mpad[k:k + n]
    return out


def euler_update_np(m, cap, S, inv_x, dt):
    """In-place Euler update; returns (sum rhs/x, sum m/x) taken before it."""
    rhs = (cap - m) * S
    # cumsum adds left to right like the numba loop (np.sum is pairwise)
    num = float(np.cumsum(rhs * inv_x)[-1]) if m.size else 0.0
    den = float(np.cumsum(m * inv_x)[-1]) if m.size else 0.0
    m += dt * rhs
    return num, den


# -- numba --------------------------------------------------------------------

ROW_BLOCK = 1024

if numba is not None:
    njit = numba.njit(cache=True, nogil=True)

    @njit
    def band_matvec_nb(vals, mpad, out):
        w, n = vals.shape
        for i in range(n):
            out[i] = 0.0
        for k in range(w):
            for i in range(n):
                out[i] += vals[k, i] * mpad[i + k]
        return out

    @numba.njit(cache=True, nogil=True, parallel=True)
    def band_matvec_par_nb(vals, mpad, out):
        # row blocks in parallel; each row still sums its band in ascending j
        w, n = vals.shape
        for b in numba.prange((n + ROW_BLOCK - 1) // ROW_BLOCK):
            lo = b * ROW_BLOCK
            hi = min(n, lo + ROW_BLOCK)
            for i in range(lo, hi):
                out[i] = 0.0
            for k in range(w):
                for i in range(lo, hi):
                    out[i] += vals[k, i] * mpad[i + k]
        return out

    @njit
    def dense_matvec_nb(dense, m, out):
        n = m.size
        for i in range(out.size):
            out[i] = 0.0
        for j in range(n):
            mj = m[j]
            for i in range(out.size):
                out[i] += dense[i, j] * mj
        return out

    @njit
    def free_matvec_nb(x, s, pref, sigma, dim, mpad, out):
        n = x.size
        for i in range(n):
            out[i] = 0.0
        for k in range(2 * s + 1):
            off = k - s
            lo = max(0, -off)
            hi = min(n, n - off)
            for i in range(lo, hi):
                R = x[i]
                r = x[i + off]
                if dim == 3:
                    d = abs(R - r)
                    lt = min(4.0 * (R * r), (sigma - d) * (sigma + d))
                    if lt < 0.0:
                        lt = 0.0
                    v = pref * (lt / (R * r))
                else:
                    if abs(R - r) <= sigma:
                        c = (R * R + r * r - sigma * sigma) / (2.0 * R * r)
                        c = min(max(c, -1.0), 1.0)
                        v = pref * (0.5 * math.pi - math.asin(c))
                    else:
                        v = 0.0
                out[i] += v * mpad[i + k]
        return out

    @njit
    def euler_update_nb(m, cap, S, inv_x, dt):
        num = 0.0
        den = 0.0
        for i in range(m.size):
            rhs = (cap[i] - m[i]) * S[i]
            num += rhs * inv_x[i]
            den += m[i] * inv_x[i]
            m[i] = m[i] + dt * rhs
        return num, den


def _pick(np_fn, nb_name):
    if USE_NUMBA:
        return globals()[nb_name]
    return np_fn


band_matvec = _pick(band_matvec_np, "band_matvec_nb")
dense_matvec = _pick(dense_matvec_np, "dense_matvec_nb")
free_matvec = _pick(free_matvec_np, "free_matvec_nb")
euler_update = _pick(euler_update_np, "euler_update_nb")


def band_matvec_threaded(vals, mpad, out, threads):
    """Band product on up to ``threads`` numba threads (serial under numpy).

    Must not be entered from two Python threads at once.
    """
    if not USE_NUMBA or threads <= 1:
        return band_matvec(vals, mpad, out)
    numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
    return band_matvec_par_nb(vals, mpad, out)
