"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``SQGLAB_DISABLE_NUMBA`` is unset (or set to ``0``).  Both
implementations are always importable so they can be compared directly
(see ``benchmarks/bench_kernels.py``).
"""

from __future__ import annotations

import os

import numpy as np

DISABLE_ENV = "SQGLAB_DISABLE_NUMBA"

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get(DISABLE_ENV, "0").lower() in ("", "0", "false", "no")


# ---------------------------------------------------------------------------
# Frequency-triangle scan: max over lattice triples j + k - l = 0 of
#     |k| * |w(l) - w(k)| / |j|
# ---------------------------------------------------------------------------

def triangle_max_numpy(vecs, norms, w, nmax2):
    """Return ``(best, ik, il)`` over all admissible index pairs (k, l)."""
    best = -1.0
    bk = bl = -1
    v1 = vecs[:, 0]
    v2 = vecs[:, 1]
    for ik in range(vecs.shape[0]):
        j1 = v1 - vecs[ik, 0]
        j2 = v2 - vecs[ik, 1]
        jj = j1 * j1 + j2 * j2
        ok = (jj > 0) & (jj <= nmax2)
        if not ok.any():
            continue
        ratio = np.where(ok, norms[ik] * np.abs(w - w[ik]) / np.sqrt(np.maximum(jj, 1)), -1.0)
        il = int(np.argmax(ratio))
        if ratio[il] > best:
            best = float(ratio[il])
            bk, bl = ik, il
    return best, bk, bl


def _triangle_max_py(vecs, norms, w, nmax2):
    best = -1.0
    bk = -1
    bl = -1
    p = vecs.shape[0]
    for ik in range(p):
        k1 = vecs[ik, 0]
        k2 = vecs[ik, 1]
        nk = norms[ik]
        wk = w[ik]
        for il in range(p):
            j1 = vecs[il, 0] - k1
            j2 = vecs[il, 1] - k2
            jj = j1 * j1 + j2 * j2
            if jj == 0 or jj > nmax2:
                continue
            r = nk * abs(w[il] - wk) / np.sqrt(jj)
            if r > best:
                best = r
                bk = ik
                bl = il
    return best, bk, bl


# ---------------------------------------------------------------------------
# Spectral interpolation of a real band-limited field at scattered points.
# coeffs[a, b] multiplies exp(i (k1[a] x + k2[b] y)); the field is the real
# part of the sum (half-plane storage with doubled weights folded in).
# ---------------------------------------------------------------------------

def nudft_real_numpy(coeffs, k1, k2, pts, chunk=4096):
    out = np.empty(pts.shape[0])
    for s in range(0, pts.shape[0], chunk):
        p = pts[s:s + chunk]
        e1 = np.exp(1j * np.outer(p[:, 0], k1))
        e2 = np.exp(1j * np.outer(p[:, 1], k2))
        out[s:s + chunk] = np.real(np.einsum("pb,pb->p", e1 @ coeffs, e2))
    return out


def _nudft_real_py(cr, ci, k1, k2, pts):
    # real arithmetic on split coefficients so the inner loop vectorizes
    npts = pts.shape[0]
    na = k1.shape[0]
    nb = k2.shape[0]
    out = np.empty(npts)
    c2 = np.empty(nb)
    s2 = np.empty(nb)
    for p in range(npts):
        x = pts[p, 0]
        y = pts[p, 1]
        for b in range(nb):
            c2[b] = np.cos(k2[b] * y)
            s2[b] = np.sin(k2[b] * y)
        acc = 0.0
        for a in range(na):
            rr = 0.0
            ri = 0.0
            for b in range(nb):
                rr += cr[a, b] * c2[b] - ci[a, b] * s2[b]
                ri += cr[a, b] * s2[b] + ci[a, b] * c2[b]
            ph = k1[a] * x
            acc += rr * np.cos(ph) - ri * np.sin(ph)
        out[p] = acc
    return out


if HAVE_NUMBA:
    triangle_max_numba = njit(cache=True, nogil=True)(_triangle_max_py)
    _nudft_kernel = njit(cache=True, nogil=True, fastmath=True)(_nudft_real_py)

    def nudft_real_numba(coeffs, k1, k2, pts):
        return _nudft_kernel(np.ascontiguousarray(coeffs.real), np.ascontiguousarray(coeffs.imag), k1, k2, pts)
else:  # pragma: no cover
    triangle_max_numba = None
    nudft_real_numba = None


def triangle_max(vecs, norms, w, nmax2):
    vecs = np.ascontiguousarray(vecs, dtype=np.int64)
    norms = np.ascontiguousarray(norms, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if USE_NUMBA:
        best, bk, bl = triangle_max_numba(vecs, norms, w, int(nmax2))
        return float(best), int(bk), int(bl)
    return triangle_max_numpy(vecs, norms, w, int(nmax2))


def nudft_real(coeffs, k1, k2, pts):
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    k1 = np.ascontiguousarray(k1, dtype=np.float64)
    k2 = np.ascontiguousarray(k2, dtype=np.float64)
    pts = np.ascontiguousarray(pts, dtype=np.float64).reshape(-1, 2)
    if USE_NUMBA:
        return nudft_real_numba(coeffs, k1, k2, pts)
    return nudft_real_numpy(coeffs, k1, k2, pts)
