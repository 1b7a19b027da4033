"""Hot inner loops, compiled with numba when available.

Every kernel has a pure-numpy twin.  The compiled path is used by default;
set ``IWSK_NUMBA=0`` in the environment (before import) to force numpy.
Both paths are importable explicitly as ``numpy_<name>`` / ``numba_<name>``
so tests and benchmarks can compare them.
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("IWSK_NUMBA", "1").strip() not in ("0", "false", "no", "")

_PI_QUARTER = math.pi ** -0.25


# -- numpy reference versions -------------------------------------------------

def numpy_hermite_functions(z, n_modes):
    """Orthonormal Hermite functions h_0..h_{n_modes-1} at points ``z`` (b = 1).

    Returns an array of shape (len(z), n_modes).
    """
    z = np.asarray(z, dtype=np.float64)
    out = np.empty((z.size, n_modes))
    out[:, 0] = _PI_QUARTER * np.exp(-0.5 * z * z)
    if n_modes > 1:
        out[:, 1] = math.sqrt(2.0) * z * out[:, 0]
    for n in range(1, n_modes - 1):
        out[:, n + 1] = (math.sqrt(2.0 / (n + 1)) * z * out[:, n]
                         - math.sqrt(n / (n + 1)) * out[:, n - 1])
    return out


def numpy_power_nonlin(g, lam, sigma):
    """lam * |g|^(2 sigma) * g, elementwise (lam broadcasts against g)."""
    mod2 = g.real * g.real + g.imag * g.imag
    return lam * mod2 ** sigma * g


def numpy_phase_rotate(g, lam, tau, sigma):
    """exp(-i tau lam |g|^(2 sigma)) g, the exact flow of i d_t g = lam |g|^2s g."""
    mod2 = g.real * g.real + g.imag * g.imag
    return np.exp(-1j * tau * lam * mod2 ** sigma) * g


def numpy_propagate_columns(vecs, phases, coeffs):
    """Per Fourier column k: c_k <- V_k diag(phases_k) V_k^T c_k.

    vecs: (K, N, N) real, phases: (K, N) complex, coeffs: (N, K) complex.
    """
    tmp = np.einsum("knm,nk->km", vecs, coeffs)
    tmp *= phases
    return np.einsum("knm,km->nk", vecs, tmp)


# -- numba versions -----------------------------------------------------------

if HAS_NUMBA:
    @numba.njit(cache=True)
    def numba_hermite_functions(z, n_modes):
        z = np.asarray(z, dtype=np.float64)
        npts = z.size
        out = np.empty((npts, n_modes))
        c1 = math.sqrt(2.0)
        for j in range(npts):
            zj = z[j]
            h_prev = 0.0
            h = _PI_QUARTER * math.exp(-0.5 * zj * zj)
            out[j, 0] = h
            for n in range(n_modes - 1):
                if n == 0:
                    h_next = c1 * zj * h
                else:
                    h_next = math.sqrt(2.0 / (n + 1)) * zj * h - math.sqrt(n / (n + 1)) * h_prev
                out[j, n + 1] = h_next
                h_prev = h
                h = h_next
        return out

    @numba.njit(cache=True)
    def _power_nonlin_2d(g, lam, sigma, out):
        for p in range(g.shape[0]):
            for q in range(g.shape[1]):
                v = g[p, q]
                m = v.real * v.real + v.imag * v.imag
                out[p, q] = lam[q] * m ** sigma * v

    @numba.njit(cache=True)
    def _phase_rotate_2d(g, lam, tau, sigma, out):
        for p in range(g.shape[0]):
            for q in range(g.shape[1]):
                v = g[p, q]
                m = v.real * v.real + v.imag * v.imag
                arg = -tau * lam[q] * m ** sigma
                out[p, q] = complex(math.cos(arg), math.sin(arg)) * v

    def _as_2d(g, lam):
        # lam broadcasts against the trailing axes of g
        g = np.ascontiguousarray(g, dtype=np.complex128)
        lam = np.asarray(lam, dtype=np.float64)
        while lam.ndim and lam.shape[0] == 1:
            lam = lam[0]
        if lam.ndim == 0:
            lam = np.full(g.shape[-1:] if g.ndim else (1,), float(lam))
        tail = lam.shape
        if g.shape[g.ndim - len(tail):] != tail:
            lam = np.broadcast_to(lam, g.shape)
            tail = g.shape
        q = int(np.prod(tail))
        return g.reshape(-1, q), np.ascontiguousarray(lam).reshape(q)

    def numba_power_nonlin(g, lam, sigma):
        g2, lam1 = _as_2d(g, lam)
        out = np.empty_like(g2)
        _power_nonlin_2d(g2, lam1, int(sigma), out)
        return out.reshape(np.shape(g))

    def numba_phase_rotate(g, lam, tau, sigma):
        g2, lam1 = _as_2d(g, lam)
        out = np.empty_like(g2)
        _phase_rotate_2d(g2, lam1, float(tau), int(sigma), out)
        return out.reshape(np.shape(g))

    @numba.njit(cache=True)
    def _propagate_columns(vecs, phases, coeffs, out):
        n_cols = vecs.shape[0]
        n = vecs.shape[1]
        tmp = np.empty(n, dtype=np.complex128)
        for k in range(n_cols):
            v = vecs[k]
            for m in range(n):
                acc = 0j
                for i in range(n):
                    acc += v[i, m] * coeffs[i, k]
                tmp[m] = acc * phases[k, m]
            for i in range(n):
                acc = 0j
                for m in range(n):
                    acc += v[i, m] * tmp[m]
                out[i, k] = acc

    def numba_propagate_columns(vecs, phases, coeffs):
        coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
        out = np.empty_like(coeffs)
        _propagate_columns(np.ascontiguousarray(vecs), np.ascontiguousarray(phases), coeffs, out)
        return out
else:  # pragma: no cover
    numba_hermite_functions = numpy_hermite_functions
    numba_power_nonlin = numpy_power_nonlin
    numba_phase_rotate = numpy_phase_rotate
    numba_propagate_columns = numpy_propagate_columns


if USE_NUMBA:
    hermite_functions = numba_hermite_functions
    power_nonlin = numba_power_nonlin
    phase_rotate = numba_phase_rotate
    propagate_columns = numba_propagate_columns
else:
    hermite_functions = numpy_hermite_functions
    power_nonlin = numpy_power_nonlin
    phase_rotate = numpy_phase_rotate
    propagate_columns = numpy_propagate_columns

BACKEND = "numba" if USE_NUMBA else "numpy"
