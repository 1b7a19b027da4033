"""Harmonic-oscillator eigenbasis chi_n for H = -1/2 d_x^2 + 1/2 b^2 x^2.

The Gaussian envelope is kept inside the tabulated functions, so every
quadrature rule here carries "envelope-absorbed" weights: a rule built for
weight exp(-alpha b x^2) integrates f(x) = poly(x) exp(-alpha b x^2) as
sum_j W_j f(x_j).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import _kernels


def gauss_hermite(n_nodes):
    """Golub-Welsch nodes for weight exp(-z^2) with envelope-absorbed weights.

    Returns ``(z, W)`` where ``sum_j W_j f(z_j)`` approximates the integral of
    ``f`` over the real line, exact when ``f = p(z) exp(-z^2)`` with
    ``deg p <= 2 n_nodes - 1``.  The ordinary Gauss weights are ``W * exp(-z^2)``.

    Nodes come from the Jacobi matrix eigenvalues, polished by Newton steps on
    the normalized Hermite function; weights use the Christoffel form
    ``1 / (n h_{n-1}(z_j)^2)``, which keeps full relative accuracy at the
    outermost nodes.
    """
    n = int(n_nodes)
    if n < 1:
        raise ValueError("n_nodes must be >= 1")
    if n == 1:
        return np.zeros(1), np.array([math.sqrt(math.pi)])
    offdiag = np.sqrt(np.arange(1, n) / 2.0)
    z = eigh_tridiagonal(np.zeros(n), offdiag, eigvals_only=True)
    for _ in range(3):
        h = _kernels.hermite_functions(z, n + 1)
        z = z - h[:, n] / (math.sqrt(2.0 * n) * h[:, n - 1])
    h = _kernels.hermite_functions(z, n)
    W = 1.0 / (n * h[:, n - 1] ** 2)
    # symmetrize against rounding
    z = 0.5 * (z - z[::-1])
    W = 0.5 * (W + W[::-1])
    return z, W


@lru_cache(maxsize=64)
def _scaled_rule(n_nodes, alpha_b):
    z, W = gauss_hermite(n_nodes)
    s = math.sqrt(alpha_b)
    return z / s, W / s


def scaled_rule(n_nodes, b, alpha=1.0):
    """Nodes/weights for integrands with envelope exp(-alpha b x^2)."""
    x, w = _scaled_rule(int(n_nodes), float(alpha) * float(b))
    return x.copy(), w.copy()


def eval_chi(x, b, n_modes):
    """Table of chi_n(x), shape (len(x), n_modes), by the normalized recurrence."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    return b ** 0.25 * _kernels.hermite_functions(math.sqrt(b) * x, int(n_modes))


@dataclass(frozen=True, eq=False)
class HermiteBasis:
    b: float
    n_modes: int
    n_quad: int
    nodes: np.ndarray
    weights: np.ndarray
    table: np.ndarray

    @property
    def energies(self):
        return self.b * (np.arange(self.n_modes) + 0.5)

    def key(self):
        return (self.b, self.n_modes, self.n_quad)

    def __eq__(self, other):
        return isinstance(other, HermiteBasis) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def project(self, samples):
        """Grid samples at the nodes -> coefficients on chi_0..chi_{N_h-1}.

        Works along axis 0, so a (N_q, ...) array maps to (N_h, ...).
        """
        samples = np.asarray(samples)
        if samples.shape[0] != self.n_quad:
            raise ValueError(f"expected {self.n_quad} samples along axis 0, got {samples.shape[0]}")
        return np.tensordot(self.table.T * self.weights, samples, axes=1)

    def synth(self, coeffs):
        coeffs = np.asarray(coeffs)
        if coeffs.shape[0] != self.n_modes:
            raise ValueError(f"expected {self.n_modes} coefficients along axis 0, got {coeffs.shape[0]}")
        return np.tensordot(self.table, coeffs, axes=1)


def default_n_quad(n_modes):
    return 2 * n_modes + 8


def build_basis(b, n_modes, n_quad=None):
    b = float(b)
    if not b > 0:
        raise ValueError(f"b must be positive, got {b}")
    n_modes = int(n_modes)
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    n_quad = default_n_quad(n_modes) if n_quad is None else int(n_quad)
    if n_quad < n_modes:
        raise ValueError(f"n_quad ({n_quad}) must be >= n_modes ({n_modes})")
    x, w = scaled_rule(n_quad, b)
    table = eval_chi(x, b, n_modes)
    for arr in (x, w, table):
        arr.setflags(write=False)
    return HermiteBasis(b, n_modes, n_quad, x, w, table)


def eigenvalue(n, b):
    if n < 0:
        raise ValueError(f"mode index must be >= 0, got {n}")
    if not b > 0:
        raise ValueError(f"b must be positive, got {b}")
    return b * (n + 0.5)


def coupling_v(n, m, b):
    """<x chi_n, chi_m>: nonzero only for m = n +/- 1."""
    if n < 0 or m < 0:
        raise ValueError("mode indices must be >= 0")
    if m == n + 1:
        return math.sqrt(n + 1) / math.sqrt(2.0 * b)
    if m == n - 1:
        return math.sqrt(n) / math.sqrt(2.0 * b)
    return 0.0


def coupling_matrix(n_modes, b):
    """Truncated matrix X[m, n] = <x chi_n, chi_m> (symmetric, zero diagonal)."""
    off = np.sqrt(np.arange(1, n_modes) / (2.0 * b))
    return np.diag(off, 1) + np.diag(off, -1)


def chi_norm_pow(n, p, basis):
    """Integral of |chi_n|^p over the real line, for even p >= 2."""
    if p < 2 or p % 2:
        raise ValueError(f"p must be an even integer >= 2, got {p}")
    if n < 0:
        raise ValueError("mode index must be >= 0")
    # integrand is a degree p*n polynomial times exp(-(p/2) b x^2)
    n_nodes = (p * n) // 2 + 2
    x, w = scaled_rule(n_nodes, basis.b, alpha=p / 2)
    chi = eval_chi(x, basis.b, n + 1)[:, n]
    return float(np.sum(w * chi ** p))
