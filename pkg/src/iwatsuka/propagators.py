"""Exact linear flows on SpectralFields.

For a Fourier column with frequency xi the operator H_eps is, after completing
the square, a harmonic oscillator centred at -a with a = eps xi / b:

    H + eps b xi x + eps^2 xi^2 / 2 = -1/2 d_x^2 + 1/2 b^2 (x + a)^2,

so its eigenfunctions are the translates chi_n(x + a).  The truncated
Galerkin matrix of that operator is diagonalized per column; its orthogonal
eigenvector matrix is the (truncated) displacement table D(a), sign-aligned
with the quadrature overlaps <chi_m, chi_n(. + a)>.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .field import heps_matrices
from .hermite import eval_chi

TWO_PI = 2.0 * math.pi
_TWO_PI_LD = np.longdouble(8) * np.arctan(np.longdouble(1))


def reduced_phase(theta, energies):
    """exp(-i theta E) with the argument reduced mod 2 pi before the sin/cos."""
    arg = np.multiply.outer(np.asarray(theta, dtype=np.longdouble),
                            np.asarray(energies, dtype=np.longdouble))
    arg = np.fmod(arg, _TWO_PI_LD)
    return np.exp(-1j * arg.astype(np.float64))


def flow_H(u, theta):
    """exp(-i theta H) u."""
    return u.with_coeffs(reduced_phase(theta, u.grid.basis.energies)[:, None] * u.coeffs)


def flow_y(u, t):
    """exp(i (t/2) d_y^2) u."""
    return u.with_coeffs(reduced_phase(0.5 * t, u.grid.xi ** 2)[None, :] * u.coeffs)


def shifted_overlap(basis, a):
    """Quadrature overlaps D[m, n] = <chi_m, chi_n(. + a)> on the basis nodes."""
    x = basis.nodes
    shifted = eval_chi(x + a, basis.b, basis.n_modes)
    return basis.table.T @ (basis.weights[:, None] * shifted)


class ShiftWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class DisplacementTable:
    grid: object
    eps: float
    shifts: np.ndarray       # a_k = eps xi_k / b
    D: np.ndarray            # (N_y, N_h, N_h); D[k][:, n] ~ coefficients of chi_n(. + a_k)
    levels: np.ndarray       # (N_y, N_h) Galerkin eigenvalues (-> E_n for resolved modes)
    leakage: np.ndarray      # (N_y, 2) mass of the top two shifted modes lost from the span
    flagged: bool

    def orthogonality_defect(self):
        eye = np.eye(self.D.shape[1])
        return float(max(np.abs(d.T @ d - eye).max() for d in self.D))


def build_displacement(grid, eps, leak_tol=1e-8, warn=False):
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    basis = grid.basis
    mats = heps_matrices(grid, eps)
    levels, vecs = np.linalg.eigh(mats)
    shifts = eps * grid.xi / grid.b
    D = np.empty_like(vecs)
    leakage = np.zeros((grid.N_y, 2))
    top = [basis.n_modes - 1, max(basis.n_modes - 2, 0)]
    for k in range(grid.N_y):
        if shifts[k] == 0.0:
            D[k] = np.eye(basis.n_modes)
            levels[k] = basis.energies
            continue
        ov = shifted_overlap(basis, shifts[k])
        signs = np.sign(np.sum(vecs[k] * ov, axis=0))
        signs[signs == 0] = 1.0
        D[k] = vecs[k] * signs
        leakage[k] = 1.0 - np.sum(ov[:, top] ** 2, axis=0)
    flagged = bool(np.abs(leakage).max() > leak_tol)
    if flagged and warn:
        warnings.warn(
            f"shift up to {np.abs(shifts).max():.3g} leaks {np.abs(leakage).max():.2e} of the top "
            f"modes outside the {basis.n_modes}-mode span", ShiftWarning, stacklevel=2)
    for arr in (shifts, D, levels, leakage):
        arr.setflags(write=False)
    return DisplacementTable(grid, float(eps), shifts, D, levels, leakage, flagged)


def flow_full_linear(u, t, eps, table):
    """exp(-i t H_eps / eps^2) u, column by column via the displacement table."""
    if table.grid is not u.grid and table.grid != u.grid:
        raise ValueError("displacement table was built for a different grid")
    if table.eps != eps:
        raise ValueError(f"displacement table was built for eps={table.eps}, not {eps}")
    phases = reduced_phase(t / eps ** 2, table.levels.reshape(-1)).reshape(table.levels.shape)
    return u.with_coeffs(_kernels.propagate_columns(table.D, phases, u.coeffs))
