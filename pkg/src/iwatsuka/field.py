"""Hermite x Fourier representation of psi(x, y).

    psi(x, y) = sum_{n,k} c[n, k] chi_n(x) exp(i xi_k y) / sqrt(2 L_y)

on the periodic box y in [-L_y, L_y).  Coefficient columns are stored in
FFT order (k = 0, 1, ..., N_y/2-1, -N_y/2, ..., -1).  The Nyquist column is
kept as a Galerkin mode but gets xi = 0 in every derivative-type operator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels
from .coupling import as_coupling
from .hermite import HermiteBasis, coupling_matrix, eval_chi, scaled_rule


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NonlinearGrid:
    """Physical grid used for pointwise products of order 2*sigma + 1."""
    sigma: int
    x: np.ndarray        # x quadrature nodes, weight exp(-(sigma+1) b x^2)
    w: np.ndarray        # envelope-absorbed weights
    table: np.ndarray    # chi_n(x_j), (n_x, N_h)
    y: np.ndarray        # padded y collocation points in FFT order
    n_y: int             # padded size


@dataclass(frozen=True, eq=False)
class Grid:
    basis: HermiteBasis
    L_y: float = 16.0
    N_y: int = 64
    _cache: dict = dc_field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.N_y < 4 or self.N_y % 2:
            raise ValueError(f"N_y must be even and >= 4, got {self.N_y}")
        if not self.L_y > 0:
            raise ValueError(f"L_y must be positive, got {self.L_y}")
        k = np.fft.fftfreq(self.N_y, 1.0 / self.N_y)
        xi = (math.pi / self.L_y) * k
        xi[self.N_y // 2] = 0.0  # Nyquist column: no derivative action
        xi.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "k", k.astype(int))
        object.__setattr__(self, "xi", xi)

    @property
    def b(self):
        return self.basis.b

    @property
    def N_h(self):
        return self.basis.n_modes

    @property
    def shape(self):
        return (self.basis.n_modes, self.N_y)

    @property
    def y(self):
        """Collocation points of the unpadded y grid, FFT order."""
        return self.y_points(self.N_y)

    def y_points(self, n):
        return (2.0 * self.L_y / n) * np.fft.fftfreq(n, 1.0 / n)

    def key(self):
        return (self.basis.key(), float(self.L_y), int(self.N_y))

    def __eq__(self, other):
        return isinstance(other, Grid) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    @property
    def x_matrix(self):
        if "X" not in self._cache:
            X = coupling_matrix(self.N_h, self.b)
            X.setflags(write=False)
            self._cache["X"] = X
        return self._cache["X"]

    def nonlinear_grid(self, sigma):
        """Alias-free grid for products of 2*sigma + 2 fields (incl. the test function)."""
        sigma = int(sigma)
        key = ("nl", sigma)
        if key not in self._cache:
            n_x = (sigma + 1) * self.N_h + 1
            x, w = scaled_rule(n_x, self.b, alpha=sigma + 1)
            table = eval_chi(x, self.b, self.N_h)
            n_y = (sigma + 1) * self.N_y
            y = self.y_points(n_y)
            for arr in (x, w, table, y):
                arr.setflags(write=False)
            self._cache[key] = NonlinearGrid(sigma, x, w, table, y, n_y)
        return self._cache[key]

    def coupling_on_grid(self, lam, x_scale, sigma):
        """lambda(x_scale * x, y) sampled on the nonlinear grid (cached)."""
        lam = as_coupling(lam)
        key = ("lam", str(lam), float(x_scale), int(sigma))
        if key not in self._cache:
            g = self.nonlinear_grid(sigma)
            vals = lam(x_scale * g.x[:, None], g.y[None, :])
            vals = np.broadcast_to(np.asarray(vals, dtype=float), (g.x.size, g.n_y)).copy()
            if not np.all(np.isfinite(vals)):
                raise FloatingPointError(f"coupling {lam} is not finite on the grid")
            vals.setflags(write=False)
            self._cache[key] = vals
        return self._cache[key]


def make_grid(b=1.0, N_h=32, N_y=64, L_y=16.0, n_quad=None):
    from .hermite import build_basis
    return Grid(build_basis(b, N_h, n_quad), float(L_y), int(N_y))


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def _check(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.grid is not self.grid and other.grid != self.grid:
            raise GridMismatch("fields live on different grids")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField):
            return NotImplemented
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def with_coeffs(self, coeffs):
        return SpectralField(self.grid, coeffs)


def zeros(grid):
    return SpectralField(grid, np.zeros(grid.shape, dtype=complex))


def basis_field(grid, n, k=0, amplitude=1.0):
    """chi_n(x) exp(i xi_k y)/sqrt(2 L_y) times ``amplitude``; k is the signed mode number."""
    c = np.zeros(grid.shape, dtype=complex)
    c[n, k % grid.N_y] = amplitude
    return SpectralField(grid, c)


def y_transform(values, grid):
    """Samples on the unpadded y grid (last axis) -> Fourier coefficients."""
    return np.fft.fft(values, axis=-1) * (math.sqrt(2.0 * grid.L_y) / grid.N_y)


def from_profile(grid, profile, n=0, oversample=4):
    """Field alpha(y) chi_n(x); ``profile`` is a callable of y.

    The profile is sampled on an ``oversample``-times finer grid before
    truncating, so high-frequency content folds less into the kept modes.
    """
    m = oversample * grid.N_y
    vals = np.asarray(profile(grid.y_points(m)), dtype=complex)
    spec = np.fft.fft(vals) * (math.sqrt(2.0 * grid.L_y) / m)
    c = np.zeros(grid.shape, dtype=complex)
    c[n] = _truncate_y(spec, grid.N_y)
    return SpectralField(grid, c)


# -- norms --------------------------------------------------------------------

def _same_grid(u, v):
    if u.grid is not v.grid and u.grid != v.grid:
        raise GridMismatch("fields live on different grids")


def inner(u, v):
    """<u, v> = sum c_u conj(c_v)  (linear in the first slot)."""
    _same_grid(u, v)
    return complex(np.vdot(v.coeffs, u.coeffs))


def l2_norm(u):
    return float(np.linalg.norm(u.coeffs))


def mode_masses(u):
    return np.sum(np.abs(u.coeffs) ** 2, axis=1)


def sigma_norm(u, m):
    if m < 0:
        raise ValueError("m must be >= 0")
    if m == 0:
        return l2_norm(u)
    E = u.grid.basis.energies
    xi = u.grid.xi
    w = 1.0 + E[:, None] ** m + xi[None, :] ** (2 * m)
    return float(np.sqrt(np.sum(w * np.abs(u.coeffs) ** 2)))


def sigma_eps_norm(u, m, eps, clamp=1e-12):
    if m < 0:
        raise ValueError("m must be >= 0")
    if m == 0:
        return l2_norm(u)
    half = m // 2
    v = u
    for _ in range(half):
        v = apply_Heps(v, eps)
    if m % 2 == 0:
        h_part = l2_norm(v) ** 2
    else:
        h_part = inner(apply_Heps(v, eps), v).real
        scale = max(l2_norm(u) ** 2, 1e-300)
        if h_part < 0:
            if h_part < -clamp * scale:
                raise FloatingPointError(f"negative quadratic form {h_part:.3e} for H_eps^{m}")
            h_part = 0.0
    dy = np.sum(u.grid.xi[None, :] ** (2 * m) * np.abs(u.coeffs) ** 2)
    return float(np.sqrt(l2_norm(u) ** 2 + h_part + dy))


# -- linear operators ---------------------------------------------------------

def apply_H(u):
    return u.with_coeffs(u.grid.basis.energies[:, None] * u.coeffs)


def apply_dy(u):
    return u.with_coeffs(1j * u.grid.xi[None, :] * u.coeffs)


def apply_x(u):
    """Truncated multiplication by x; the coupling out of row N_h-1 is dropped."""
    return u.with_coeffs(u.grid.x_matrix @ u.coeffs)


def apply_Heps(u, eps):
    """H - i eps b x d_y - (eps^2/2) d_y^2."""
    b = u.grid.b
    xi = u.grid.xi[None, :]
    c = (u.grid.basis.energies[:, None] * u.coeffs
         + eps * b * xi * (u.grid.x_matrix @ u.coeffs)
         + 0.5 * eps ** 2 * xi ** 2 * u.coeffs)
    return u.with_coeffs(c)


def heps_matrices(grid, eps):
    """Per-column Galerkin matrices of H_eps, shape (N_y, N_h, N_h)."""
    E = np.diag(grid.basis.energies)
    X = grid.x_matrix
    xi = grid.xi
    return (E[None] + eps * grid.b * xi[:, None, None] * X[None]
            + 0.5 * eps ** 2 * (xi ** 2)[:, None, None] * np.eye(grid.N_h)[None])


def project_Pn(u, n):
    if not 0 <= n < u.grid.N_h:
        raise IndexError(f"mode {n} outside 0..{u.grid.N_h - 1}")
    c = np.zeros_like(u.coeffs)
    c[n] = u.coeffs[n]
    return u.with_coeffs(c)


def project_Pn_perp(u, n):
    if not 0 <= n < u.grid.N_h:
        raise IndexError(f"mode {n} outside 0..{u.grid.N_h - 1}")
    c = np.array(u.coeffs)
    c[n] = 0.0
    return u.with_coeffs(c)


# -- transforms to the physical nonlinear grid ----------------------------------

def _pad_y(c, n_pad):
    n = c.shape[-1]
    out = np.zeros(c.shape[:-1] + (n_pad,), dtype=complex)
    h = n // 2
    out[..., :h] = c[..., :h]
    out[..., n_pad - h:] = c[..., h:]
    return out


def _truncate_y(c, n):
    h = n // 2
    return np.concatenate([c[..., :h], c[..., c.shape[-1] - h:]], axis=-1)


def y_synth_padded(coeffs, grid, n_pad):
    """(..., N_y) coefficients -> (..., n_pad) values of sum_k c_k e^{i xi_k y}/sqrt(2L)."""
    return np.fft.ifft(_pad_y(coeffs, n_pad), axis=-1) * (n_pad / math.sqrt(2.0 * grid.L_y))


def y_project_padded(values, grid):
    n_pad = values.shape[-1]
    spec = np.fft.fft(values, axis=-1) * (math.sqrt(2.0 * grid.L_y) / n_pad)
    return _truncate_y(spec, grid.N_y)


def to_physical(u, sigma):
    """Values of u on the nonlinear grid, shape (n_x, n_y_padded)."""
    g = u.grid.nonlinear_grid(sigma)
    return y_synth_padded(g.table @ u.coeffs, u.grid, g.n_y)


def from_physical(values, grid, sigma):
    g = grid.nonlinear_grid(sigma)
    spec = y_project_padded(values, grid)
    return SpectralField(grid, g.table.T @ (g.w[:, None] * spec))


def pointwise_nonlin(u, sigma, lam=1.0, x_scale=0.0):
    """Galerkin projection of lambda(x_scale x, y) |u|^(2 sigma) u."""
    if int(sigma) != sigma or sigma < 1:
        raise ValueError(f"sigma must be a positive integer, got {sigma}")
    sigma = int(sigma)
    lam_grid = u.grid.coupling_on_grid(lam, x_scale, sigma)
    vals = _kernels.power_nonlin(to_physical(u, sigma), lam_grid, sigma)
    return from_physical(vals, u.grid, sigma)


def random_field(grid, rng, max_mode=None, xi_free=False):
    """Seeded random field with c ~ exp(-n/4) exp(-|k|/8) * unit phase, unit L2 norm."""
    n = np.arange(grid.N_h)[:, None]
    k = np.abs(grid.k)[None, :]
    amp = np.exp(-n / 4.0) * np.exp(-k / 8.0)
    mag = rng.uniform(0.5, 1.0, size=grid.shape)
    phase = np.exp(2j * math.pi * rng.uniform(size=grid.shape))
    c = amp * mag * phase
    if max_mode is not None:
        c[max_mode + 1:] = 0.0
    if xi_free:
        c[:, 1:] = 0.0
    c /= np.linalg.norm(c)
    return SpectralField(grid, c)
