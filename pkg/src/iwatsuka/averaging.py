"""Oscillatory maps F(theta, u), G(theta, u), their period averages, and the
antiderivative of G used by the singular-term identity check."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.integrate import cumulative_simpson, simpson

from . import _kernels
from .field import (SpectralField, apply_x, pointwise_nonlin, y_project_padded,
                    y_synth_padded)
from .propagators import flow_H


class CoarseRuleError(ValueError):
    pass


@dataclass(frozen=True)
class ThetaRule:
    """Uniform trapezoid rule on one period [0, 2 pi / b)."""
    n_nodes: int
    b: float

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError("a theta rule needs at least 2 nodes")
        if not self.b > 0:
            raise ValueError("b must be positive")

    @property
    def period(self):
        return 2.0 * math.pi / self.b

    @property
    def nodes(self):
        return np.arange(self.n_nodes) * (self.period / self.n_nodes)

    @property
    def weights(self):
        return np.full(self.n_nodes, self.period / self.n_nodes)


def min_nodes_F(grid, sigma):
    """Fewest trapezoid nodes that average F exactly.

    The integrand e^{i theta E_m} (...) has theta-frequencies (in units of b)
    within +-(sigma+1)(N_h-1); an N-node trapezoid rule only aliases
    frequencies that are nonzero multiples of N onto the mean.
    """
    return (int(sigma) + 1) * (grid.N_h - 1) + 1


def default_rule(grid, sigma):
    return ThetaRule(max(2, sfft.next_fast_len(min_nodes_F(grid, sigma))), grid.b)


def _check_rule(rule, grid, min_nodes):
    if rule.b != grid.b:
        raise ValueError(f"theta rule built for b={rule.b}, grid has b={grid.b}")
    if rule.n_nodes < min_nodes:
        raise CoarseRuleError(
            f"theta rule with {rule.n_nodes} nodes is too coarse; need >= {min_nodes}")


# below this many modes a dense DFT beats strided FFTs of short length
_DENSE_DFT_MAX_MODES = 16


def _dense_operators(grid, sigma, n_nodes):
    """DFT-in-theta fused with the x synthesis / projection tables.

    fwd[(j, x), n] = e^{-2 pi i j n/N} chi_n(x_j)
    bwd[m, (j, x)] = e^{+2 pi i j m/N} w_x chi_m(x) / N
    """
    key = ("dense_av", int(sigma), int(n_nodes))
    if key not in grid._cache:
        g = grid.nonlinear_grid(sigma)
        jn = np.outer(np.arange(n_nodes), np.arange(grid.N_h))
        dft = np.exp(-2j * math.pi * jn / n_nodes)                   # (N, N_h)
        fwd = (dft[:, None, :] * g.table[None, :, :]).reshape(-1, grid.N_h)
        bwd = (dft.conj().T[:, :, None] * (g.w[:, None] * g.table).T[:, None, :]) / n_nodes
        grid._cache[key] = (fwd, bwd.reshape(grid.N_h, -1))
    return grid._cache[key]


def F_theta(theta, u, sigma, lam=1.0, x_scale=0.0):
    """e^{i theta H}( lam |e^{-i theta H} u|^{2 sigma} e^{-i theta H} u )."""
    return flow_H(pointwise_nonlin(flow_H(u, theta), sigma, lam, x_scale), -theta)


def F_av(u, sigma, lam=1.0, x_scale=0.0, rule=None):
    """Period average of F_theta, exact for rules finer than the integrand's bandwidth.

    On the rule nodes theta_j = j (2 pi/b)/N the phases e^{-i theta_j E_n} are,
    up to the common factor e^{-i theta_j b/2} (which cancels), the DFT kernel
    e^{-2 pi i j n / N}.  The whole theta sweep is therefore one FFT in n out
    to the grid and one inverse FFT back.
    """
    grid = u.grid
    sigma = int(sigma)
    if rule is None:
        rule = default_rule(grid, sigma)
    _check_rule(rule, grid, min_nodes_F(grid, sigma))
    g = grid.nonlinear_grid(sigma)
    lam_grid = grid.coupling_on_grid(lam, x_scale, sigma)
    U = y_synth_padded(u.coeffs, grid, g.n_y)                 # (N_h, M)
    if grid.N_h <= _DENSE_DFT_MAX_MODES:
        fwd, bwd = _dense_operators(grid, sigma, rule.n_nodes)
        vals = (fwd @ U).reshape(rule.n_nodes, g.x.size, g.n_y)
        vals = _kernels.power_nonlin(vals, lam_grid[None], sigma)
        proj = bwd @ vals.reshape(-1, g.n_y)
    else:
        B = g.table.T[:, :, None] * U[:, None, :]               # (N_h, n_x, M)
        vals = sfft.fft(B, n=rule.n_nodes, axis=0)             # (N_theta, n_x, M)
        vals = _kernels.power_nonlin(vals, lam_grid[None], sigma)
        back = sfft.ifft(vals, axis=0)[: grid.N_h]             # (N_h, n_x, M)
        proj = np.einsum("x,xm,mxy->my", g.w, g.table, back)
    return SpectralField(grid, y_project_padded(proj, grid))


def F_av_direct(u, sigma, lam=1.0, x_scale=0.0, rule=None):
    """Same average, one F_theta evaluation per rule node (slow cross-check)."""
    if rule is None:
        rule = default_rule(u.grid, sigma)
    acc = np.zeros(u.grid.shape, dtype=complex)
    for theta, w in zip(rule.nodes, rule.weights):
        acc += w * F_theta(theta, u, sigma, lam, x_scale).coeffs
    return u.with_coeffs(acc / rule.period)


def G_theta(theta, u):
    """e^{i theta H}( x e^{-i theta H} u )."""
    return flow_H(apply_x(flow_H(u, theta)), -theta)


def G_av(u, rule):
    _check_rule(rule, u.grid, 2)
    acc = np.zeros(u.grid.shape, dtype=complex)
    for theta, w in zip(rule.nodes, rule.weights):
        acc += w * G_theta(theta, u).coeffs
    return u.with_coeffs(acc / rule.period)


def _split_x(grid):
    """Sub- and super-diagonal parts of the x coupling matrix."""
    X = grid.x_matrix
    return np.tril(X, -1), np.triu(X, 1)


def Gcal(theta, u, sub_rule=None):
    """Integral of G(tau, u) over tau in [0, theta].

    G's matrix elements carry the single phases e^{+-i tau b}, so the integral
    is closed form.  With ``sub_rule`` (a node count) the integral is instead
    done by composite trapezoid in tau, for cross-checking.
    """
    if sub_rule is not None:
        taus = np.linspace(0.0, theta, int(sub_rule) + 1)
        vals = np.array([G_theta(t, u).coeffs for t in taus])
        return u.with_coeffs(np.trapezoid(vals, taus, axis=0))
    b = u.grid.b
    lower, upper = _split_x(u.grid)
    up = (np.exp(1j * b * theta) - 1.0) / (1j * b)       # rows m = n + 1
    down = (np.exp(-1j * b * theta) - 1.0) / (-1j * b)   # rows m = n - 1
    return u.with_coeffs(up * (lower @ u.coeffs) + down * (upper @ u.coeffs))


def _filon_segments(times, samples, omega):
    """Per-segment integrals of e^{i omega s} v(s) ds, v piecewise linear through the samples."""
    s0 = times[:-1]
    h = np.diff(times)
    wh = omega * h
    e = np.exp(1j * wh)
    small = np.abs(wh) < 1e-3
    with np.errstate(divide="ignore", invalid="ignore"):
        i0 = np.where(small, h * (1 + 0.5j * wh - wh ** 2 / 6), (e - 1.0) / (1j * omega))
        i1 = np.where(small, h ** 2 * (0.5 + 1j * wh / 3 - wh ** 2 / 8),
                      h * e / (1j * omega) + (e - 1.0) / omega ** 2)
    base = np.exp(1j * np.fmod(omega * s0, 2 * math.pi))
    dv = (samples[1:] - samples[:-1]) / h[:, None, None]
    return (base * i0)[:, None, None] * samples[:-1] + (base * i1)[:, None, None] * dv


def identity_parts(times, coeffs, eps, grid, cumulative=False):
    """Both sides of the singular-term identity.

    lhs = -(i b/eps) int_0^t G(s/eps^2, d_y phi(s)) ds
    rhs = (1/2) int_0^t d_y^2 phi(s) ds

    The oscillatory side is integrated exactly against the piecewise-linear
    interpolant of d_y phi; the other side by Simpson's rule.  With
    ``cumulative`` both are returned at every sample time, else at the last.
    """
    b = grid.b
    xi = grid.xi[None, None, :]
    dy = 1j * xi * coeffs
    omega = b / eps ** 2
    lower, upper = _split_x(grid)
    plus = _filon_segments(times, dy, omega)     # multiplies rows m = n + 1
    minus = _filon_segments(times, dy, -omega)   # rows m = n - 1
    d2 = -(xi ** 2) * coeffs
    if cumulative:
        zero = np.zeros((1,) + grid.shape, dtype=complex)
        plus = np.concatenate([zero, np.cumsum(plus, axis=0)])
        minus = np.concatenate([zero, np.cumsum(minus, axis=0)])
        # cumulative_simpson is real-only
        rhs = 0.5 * (cumulative_simpson(d2.real, x=times, axis=0, initial=0)
                     + 1j * cumulative_simpson(d2.imag, x=times, axis=0, initial=0))
        lhs = -(1j * b / eps) * (np.einsum("mn,tnk->tmk", lower, plus)
                                  + np.einsum("mn,tnk->tmk", upper, minus))
        return lhs, rhs
    lhs = -(1j * b / eps) * (lower @ plus.sum(axis=0) + upper @ minus.sum(axis=0))
    rhs = 0.5 * simpson(d2, x=times, axis=0)
    return lhs, rhs


def identity_residual(traj, eps, b=None, min_per_period=8, mode="final"):
    """L2 norm of lhs - rhs of the singular-term identity.

    ``traj`` holds filtered samples phi^eps(s) starting at s = 0.  ``mode`` is
    "final" (value at the last sample) or "sup" (maximum over all samples).
    The final-time value carries a factor that oscillates with t b/eps^2, so
    rate studies at a fixed final time should prefer "sup".
    """
    grid = traj.grid
    if b is not None and b != grid.b:
        raise ValueError(f"b={b} does not match the trajectory grid (b={grid.b})")
    if mode not in ("final", "sup"):
        raise ValueError(f"mode must be 'final' or 'sup', got {mode!r}")
    times = np.asarray(traj.times, dtype=float)
    if times.size < 3:
        raise ValueError("identity residual needs at least 3 trajectory samples")
    fast_period = eps ** 2 * 2 * math.pi / grid.b
    if np.diff(times).max() > fast_period / min_per_period * (1 + 1e-9):
        raise ValueError(
            f"trajectory spacing {np.diff(times).max():.3g} under-resolves the fast period "
            f"{fast_period:.3g}; need >= {min_per_period} samples per period")
    coeffs = np.asarray(traj.coeffs)
    if mode == "final":
        lhs, rhs = identity_parts(times, coeffs, eps, grid)
        return float(np.linalg.norm(lhs - rhs))
    lhs, rhs = identity_parts(times, coeffs, eps, grid, cumulative=True)
    return float(np.max(np.linalg.norm((lhs - rhs).reshape(times.size, -1), axis=1)))
