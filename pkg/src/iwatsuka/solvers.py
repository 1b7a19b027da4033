"""Time integrators for the full eps-model, its filtered view, and the
averaged effective model; plus the closed-form polarized solution."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .averaging import F_av, default_rule
from .coupling import CouplingExpr, as_coupling
from .field import Grid, SpectralField, from_physical, from_profile, to_physical
from .hermite import chi_norm_pow
from .propagators import build_displacement, flow_full_linear, flow_H


class NumericalAbort(FloatingPointError):
    def __init__(self, step, message="non-finite values"):
        super().__init__(f"{message} at step {step}")
        self.step = step


@dataclass(frozen=True)
class ModelParams:
    grid: Grid
    sigma: int = 1
    lam: CouplingExpr = None
    eps: float | None = None

    def __post_init__(self):
        if int(self.sigma) != self.sigma or self.sigma < 1:
            raise ValueError(f"sigma must be a positive integer, got {self.sigma}")
        object.__setattr__(self, "sigma", int(self.sigma))
        object.__setattr__(self, "lam", as_coupling(1.0 if self.lam is None else self.lam))
        if self.eps is not None and not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    @property
    def b(self):
        return self.grid.b

    def replace(self, **kw):
        d = dict(grid=self.grid, sigma=self.sigma, lam=self.lam, eps=self.eps)
        d.update(kw)
        return ModelParams(**d)


class Trajectory:
    """Time samples of fields on one grid, with mass and Sigma^2 diagnostics."""

    def __init__(self, grid, times, coeffs):
        times = np.asarray(times, dtype=float)
        coeffs = np.asarray(coeffs, dtype=complex)
        if times.ndim != 1 or coeffs.shape != (times.size,) + grid.shape:
            raise ValueError("times and coefficient stack do not match")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        times.setflags(write=False)
        coeffs.setflags(write=False)
        self.grid = grid
        self.times = times
        self.coeffs = coeffs
        self.mass = np.sum(np.abs(coeffs) ** 2, axis=(1, 2))
        E = grid.basis.energies
        w2 = 1.0 + E[:, None] ** 2 + grid.xi[None, :] ** 4
        self.sigma2 = np.sqrt(np.sum(w2 * np.abs(coeffs) ** 2, axis=(1, 2)))

    def __len__(self):
        return self.times.size

    def __getitem__(self, i):
        return SpectralField(self.grid, self.coeffs[i])

    @property
    def fields(self):
        return [self[i] for i in range(len(self))]

    @property
    def final(self):
        return self[-1]

    def mass_drift(self):
        return float(np.max(np.abs(self.mass - self.mass[0])) / self.mass[0])

    def mode_masses(self, n_max=8):
        return np.sum(np.abs(self.coeffs[:, :n_max]) ** 2, axis=2)


def _n_steps(T, dt):
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return n


def _check_finite(c, step):
    if not np.all(np.isfinite(c)):
        raise NumericalAbort(step)


def nonlinear_substep(u, tau, sigma, lam_grid):
    """Exact pointwise flow of i d_t psi = lam |psi|^{2 sigma} psi over time tau."""
    vals = _kernels.phase_rotate(to_physical(u, sigma), lam_grid, tau, sigma)
    return from_physical(vals, u.grid, sigma)


def midpoint_substep(u, tau, sigma, lam_grid, tol=1e-14, max_iter=50):
    """Implicit midpoint for the Galerkin-projected i d_t c = P(lam |psi|^{2 sigma} psi).

    Mass is a quadratic invariant of the projected flow, which the implicit
    midpoint rule preserves exactly; the fixed-point iteration is solved to ``tol``.
    """
    grid = u.grid
    c0 = u.coeffs
    scale = max(np.linalg.norm(c0), 1e-300)

    def rhs(c):
        vals = _kernels.power_nonlin(to_physical(SpectralField(grid, c), sigma), lam_grid, sigma)
        return -1j * from_physical(vals, grid, sigma).coeffs

    c1 = c0 + tau * rhs(c0)
    for _ in range(max_iter):
        c_next = c0 + tau * rhs(0.5 * (c0 + c1))
        delta = np.linalg.norm(c_next - c1)
        c1 = c_next
        if delta <= tol * scale:
            return SpectralField(grid, c1)
    raise NumericalAbort(-1, f"implicit midpoint did not converge (last update {delta:.2e})")


NONLINEAR_STEPS = {"midpoint": midpoint_substep, "phase": nonlinear_substep}


def solve_full(params, psi0, T, dt, out_every=1, table=None, nonlinear="midpoint"):
    """Strang splitting for the full model: half nonlinear, exact linear, half nonlinear.

    ``nonlinear`` selects the nonlinear half-step: "phase" is the pointwise
    exact flow psi -> exp(-i tau lam |psi|^{2 sigma}) psi re-projected onto the
    basis (mass leaks with whatever the product pushes past the truncation);
    "midpoint" integrates the projected flow and keeps the mass exactly.
    """
    if params.eps is None:
        raise ValueError("full model needs eps")
    if not dt > 0 or not T > 0:
        raise ValueError("T and dt must be positive")
    grid = psi0.grid
    eps = params.eps
    n = _n_steps(T, dt)
    if table is None:
        table = build_displacement(grid, eps)
    substep = NONLINEAR_STEPS[nonlinear]
    linear_only = params.lam.is_zero
    lam_grid = None if linear_only else grid.coupling_on_grid(params.lam, eps, params.sigma)
    u = psi0
    times, snaps = [0.0], [psi0.coeffs]
    for step in range(1, n + 1):
        if not linear_only:
            u = substep(u, 0.5 * dt, params.sigma, lam_grid)
        u = flow_full_linear(u, dt, eps, table)
        if not linear_only:
            u = substep(u, 0.5 * dt, params.sigma, lam_grid)
        if step % out_every == 0 or step == n:
            _check_finite(u.coeffs, step)
            times.append(step * dt)
            snaps.append(u.coeffs)
    return Trajectory(grid, times, np.array(snaps))


def filter_trajectory(traj, eps, b=None):
    """phi^eps(t) = e^{i t H / eps^2} psi^eps(t) for every sample."""
    if b is not None and b != traj.grid.b:
        raise ValueError("b does not match the trajectory grid")
    out = np.array([flow_H(traj[i], -t / eps ** 2).coeffs for i, t in enumerate(traj.times)])
    return Trajectory(traj.grid, traj.times, out)


def unfilter_trajectory(traj, eps):
    out = np.array([flow_H(traj[i], t / eps ** 2).coeffs for i, t in enumerate(traj.times)])
    return Trajectory(traj.grid, traj.times, out)


def effective_rhs(u, params, rule):
    """-i lambda(0, y) F_av(u)."""
    return -1j * F_av(u, params.sigma, params.lam, 0.0, rule).coeffs


def solve_effective(params, psi0, T, dt, rule=None, out_every=1):
    """Classical RK4 for i d_t phi = lambda(0, y) F_av(phi)."""
    if not dt > 0 or not T > 0:
        raise ValueError("T and dt must be positive")
    grid = psi0.grid
    n = _n_steps(T, dt)
    times, snaps = [0.0], [psi0.coeffs]
    if params.lam.is_zero:
        for step in range(out_every, n + 1, out_every):
            times.append(step * dt)
            snaps.append(psi0.coeffs)
        if n % out_every:
            times.append(n * dt)
            snaps.append(psi0.coeffs)
        return Trajectory(grid, times, np.array(snaps))
    if rule is None:
        rule = default_rule(grid, params.sigma)

    def f(c):
        return effective_rhs(SpectralField(grid, c), params, rule)

    c = np.array(psi0.coeffs)
    for step in range(1, n + 1):
        k1 = f(c)
        k2 = f(c + 0.5 * dt * k1)
        k3 = f(c + 0.5 * dt * k2)
        k4 = f(c + dt * k3)
        c = c + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if step % out_every == 0 or step == n:
            _check_finite(c, step)
            times.append(step * dt)
            snaps.append(c.copy())
    return Trajectory(grid, times, np.array(snaps))


def polarized_frequency(alpha0_vals, y, n, params):
    """omega_n(y) = lambda(0, y) |alpha_0(y)|^{2 sigma} ||chi_n||_{2 sigma + 2}^{2 sigma + 2}."""
    lam0 = params.lam(0.0, y)
    norm = chi_norm_pow(n, 2 * params.sigma + 2, params.grid.basis)
    return lam0 * np.abs(alpha0_vals) ** (2 * params.sigma) * norm


def polarized_exact(alpha0, n, t, params, oversample=4):
    """Closed-form effective solution alpha_0(y) chi_n(x) e^{-i t omega_n(y)}, projected."""
    grid = params.grid
    if not 0 <= n < grid.N_h:
        raise IndexError(f"mode {n} outside 0..{grid.N_h - 1}")

    def profile(y):
        a = np.asarray(alpha0(y), dtype=complex) * np.ones_like(y)
        return a * np.exp(-1j * t * polarized_frequency(a, y, n, params))

    return from_profile(grid, profile, n, oversample)


def compare_to_effective(full_traj, eff_traj, eps, b=None):
    """max_t || e^{i t H/eps^2} psi^eps(t) - phi(t) ||_{L2} over the shared samples."""
    if full_traj.grid != eff_traj.grid:
        raise ValueError("trajectories live on different grids")
    if full_traj.times.shape != eff_traj.times.shape or not np.allclose(
            full_traj.times, eff_traj.times, rtol=0, atol=1e-12):
        raise ValueError("trajectories are sampled at different times")
    filt = filter_trajectory(full_traj, eps, b)
    return float(np.max(np.linalg.norm((filt.coeffs - eff_traj.coeffs).reshape(len(filt), -1), axis=1)))


def strang_linear_oracle(u, t, eps, dt):
    """Independent check of exp(-i t H_eps/eps^2): Strang splitting of the diagonal
    oscillator part against the per-column coupling part, each exponentiated directly."""
    from scipy.linalg import expm
    grid = u.grid
    n = _n_steps(t, dt)
    E = grid.basis.energies
    half = np.exp(-0.5j * dt * E / eps ** 2)[:, None]
    X = grid.x_matrix
    cols = []
    for xi in grid.xi:
        A = (grid.b * xi / eps) * X + 0.5 * xi ** 2 * np.eye(grid.N_h)
        cols.append(expm(-1j * dt * A))
    K = np.array(cols)
    c = np.array(u.coeffs)
    for _ in range(n):
        c = half * c
        c = np.einsum("kmn,nk->mk", K, c)
        c = half * c
    return u.with_coeffs(c)
