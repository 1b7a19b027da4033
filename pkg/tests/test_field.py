import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial.hermite import hermgauss

from iwatsuka import make_grid
from iwatsuka.field import (GridMismatch, SpectralField, apply_dy, apply_H, apply_Heps, apply_x,
                            basis_field, from_profile, heps_matrices, inner,
                            l2_norm, mode_masses, pointwise_nonlin, project_Pn, project_Pn_perp,
                            random_field, sigma_eps_norm, sigma_norm, y_synth_padded,
                            zeros)
from iwatsuka.harness import ensemble, multiplier_constant, sandwich_ratios

from test_hermite import chi_explicit


def gaussian(y):
    return math.pi ** -0.25 * np.exp(-0.5 * y ** 2)


def test_grid_validation():
    with pytest.raises(ValueError):
        make_grid(1.0, 8, 15)
    with pytest.raises(ValueError):
        make_grid(1.0, 8, 2)
    with pytest.raises(ValueError):
        make_grid(1.0, 8, 16, 0.0)
    with pytest.raises(ValueError):
        make_grid(0.0, 8, 16)


def test_grid_wavenumbers(small_grid):
    g = small_grid
    assert g.shape == (8, 16)
    assert g.xi[1] == pytest.approx(math.pi / g.L_y)
    assert g.xi[g.N_y // 2] == 0.0
    assert g.xi[-1] == pytest.approx(-math.pi / g.L_y)


def test_field_shape_and_immutability(small_grid):
    with pytest.raises(ValueError):
        SpectralField(small_grid, np.zeros((8, 8)))
    u = zeros(small_grid)
    with pytest.raises(ValueError):
        u.coeffs[0, 0] = 1.0


def test_unit_coefficient_norm(small_grid):
    assert l2_norm(basis_field(small_grid, 3, -2)) == 1.0


def test_orthogonal_basis_fields(small_grid):
    assert inner(basis_field(small_grid, 0), basis_field(small_grid, 1)) == 0


def test_norm_homogeneity(rand_field):
    assert l2_norm(3 * rand_field) == pytest.approx(3 * l2_norm(rand_field), rel=1e-15)


def test_inner_is_linear_in_first_slot(grid16, rng):
    u, v = random_field(grid16, rng), random_field(grid16, rng)
    a = 0.3 - 1.2j
    assert inner(a * u, v) == pytest.approx(a * inner(u, v), rel=1e-14)
    assert inner(u, a * v) == pytest.approx(np.conj(a) * inner(u, v), rel=1e-14)
    assert inner(u, u).real == pytest.approx(l2_norm(u) ** 2, rel=1e-14)


def test_parseval_on_physical_grid(grid16, rng):
    u = random_field(grid16, rng)
    basis = grid16.basis
    vals = y_synth_padded(basis.synth(u.coeffs), grid16, grid16.N_y)
    dy = 2 * grid16.L_y / grid16.N_y
    phys = np.sum(basis.weights[:, None] * np.abs(vals) ** 2) * dy
    assert phys == pytest.approx(np.sum(np.abs(u.coeffs) ** 2), rel=1e-13)
    assert l2_norm(u) == pytest.approx(math.sqrt(np.sum(np.abs(u.coeffs) ** 2)), rel=1e-15)
    assert mode_masses(u).sum() == pytest.approx(l2_norm(u) ** 2, rel=1e-14)


def test_grid_mismatch(small_grid, grid16):
    with pytest.raises(GridMismatch):
        inner(zeros(small_grid), zeros(grid16))
    with pytest.raises(GridMismatch):
        zeros(small_grid) + zeros(grid16)


def test_equal_grids_interoperate(small_grid):
    other = make_grid(1.0, 8, 16, 8.0)
    assert other == small_grid and other is not small_grid
    assert l2_norm(basis_field(small_grid, 0) + basis_field(other, 0)) == 2.0


def test_apply_H_eigen(small_grid):
    u = basis_field(small_grid, 2)
    assert np.array_equal(apply_H(u).coeffs, 2.5 * u.coeffs)


def test_apply_dy_is_diagonal(small_grid):
    u = basis_field(small_grid, 0, 1)
    assert np.allclose(apply_dy(u).coeffs, 1j * small_grid.xi[1] * u.coeffs, atol=0)


def test_apply_x_on_ground_state(small_grid):
    out = apply_x(basis_field(small_grid, 0))
    expected = basis_field(small_grid, 1, amplitude=1 / math.sqrt(2))
    assert np.abs(out.coeffs - expected.coeffs).max() <= 1e-15


def test_heps_tiny_eps_matches_H(rand_field):
    assert np.array_equal(apply_Heps(rand_field, 1e-300).coeffs, apply_H(rand_field).coeffs)


def test_heps_matrices_agree_with_apply(rand_field):
    eps = 0.3
    mats = heps_matrices(rand_field.grid, eps)
    direct = np.einsum("kmn,nk->mk", mats, rand_field.coeffs)
    assert np.abs(direct - apply_Heps(rand_field, eps).coeffs).max() <= 1e-12


@pytest.mark.parametrize("eps", [0.1, 0.01])
def test_heps_self_adjoint(grid16, eps):
    rng = np.random.default_rng(5)
    for _ in range(10):
        u, v = random_field(grid16, rng), random_field(grid16, rng)
        assert abs(inner(apply_Heps(u, eps), u).imag) <= 1e-10 * l2_norm(u) ** 2
        assert inner(apply_Heps(u, eps), v) == pytest.approx(inner(u, apply_Heps(v, eps)),
                                                             abs=1e-12)


def test_sigma_norm_gaussian_example():
    grid = make_grid(1.0, 8, 64, 16.0)
    u = from_profile(grid, gaussian, 0)
    assert l2_norm(u) == pytest.approx(1.0, abs=1e-12)
    assert sigma_norm(u, 1) == pytest.approx(math.sqrt(2.0), abs=1e-10)


def test_sigma_norms_at_m_zero(rand_field):
    assert sigma_norm(rand_field, 0) == l2_norm(rand_field)
    assert sigma_eps_norm(rand_field, 0, 0.1) == l2_norm(rand_field)
    with pytest.raises(ValueError):
        sigma_norm(rand_field, -1)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_sigma_eps_norm_without_y_dependence(grid16, m):
    u = random_field(grid16, np.random.default_rng(m), xi_free=True)
    for eps in (0.01, 0.5, 1.0):
        assert sigma_eps_norm(u, m, eps) == pytest.approx(sigma_norm(u, m), rel=1e-13)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_sigma_eps_norm_tends_to_sigma_norm(rand_field, m):
    assert sigma_eps_norm(rand_field, m, 1e-9) == pytest.approx(sigma_norm(rand_field, m), rel=1e-8)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), m=st.integers(1, 3), eps=st.floats(1e-4, 0.1))
def test_norm_equivalence_small_eps(grid16, seed, m, eps):
    fields = ensemble(grid16, 5, seed)
    r = sandwich_ratios(fields, m, eps)
    assert np.all((r >= 0.5) & (r <= 2.0))


def test_multiplier_constant_is_moderate(grid16):
    fields = ensemble(grid16, 20, 3)
    for m in (0, 1, 2):
        c = multiplier_constant(fields, m)
        assert 0 < c < 3


def test_projectors(rand_field):
    p, q = project_Pn(rand_field, 2), project_Pn_perp(rand_field, 2)
    assert np.array_equal((p + q).coeffs, rand_field.coeffs)
    assert inner(p, q) == 0
    with pytest.raises(IndexError):
        project_Pn(rand_field, rand_field.grid.N_h)


def _nonlin_oracle(u, sigma, lam_fn, x_scale):
    """Brute-force Galerkin projection of lam |u|^{2 sigma} u with independent quadrature."""
    g = u.grid
    b = g.b
    t, w = hermgauss(90)
    x = t / math.sqrt((sigma + 1) * b)
    W = w * np.exp(t ** 2) / math.sqrt((sigma + 1) * b)
    chi = np.stack([chi_explicit(n, x, b) for n in range(g.N_h)], axis=1)
    M = 4 * g.N_y
    y = -g.L_y + 2 * g.L_y * np.arange(M) / M
    kk = np.fft.fftfreq(g.N_y, 1.0 / g.N_y)
    ey = np.exp(1j * np.outer(math.pi * kk / g.L_y, y)) / math.sqrt(2 * g.L_y)   # (N_y, M)
    vals = chi @ u.coeffs @ ey
    f = lam_fn(x_scale * x[:, None], y[None, :]) * np.abs(vals) ** (2 * sigma) * vals
    return (chi.T * W) @ f @ ey.conj().T * (2 * g.L_y / M)


@pytest.mark.parametrize("sigma,lam,fn,x_scale", [
    (1, 1.0, lambda x, y: np.ones_like(x * y), 0.0),
    (1, "2+x^2", lambda x, y: (2 + x ** 2) * np.ones_like(y), 0.3),
    (2, 1.5, lambda x, y: 1.5 * np.ones_like(x * y), 0.0),
])
def test_pointwise_nonlin_against_brute_force(small_grid, sigma, lam, fn, x_scale):
    u = random_field(small_grid, np.random.default_rng(11))
    got = pointwise_nonlin(u, sigma, lam, x_scale).coeffs
    ref = _nonlin_oracle(u, sigma, fn, x_scale)
    assert np.abs(got - ref).max() <= 1e-12


def test_pointwise_nonlin_ground_state():
    grid = make_grid(1.0, 8, 16, 8.0)
    u = basis_field(grid, 0)
    out = pointwise_nonlin(u, 1)
    # |u|^2 = chi_0^2 / (2 L_y), so the chi_0 coefficient is ||chi_0||_4^4 / (2 L_y)
    assert out.coeffs[0, 0] == pytest.approx(0.3989422804014327 / (2 * grid.L_y), abs=1e-15)


def test_pointwise_nonlin_trivial_cases(rand_field, small_grid):
    assert np.all(pointwise_nonlin(zeros(small_grid), 1).coeffs == 0)
    assert np.all(pointwise_nonlin(rand_field, 1, "0").coeffs == 0)
    with pytest.raises(ValueError):
        pointwise_nonlin(rand_field, 0)


def test_pointwise_nonlin_is_mass_neutral(rand_field):
    # <P(lam |u|^2 u), u> is real for real lam
    assert abs(inner(pointwise_nonlin(rand_field, 1, "tanh(y)+2"), rand_field).imag) <= 1e-15


def test_random_field_seeded(grid16):
    a = random_field(grid16, np.random.default_rng(9))
    b = random_field(grid16, np.random.default_rng(9))
    assert np.array_equal(a.coeffs, b.coeffs)
    assert l2_norm(a) == pytest.approx(1.0, abs=1e-15)
    c = random_field(grid16, np.random.default_rng(9), max_mode=3)
    assert np.all(c.coeffs[4:] == 0)
