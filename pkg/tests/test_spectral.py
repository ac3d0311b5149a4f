"""Grid, transform, multiplier, norm, and cutoff contracts."""

import math

import numpy as np
import pytest

from aknslab.profiles import gaussian, plane_wave, random_schwartz
from aknslab.spectral import (
    Cutoff,
    Field,
    Grid,
    SingularSymbolError,
    SpectralError,
    apply_multiplier,
    bump,
    dealiased_mul,
    derivative_symbol,
    fractional_symbol,
    inverse_shift_symbol,
    partition_constant,
    sobolev_norm,
    weighted_norm_sq,
)

from conftest import l2, rel_l2


class TestGrid:
    def test_lattice_shape(self, grid):
        assert grid.dx == 0.25
        assert grid.x[0] == -32.0
        assert np.isclose(grid.dxi, 2 * np.pi / 64.0)
        assert np.isclose(grid.xi[1], grid.dxi)

    def test_roundtrip(self, grid, small_gaussian):
        back = grid.ifft(grid.fft(small_gaussian.values))
        assert np.max(np.abs(back - small_gaussian.values)) < 1e-12 * 0.1

    def test_transform_matches_line_transform(self, grid):
        # e^{-x^2} has line transform e^{-xi^2/4}/sqrt(2)
        f = gaussian(grid, 1.0)
        coeffs = f.hat()
        expected = np.exp(-grid.xi**2 / 4.0) / math.sqrt(2.0)
        assert np.max(np.abs(coeffs - expected)) < 1e-12

    def test_points_must_be_power_of_two(self):
        with pytest.raises(SpectralError):
            Grid(10.0, 100)
        with pytest.raises(SpectralError):
            Grid(-1.0, 64)


class TestField:
    def test_plancherel(self, grid, small_gaussian):
        f = small_gaussian
        freq = weighted_norm_sq(f.hat(), grid.xi, grid.dxi, 0.0)
        assert abs(f.l2_norm() ** 2 - freq) <= 1e-12 * f.l2_norm() ** 2

    def test_boundary_decay_check(self, grid):
        ok = gaussian(grid, 0.1)
        ok.check_schwartz()
        flat = Field(grid, np.ones(grid.points))
        with pytest.raises(SpectralError):
            flat.check_schwartz()

    def test_conjugate_partner_signs(self, grid, small_gaussian):
        defo = gaussian(grid, 0.1, sign=+1)
        foc = gaussian(grid, 0.1, sign=-1)
        assert np.allclose(defo.r, np.conj(defo.values))
        assert np.allclose(foc.r, -np.conj(foc.values))


class TestMultipliers:
    def test_constant_mode(self, grid):
        f = plane_wave(grid, 1.0, 0.0)
        out = apply_multiplier(f, inverse_shift_symbol(2.0, -1))
        assert np.max(np.abs(out.values - 0.5)) < 1e-13

    def test_single_mode_symbol_value(self):
        g = Grid(8 * np.pi, 256)
        f = plane_wave(g, 1.0, 1.0)
        out = apply_multiplier(f, inverse_shift_symbol(2.0, +1))
        expected = f.values / (2.0 + 1.0j)
        assert np.max(np.abs(out.values - expected)) < 1e-13
        assert abs(np.abs(out.values[0]) - 1.0 / math.sqrt(5.0)) < 1e-13

    def test_identity_symbol(self, grid, rng):
        f = random_schwartz(grid, rng)
        out = apply_multiplier(f.values, lambda xi: np.ones_like(xi), grid)
        assert rel_l2(grid, out, f.values) < 1e-12

    def test_composition(self, grid, rng):
        f = random_schwartz(grid, rng)
        m1 = inverse_shift_symbol(4.0, -1)
        m2 = derivative_symbol(1)
        one = apply_multiplier(apply_multiplier(f.values, m1, grid), m2, grid)
        both = apply_multiplier(f.values, lambda xi: m1(xi) * m2(xi), grid)
        assert rel_l2(grid, one, both) < 1e-12

    def test_adjoint_convention(self, grid, rng):
        # <f, (k-d)^{-s} g> = <(k+d)^{-s} f, g> for the discrete pairing
        f = random_schwartz(grid, rng)
        g2 = random_schwartz(grid, rng)
        for sigma in (0.5, 0.25, 1.0):
            left = grid.integrate(np.conj(f.values) * apply_multiplier(
                g2.values, fractional_symbol(2.0, -1, sigma), grid))
            right = grid.integrate(np.conj(apply_multiplier(
                f.values, fractional_symbol(2.0, +1, sigma), grid)) * g2.values)
            assert abs(left - right) <= 1e-12 * abs(left)

    def test_branch_cut_convention(self):
        sym = fractional_symbol(1.0, -1, 0.5)
        val = sym(np.array([1.0]))[0]
        z = 1.0 - 1.0j
        expected = abs(z) ** -0.5 * np.exp(-0.5j * np.angle(z))
        assert abs(val - expected) < 1e-15

    def test_singular_symbol_rejected(self, grid, small_gaussian):
        with pytest.raises(SingularSymbolError):
            inverse_shift_symbol(0.0, -1)
        with pytest.raises(SingularSymbolError, match="xi = 0"):
            apply_multiplier(small_gaussian.values,
                             lambda xi: np.where(xi == 0, np.inf, 1.0 / np.maximum(np.abs(xi), 1e-30)),
                             grid)


class TestSobolevNorms:
    def test_zero_field(self, grid):
        assert sobolev_norm(Field(grid, np.zeros(grid.points)), -0.5) == 0.0

    def test_single_mode_half_value(self, grid):
        f = plane_wave(grid, 1.0, 0.0)
        f = Field(grid, f.values / f.l2_norm())
        assert abs(sobolev_norm(f, -0.5, 1.0) ** 2 - 0.5) < 1e-12

    def test_gaussian_l2(self, grid):
        f = gaussian(grid, 1.0)
        assert abs(sobolev_norm(f, 0.0, 3.0) ** 2 - math.sqrt(math.pi / 2)) < 1e-12

    def test_monotone_in_kappa_for_negative_sigma(self, grid, small_gaussian):
        values = [sobolev_norm(small_gaussian, -0.5, k) for k in (1.0, 2.0, 4.0, 8.0)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_kappa_gate(self, grid, small_gaussian):
        with pytest.raises(SpectralError):
            sobolev_norm(small_gaussian, -0.5, 0.5)

    def test_norm_equivalence_riemann_sum(self, grid, rng):
        # int_kappa^inf  k^{2(s-s')} ||q||_{H^{s'}_k}^2 dk/k  within x4 of ||q||_{H^s_kappa}^2
        f = random_schwartz(grid, rng, norm=0.3)
        s, sp = -0.25, -0.5
        karr = np.geomspace(1.0, 100.0, 600)
        vals = np.array([k ** (2 * (s - sp)) * sobolev_norm(f, sp, k) ** 2
                         for k in karr])
        riemann = float(np.trapezoid(vals, x=np.log(karr)))
        target = sobolev_norm(f, s, 1.0) ** 2
        assert target / 4.0 <= riemann <= 4.0 * target


class TestDealiasing:
    def test_matches_exact_product_of_bandlimited(self, grid):
        # factors supported on the lower half band multiply exactly
        rng = np.random.default_rng(7)
        coeffs = np.zeros(grid.points, dtype=complex)
        low = grid.points // 8
        coeffs[:low] = rng.standard_normal(low) + 1j * rng.standard_normal(low)
        coeffs[-low:] = rng.standard_normal(low) + 1j * rng.standard_normal(low)
        a = np.fft.ifft(coeffs)
        direct = a * a
        assert rel_l2(grid, dealiased_mul(a, a), direct) < 1e-12

    def test_kills_aliasing_of_full_band_product(self, grid):
        rng = np.random.default_rng(8)
        coeffs = rng.standard_normal(grid.points) + 1j * rng.standard_normal(grid.points)
        a = np.fft.ifft(coeffs)
        aliased = a * a
        clean = dealiased_mul(a, a)
        # the two differ exactly by the wrapped-around modes
        assert l2(grid, aliased - clean) > 1e-6


class TestCutoffs:
    def test_partition_constant(self):
        assert abs(partition_constant() - 512.0 / 7.0) < 1e-8

    def test_bump_squared_integral(self):
        from scipy.integrate import quad

        val, _ = quad(lambda x: bump(x) ** 2, -np.inf, np.inf)
        assert abs(val - 198.0) < 1e-8

    def test_peak_value(self):
        assert bump(0.0) ** 12 == 1.0

    def test_translation_and_positivity(self, grid):
        c = Cutoff(grid, 3.0, 6, scale=5.0)
        samples = c.samples()
        assert np.all(samples > 0.0) and np.all(samples <= 1.0)
        assert np.argmax(samples) == np.argmin(np.abs(grid.x - 3.0))

    def test_antiderivative_matches_quadrature(self, grid):
        from scipy.integrate import quad

        c = Cutoff(grid, -2.0, 12, scale=3.0)
        phi = c.antiderivative()
        assert abs(phi[0]) < 1e-12
        assert np.all(np.diff(phi) >= -1e-14 * phi[-1])
        x_probe = 4.0
        j = int(np.argmin(np.abs(grid.x - x_probe)))
        ref, _ = quad(lambda y: bump(y + 2.0, 3.0) ** 12, -np.inf, grid.x[j])
        assert abs(phi[j] - ref) < 1e-10

    def test_power_range(self, grid):
        with pytest.raises(SpectralError):
            Cutoff(grid, 0.0, 13)
