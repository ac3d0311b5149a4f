"""Initial-data profiles used by the experiments and the test suites."""

from __future__ import annotations

import numpy as np

from .spectral import Field, Grid, SpectralError, sobolev_norm


def gaussian(grid: Grid, amplitude: float = 0.1, width: float = 1.0,
             sign: int = +1) -> Field:
    """amplitude * exp(-(x/width)^2)."""
    return Field(grid, amplitude * np.exp(-((grid.x / width) ** 2)), sign)


def constant(grid: Grid, amplitude: complex, sign: int = +1) -> Field:
    return Field(grid, np.full(grid.points, amplitude, dtype=np.complex128), sign)


def plane_wave(grid: Grid, amplitude: complex, xi0: float, sign: int = +1) -> Field:
    """amplitude * exp(i xi0 x); xi0 must sit on the frequency lattice."""
    k = xi0 / grid.dxi
    if abs(k - round(k)) > 1e-9:
        raise SpectralError(
            f"xi0 = {xi0} is not on the frequency lattice (spacing {grid.dxi:.6g})"
        )
    return Field(grid, amplitude * np.exp(1j * xi0 * grid.x), sign)


def spectral_profile(grid: Grid, profile, sign: int = +1) -> Field:
    """Field with prescribed transform: q_hat(xi_k) = profile(xi_k)."""
    coeffs = np.asarray(profile(grid.xi), dtype=np.complex128)
    return Field(grid, grid.ifft(coeffs), sign)


def mean_zero_even(grid: Grid, amplitude: float, sign: int = +1) -> Field:
    """Mean-zero data with transform a xi^2 exp(-xi^2) (even-flow seed)."""
    return spectral_profile(grid, lambda xi: amplitude * xi**2 * np.exp(-(xi**2)), sign)


def mean_zero_odd(grid: Grid, amplitude: float, sign: int = +1) -> Field:
    """Mean-zero data with transform a (xi^2 + xi^3) exp(-xi^2) (odd-flow seed)."""
    return spectral_profile(
        grid, lambda xi: amplitude * (xi**2 + xi**3) * np.exp(-(xi**2)), sign
    )


def random_schwartz(grid: Grid, rng: np.random.Generator, norm: float = 0.1,
                    norm_sigma: float = -0.25, sign: int = +1,
                    x_width: float = 4.0, xi_width: float = 2.5,
                    band_fraction: float = 2.0 / 3.0) -> Field:
    """Random smooth, spatially localized field normalized in H^norm_sigma.

    Complex noise is shaped by a Gaussian in frequency, localized by a
    Gaussian envelope in space, and finally band-limited to a fraction of
    the lattice, so spectral tails and boundary values both sit at machine
    level on a sensible box.
    """
    n = grid.points
    noise = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    shaped = noise * np.exp(-((grid.xi / xi_width) ** 2))
    values = np.fft.ifft(shaped) * np.exp(-((grid.x / x_width) ** 2))
    cut = band_fraction * float(np.max(np.abs(grid.xi)))
    spectrum = np.fft.fft(values)
    spectrum[np.abs(grid.xi) > cut] = 0.0
    values = np.fft.ifft(spectrum)
    f = Field(grid, values, sign)
    current = sobolev_norm(f, norm_sigma)
    if current == 0.0:
        raise SpectralError("degenerate random field")
    return Field(grid, values * (norm / current), sign)
