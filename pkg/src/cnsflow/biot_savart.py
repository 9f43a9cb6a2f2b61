"""Velocity from vorticity through the free-space Biot-Savart law.

The kernel ``S(x) = (-x2, x1) / (2 pi |x|^2)`` is sampled on the doubled grid
(origin sample set to zero, which is its cell average by odd symmetry) and
transformed once.  The gradient part of the sampled kernel's symbol is
projected out so the discrete velocity is solenoidal to round-off on the
doubled grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .field import (
    GridMismatch,
    GridSpec,
    ScalarField,
    VectorField,
    _pad,
    _wavenumbers,
)

__all__ = [
    "BiotSavartKernelCache",
    "kernel_cache",
    "velocity_from_vorticity",
    "velocity_divergence",
    "velocity_curl",
]


@dataclass(frozen=True, eq=False)
class BiotSavartKernelCache:
    grid: GridSpec
    s1_hat: np.ndarray = field(repr=False)
    s2_hat: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, grid: GridSpec) -> "BiotSavartKernelCache":
        N, h = grid.N, grid.h
        m = np.arange(2 * N)
        m = np.where(m < N, m, m - 2 * N) * h
        Y1, Y2 = np.meshgrid(m, m, indexing="ij")
        r2 = Y1 * Y1 + Y2 * Y2
        r2[0, 0] = 1.0
        s1 = -Y2 / (2.0 * np.pi * r2)
        s2 = Y1 / (2.0 * np.pi * r2)
        # origin and the unpaired Nyquist row/column break odd symmetry
        for s in (s1, s2):
            s[0, 0] = 0.0
            s[N, :] = 0.0
            s[:, N] = 0.0
        a1 = sfft.rfft2(s1) * grid.cell_area
        a2 = sfft.rfft2(s2) * grid.cell_area
        D1, D2, ksq = _wavenumbers(grid.L, N, 2 * N)
        k1, k2 = D1.imag, D2.imag
        safe = np.where(ksq > 0, ksq, 1.0)
        proj = (k1 * a1 + k2 * a2) / safe
        a1 = a1 - k1 * proj
        a2 = a2 - k2 * proj
        a1.flags.writeable = False
        a2.flags.writeable = False
        return cls(grid, a1, a2)


@lru_cache(maxsize=8)
def kernel_cache(grid: GridSpec) -> BiotSavartKernelCache:
    """Shared cache keyed by grid."""
    return BiotSavartKernelCache.build(grid)


def _check(zeta, cache):
    if cache is None:
        return kernel_cache(zeta.grid)
    if zeta.grid != cache.grid:
        raise GridMismatch(f"vorticity grid {zeta.grid} != cache grid {cache.grid}")
    return cache


def _spectral(zeta: ScalarField, cache: BiotSavartKernelCache):
    zh = sfft.rfft2(_pad(zeta.values))
    return cache.s1_hat * zh, cache.s2_hat * zh


def velocity_from_vorticity(zeta: ScalarField, cache: BiotSavartKernelCache | None = None) -> VectorField:
    """Return ``u = S * zeta`` on the grid of ``zeta``."""
    cache = _check(zeta, cache)
    g, N = zeta.grid, zeta.grid.N
    if not np.any(zeta.values):
        return VectorField.zeros(g)
    u1, u2 = _spectral(zeta, cache)
    crop = lambda a: ScalarField(g, sfft.irfft2(a, s=(2 * N, 2 * N))[:N, :N])  # noqa: E731
    return VectorField(crop(u1), crop(u2))


def velocity_divergence(zeta: ScalarField, cache: BiotSavartKernelCache | None = None) -> ScalarField:
    """Spectral divergence of ``S * zeta`` evaluated on the doubled grid, cropped.

    The cropped velocity is not periodic on the physical box (circulation
    decays only like ``1/|x|``), so the discrete divergence is taken before
    cropping.
    """
    cache = _check(zeta, cache)
    g, N = zeta.grid, zeta.grid.N
    D1, D2, _ = _wavenumbers(g.L, N, 2 * N)
    u1, u2 = _spectral(zeta, cache)
    return ScalarField(g, sfft.irfft2(D1 * u1 + D2 * u2, s=(2 * N, 2 * N))[:N, :N])


def velocity_curl(zeta: ScalarField, cache: BiotSavartKernelCache | None = None) -> ScalarField:
    """``d1 u2 - d2 u1`` of ``u = S * zeta`` on the doubled grid, cropped."""
    cache = _check(zeta, cache)
    g, N = zeta.grid, zeta.grid.N
    D1, D2, _ = _wavenumbers(g.L, N, 2 * N)
    u1, u2 = _spectral(zeta, cache)
    return ScalarField(g, sfft.irfft2(D1 * u2 - D2 * u1, s=(2 * N, 2 * N))[:N, :N])
