"""Uniform-grid fields on a truncation of the plane and the free-space heat flow.

The plane is approximated by the box ``[-L/2, L/2)^2`` sampled at ``N x N``
points.  ``values[i, j]`` holds the sample at ``(x1, x2) = (-L/2 + i h, -L/2 + j h)``.
Free-space convolutions (heat kernel, Biot-Savart) are evaluated on a doubled,
zero-padded ``2N x 2N`` grid so periodic images never reach the physical box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "ScalarField",
    "VectorField",
    "GridMismatch",
    "heat_propagate",
    "gradient",
    "divergence",
    "perp_div",
    "lp_norm",
    "dealias",
    "kernel_action",
]


class GridMismatch(ValueError):
    """Raised when fields living on different grids are combined."""


@dataclass(frozen=True)
class GridSpec:
    L: float
    N: int

    def __post_init__(self):
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"extent must be positive and finite, got {self.L}")
        if self.N < 16 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 16, got {self.N}")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @property
    def axis(self) -> np.ndarray:
        return -0.5 * self.L + self.h * np.arange(self.N)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X1, X2)`` sample coordinates with ``ij`` indexing."""
        return _coords(self.L, self.N)

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros((self.N, self.N)))

    def from_function(self, fn) -> "ScalarField":
        X1, X2 = self.coords()
        return ScalarField(self, np.asarray(fn(X1, X2), dtype=float) + np.zeros_like(X1))

    def central_quarter(self, x1, x2) -> bool:
        """True when the point lies in ``[-L/4, L/4]^2``."""
        q = 0.25 * self.L
        return bool(abs(x1) <= q and abs(x2) <= q)

    def scaled(self, lam: float) -> "GridSpec":
        return GridSpec(self.L / lam, self.N)


@lru_cache(maxsize=16)
def _coords(L, N):
    x = -0.5 * L + (L / N) * np.arange(N)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    X1.flags.writeable = False
    X2.flags.writeable = False
    return X1, X2


@lru_cache(maxsize=32)
def _wavenumbers(L, N, n):
    """Angular wavenumbers for an ``n``-point periodic grid with spacing ``L/N``.

    The Nyquist entry is zeroed in the derivative multipliers only.
    """
    h = L / N
    k = 2.0 * np.pi * sfft.fftfreq(n, d=h)
    kr = 2.0 * np.pi * sfft.rfftfreq(n, d=h)
    K1, K2 = np.meshgrid(k, kr, indexing="ij")
    D1 = 1j * K1
    D2 = 1j * K2
    D1[n // 2, :] = 0.0
    D2[:, -1] = 0.0
    ksq = K1 * K1 + K2 * K2
    for a in (D1, D2, ksq):
        a.flags.writeable = False
    return D1, D2, ksq


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.N, self.grid.N):
            raise ValueError(f"values shape {v.shape} does not match grid N={self.grid.N}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite entries")
        object.__setattr__(self, "values", v)

    def _check(self, other):
        if isinstance(other, (ScalarField, VectorField)) and other.grid != self.grid:
            raise GridMismatch(f"{self.grid} != {other.grid}")

    def __add__(self, other):
        if isinstance(other, ScalarField):
            self._check(other)
            return ScalarField(self.grid, self.values + other.values)
        return ScalarField(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            self._check(other)
            return ScalarField(self.grid, self.values - other.values)
        return ScalarField(self.grid, self.values - other)

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def __mul__(self, other):
        if isinstance(other, VectorField):
            return other * self
        if isinstance(other, ScalarField):
            self._check(other)
            return ScalarField(self.grid, self.values * other.values)
        return ScalarField(self.grid, self.values * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.grid, self.values / other)

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_area)

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())

    def sup(self) -> float:
        return float(np.abs(self.values).max())

    def mass_outside_central_quarter(self) -> float:
        """Absolute mass outside ``[-L/4, L/4)^2``; the box-truncation leakage report."""
        N = self.grid.N
        a, b = N // 4, 3 * N // 4
        total = np.abs(self.values).sum()
        inner = np.abs(self.values[a:b, a:b]).sum()
        return float((total - inner) * self.grid.cell_area)


@dataclass(frozen=True, eq=False)
class VectorField:
    x: ScalarField
    y: ScalarField

    def __post_init__(self):
        if self.x.grid != self.y.grid:
            raise GridMismatch("vector components live on different grids")

    @property
    def grid(self) -> GridSpec:
        return self.x.grid

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VectorField":
        return cls(grid.zeros(), grid.zeros())

    def __add__(self, other: "VectorField"):
        return VectorField(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "VectorField"):
        return VectorField(self.x - other.x, self.y - other.y)

    def __neg__(self):
        return VectorField(-self.x, -self.y)

    def __mul__(self, other):
        return VectorField(self.x * other, self.y * other)

    __rmul__ = __mul__

    def dot(self, other: "VectorField") -> ScalarField:
        return self.x * other.x + self.y * other.y

    def magnitude(self) -> ScalarField:
        return ScalarField(self.grid, np.hypot(self.x.values, self.y.values))


def _same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatch(f"{g} != {f.grid}")
    return g


# -- spectral operators on the periodic N-grid ---------------------------------


def gradient(f: ScalarField) -> VectorField:
    """Spectral gradient on the periodic ``N``-grid."""
    g = f.grid
    D1, D2, _ = _wavenumbers(g.L, g.N, g.N)
    fh = sfft.rfft2(f.values)
    return VectorField(
        ScalarField(g, sfft.irfft2(D1 * fh, s=(g.N, g.N))),
        ScalarField(g, sfft.irfft2(D2 * fh, s=(g.N, g.N))),
    )


def divergence(v: VectorField) -> ScalarField:
    g = v.grid
    D1, D2, _ = _wavenumbers(g.L, g.N, g.N)
    out = D1 * sfft.rfft2(v.x.values) + D2 * sfft.rfft2(v.y.values)
    return ScalarField(g, sfft.irfft2(out, s=(g.N, g.N)))


def perp_div(v: VectorField) -> ScalarField:
    """Return ``d1 v2 - d2 v1`` spectrally."""
    g = v.grid
    D1, D2, _ = _wavenumbers(g.L, g.N, g.N)
    out = D1 * sfft.rfft2(v.y.values) - D2 * sfft.rfft2(v.x.values)
    return ScalarField(g, sfft.irfft2(out, s=(g.N, g.N)))


@lru_cache(maxsize=16)
def _dealias_mask(L, N):
    h = L / N
    k = np.abs(sfft.fftfreq(N, d=h))
    kr = np.abs(sfft.rfftfreq(N, d=h))
    kmax = 0.5 / h
    mask = (k[:, None] < (2.0 / 3.0) * kmax) & (kr[None, :] < (2.0 / 3.0) * kmax)
    mask.flags.writeable = False
    return mask


def dealias(f: ScalarField) -> ScalarField:
    """Apply the 2/3 truncation rule to ``f`` (used on quadratic products)."""
    g = f.grid
    fh = sfft.rfft2(f.values) * _dealias_mask(g.L, g.N)
    return ScalarField(g, sfft.irfft2(fh, s=(g.N, g.N)))


# -- free-space heat flow on the doubled grid ----------------------------------


def _pad(a: np.ndarray) -> np.ndarray:
    N = a.shape[0]
    out = np.zeros((2 * N, 2 * N))
    out[:N, :N] = a
    return out


def kernel_action(mode: str, t: float, *comps: ScalarField) -> ScalarField | VectorField:
    """Apply a derivative of ``e^{t Delta}`` in free space.

    ``mode`` is one of ``"heat"`` (one scalar in, scalar out), ``"grad"`` (scalar
    in, vector out), ``"div"`` (vector in, scalar out) or ``"perp_div"``
    (vector in, scalar out).  Derivatives are taken on the doubled grid before
    cropping, so no boundary wrap enters the derivative.
    """
    if t < 0:
        raise ValueError(f"negative time {t}")
    g = _same_grid(*comps)
    N = g.N
    D1, D2, ksq = _wavenumbers(g.L, N, 2 * N)
    sym = np.exp(-t * ksq) if t > 0 else 1.0

    def fwd(f):
        return sfft.rfft2(_pad(f.values))

    def back(a):
        return ScalarField(g, sfft.irfft2(a, s=(2 * N, 2 * N))[:N, :N])

    if mode == "heat":
        (f,) = comps
        return back(sym * fwd(f))
    if mode == "grad":
        (f,) = comps
        fh = sym * fwd(f)
        return VectorField(back(D1 * fh), back(D2 * fh))
    if mode == "div":
        a, b = comps
        return back(sym * (D1 * fwd(a) + D2 * fwd(b)))
    if mode == "perp_div":
        a, b = comps
        return back(sym * (D1 * fwd(b) - D2 * fwd(a)))
    raise ValueError(f"unknown kernel action {mode!r}")


def heat_propagate(f: ScalarField, t: float) -> ScalarField:
    """Free-space heat evolution ``e^{t Delta} f``.

    ``f`` is zero-padded onto the doubled grid, multiplied by the exact symbol
    ``exp(-|k|^2 t)`` and cropped.  ``t == 0`` returns ``f`` itself.
    """
    if not t >= 0:
        raise ValueError(f"heat_propagate needs t >= 0, got {t}")
    if t == 0:
        return f
    return kernel_action("heat", t, f)


def lp_norm(f: ScalarField | VectorField, p: float) -> float:
    """Riemann-sum ``L^p`` norm; vector fields use the Euclidean magnitude."""
    if not p >= 1:
        raise ValueError(f"L^p exponent must be >= 1, got {p}")
    a = f.magnitude().values if isinstance(f, VectorField) else np.abs(f.values)
    if math.isinf(p):
        return float(a.max())
    h2 = f.grid.cell_area
    if p == 1:
        return float(a.sum() * h2)
    if p == 2:
        return float(math.sqrt(np.sum(a * a) * h2))
    m = a.max()
    if m == 0:
        return 0.0
    # scale by the max to keep a**p in range for large p
    return float(m * (np.sum((a / m) ** p) * h2) ** (1.0 / p))
