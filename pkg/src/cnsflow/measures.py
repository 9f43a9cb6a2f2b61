"""Symbolic Radon-measure data and its mollification onto a grid.

A measure is a finite sum of atoms ``w * delta_a``, filaments (polylines with a
constant linear density) and an absolutely continuous density field.  The
mollifier is the unit Gaussian ``phi(x) = exp(-|x|^2) / pi`` so that
``phi_j(x) = j^2 phi(j x)`` equals the heat kernel at time ``1 / (4 j^2)``;
mollified data therefore compose with the heat flow in closed form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .field import GridSpec, ScalarField, heat_propagate

__all__ = [
    "Atom",
    "Filament",
    "RadonMeasureSpec",
    "TestFunctionSpec",
    "UnresolvableMollifier",
    "mollifier_time",
    "finest_resolvable_level",
    "mollify",
    "total_variation",
    "atomic_tv",
    "weak_pairing",
    "exact_pairing",
    "load_measure",
    "measure_from_dict",
]


class UnresolvableMollifier(ValueError):
    pass


@dataclass(frozen=True)
class Atom:
    x: tuple[float, float]
    w: float


@dataclass(frozen=True, eq=False)
class Filament:
    vertices: np.ndarray
    density: float

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 2:
            raise ValueError("filament needs at least two 2D vertices")
        object.__setattr__(self, "vertices", v)

    @property
    def length(self) -> float:
        return float(np.hypot(*np.diff(self.vertices, axis=0).T).sum())

    def quadrature(self, step: float) -> tuple[np.ndarray, np.ndarray]:
        """Arclength midpoint nodes and weights with sub-segment length <= ``step``."""
        pts, wts = [], []
        for a, b in zip(self.vertices[:-1], self.vertices[1:]):
            seg = float(np.hypot(*(b - a)))
            if seg == 0:
                continue
            m = max(1, math.ceil(seg / step))
            s = (np.arange(m) + 0.5) / m
            pts.append(a[None, :] + s[:, None] * (b - a)[None, :])
            wts.append(np.full(m, self.density * seg / m))
        if not pts:
            return np.zeros((0, 2)), np.zeros(0)
        return np.concatenate(pts), np.concatenate(wts)


@dataclass(frozen=True, eq=False)
class RadonMeasureSpec:
    atoms: tuple[Atom, ...] = ()
    filaments: tuple[Filament, ...] = ()
    density: ScalarField | None = None

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "filaments", tuple(self.filaments))

    def scaled(self, lam: float) -> "RadonMeasureSpec":
        """Measure of ``lam^2 mu(lam x)``: positions shrink by ``lam``, line densities grow by ``lam``.

        The density part keeps its samples; it must be re-gridded on the scaled grid.
        """
        atoms = tuple(Atom((a.x[0] / lam, a.x[1] / lam), a.w) for a in self.atoms)
        fils = tuple(Filament(f.vertices / lam, f.density * lam) for f in self.filaments)
        dens = None
        if self.density is not None:
            dens = ScalarField(self.density.grid.scaled(lam), self.density.values * lam**2)
        return RadonMeasureSpec(atoms, fils, dens)

    def check_support(self, grid: GridSpec) -> None:
        for a in self.atoms:
            if not grid.central_quarter(*a.x):
                raise ValueError(f"atom at {a.x} lies outside the central quarter of {grid}")
        for f in self.filaments:
            if not all(grid.central_quarter(*p) for p in f.vertices):
                raise ValueError(f"filament leaves the central quarter of {grid}")
        if self.density is not None and self.density.grid != grid:
            raise ValueError("density part lives on a different grid")

    @property
    def is_zero(self) -> bool:
        return (
            all(a.w == 0 for a in self.atoms)
            and all(f.density == 0 for f in self.filaments)
            and (self.density is None or not np.any(self.density.values))
        )


def total_variation(mu: RadonMeasureSpec) -> float:
    tv = sum(abs(a.w) for a in mu.atoms)
    tv += sum(abs(f.density) * f.length for f in mu.filaments)
    if mu.density is not None:
        tv += float(np.abs(mu.density.values).sum() * mu.density.grid.cell_area)
    return float(tv)


def atomic_tv(mu: RadonMeasureSpec) -> float:
    return float(sum(abs(a.w) for a in mu.atoms))


def mollifier_time(j: float) -> float:
    """Heat time ``tau`` with ``phi_j = e^{tau Delta} delta``."""
    return 1.0 / (4.0 * j * j)


def finest_resolvable_level(grid: GridSpec, min_width_cells: float = 4.0) -> int:
    """Largest integer ``j`` whose mollifier width ``1/j`` is at least ``min_width_cells * h``."""
    j = math.floor(1.0 / (min_width_cells * grid.h) + 1e-9)
    if j < 1:
        raise UnresolvableMollifier(f"grid {grid} cannot resolve any mollifier of width {min_width_cells}h")
    return j


def _gaussian_sum(grid, pts, wts, tau):
    X1, X2 = grid.coords()
    out = np.zeros((grid.N, grid.N))
    # only evaluate where exp(-r^2 / 4 tau) is above round-off
    reach = math.sqrt(4.0 * tau * 40.0)
    x = grid.axis
    norm = 1.0 / (4.0 * math.pi * tau)
    for (p1, p2), w in zip(pts, wts):
        i0, i1 = np.searchsorted(x, [p1 - reach, p1 + reach])
        j0, j1 = np.searchsorted(x, [p2 - reach, p2 + reach])
        d1 = x[i0:i1, None] - p1
        d2 = x[None, j0:j1] - p2
        out[i0:i1, j0:j1] += w * norm * np.exp(-(d1 * d1 + d2 * d2) / (4.0 * tau))
    return out


def _spectral_sum(grid, pts, wts, tau):
    """Band-limited ``phi_j * sum w delta`` on the periodic grid (sub-grid mollifiers)."""
    N, h = grid.N, grid.h
    k = 2.0 * np.pi * sfft.fftfreq(N, d=h)
    kr = 2.0 * np.pi * sfft.rfftfreq(N, d=h)
    x0 = -0.5 * grid.L
    acc = np.zeros((N, kr.size), dtype=complex)
    for (p1, p2), w in zip(pts, wts):
        acc += w * np.exp(-1j * (k[:, None] * (p1 - x0) + kr[None, :] * (p2 - x0)))
    acc *= np.exp(-tau * (k[:, None] ** 2 + kr[None, :] ** 2))
    return sfft.irfft2(acc, s=(N, N)) / grid.cell_area


def mollify(mu: RadonMeasureSpec, j: float, grid: GridSpec, *, allow_subgrid: bool = False) -> ScalarField:
    """Return ``phi_j * mu`` sampled on ``grid``.

    The mollifier width ``1/j`` must be at least ``2h``.  With
    ``allow_subgrid=True`` narrower mollifiers are accepted and evaluated as a
    band-limited sum; such fields ring at the grid scale and do not satisfy the
    ``L^1`` bound by the total variation.
    """
    if j <= 0:
        raise ValueError(f"mollification level must be positive, got {j}")
    subgrid = 1.0 / j < 2.0 * grid.h
    if subgrid and not allow_subgrid:
        raise UnresolvableMollifier(
            f"width 1/j={1.0 / j:.4g} is below 2h={2 * grid.h:.4g}; "
            f"use j <= {1.0 / (2 * grid.h):.4g} or refine the grid (N > {grid.N})"
        )
    mu.check_support(grid)
    tau = mollifier_time(j)
    pts = [a.x for a in mu.atoms]
    wts = [a.w for a in mu.atoms]
    for f in mu.filaments:
        p, w = f.quadrature(0.5 * grid.h)
        pts.extend(map(tuple, p))
        wts.extend(w)
    if subgrid:
        vals = _spectral_sum(grid, pts, wts, tau) if pts else np.zeros((grid.N, grid.N))
    else:
        vals = _gaussian_sum(grid, pts, wts, tau)
    out = ScalarField(grid, vals)
    if mu.density is not None:
        out = out + heat_propagate(mu.density, tau)
    return out


@dataclass(frozen=True)
class TestFunctionSpec:
    """``psi(x) = sum_{a,b} c_ab (x1-x01)^a (x2-x02)^b exp(-|x-x0|^2 / (2 s^2))``."""

    __test__ = False  # not a pytest class

    center: tuple[float, float] = (0.0, 0.0)
    width: float = 1.0
    monomials: tuple[tuple[int, int, float], ...] = ((0, 0, 1.0),)

    def __call__(self, x1, x2):
        d1 = np.asarray(x1, dtype=float) - self.center[0]
        d2 = np.asarray(x2, dtype=float) - self.center[1]
        poly = sum(c * d1**a * d2**b for a, b, c in self.monomials)
        return poly * np.exp(-(d1 * d1 + d2 * d2) / (2.0 * self.width**2))

    def on_grid(self, grid: GridSpec) -> ScalarField:
        X1, X2 = grid.coords()
        return ScalarField(grid, self(X1, X2) + np.zeros_like(X1))


def weak_pairing(f: ScalarField, psi: TestFunctionSpec) -> float:
    """Discrete pairing ``h^2 sum f psi``."""
    return float(np.sum(f.values * psi.on_grid(f.grid).values) * f.grid.cell_area)


def exact_pairing(mu: RadonMeasureSpec, psi: TestFunctionSpec, arclength_step: float = 1e-3) -> float:
    """``<mu, psi>`` with atoms exact and filaments by a fine midpoint rule."""
    total = sum(a.w * float(psi(*a.x)) for a in mu.atoms)
    for f in mu.filaments:
        p, w = f.quadrature(arclength_step)
        total += float(np.sum(w * psi(p[:, 0], p[:, 1])))
    if mu.density is not None:
        total += weak_pairing(mu.density, psi)
    return float(total)


# -- JSON ------------------------------------------------------------------------


def measure_from_dict(d: dict, grid: GridSpec | None = None, base: Path | None = None) -> RadonMeasureSpec:
    """Build a measure from ``{"atoms": [...], "filaments": [...], "density_file": ...}``."""
    from .fieldio import read_field

    atoms = tuple(Atom((float(a["x"][0]), float(a["x"][1])), float(a["w"])) for a in d.get("atoms", []))
    fils = tuple(Filament(np.asarray(f["vertices"], dtype=float), float(f["density"])) for f in d.get("filaments", []))
    density = None
    if d.get("density_file"):
        p = Path(d["density_file"])
        if base is not None and not p.is_absolute():
            p = base / p
        density, _ = read_field(p)
        if grid is not None and density.grid != grid:
            raise ValueError(f"density file {p} is on {density.grid}, expected {grid}")
    return RadonMeasureSpec(atoms, fils, density)


def load_measure(path, grid: GridSpec | None = None) -> RadonMeasureSpec:
    path = Path(path)
    return measure_from_dict(json.loads(path.read_text()), grid, path.parent)
