"""Stored solution trajectories ``t -> (n, c, zeta)`` on a time mesh, and Kato norms."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .biot_savart import velocity_from_vorticity
from .field import GridMismatch, GridSpec, ScalarField, VectorField, gradient, heat_propagate, lp_norm
from .fieldio import read_field, write_field

__all__ = ["Trajectory", "graded_times", "kato_norm", "x_norms", "MIN_NODES"]

MIN_NODES = 8
COMPONENTS = ("n", "c", "zeta")


def graded_times(T: float, M: int, power: float = 2.0) -> np.ndarray:
    """Nodes ``T (m/M)^power`` for ``m = 1..M``, clustered at ``t = 0``."""
    if M < 1 or not T > 0:
        raise ValueError("need M >= 1 and T > 0")
    return T * (np.arange(1, M + 1) / M) ** power


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Fields at nodes ``0 < t_1 < ... < t_M`` plus the (optional) data at ``t = 0``."""

    times: np.ndarray
    n: tuple[ScalarField, ...]
    c: tuple[ScalarField, ...]
    zeta: tuple[ScalarField, ...]
    initial: tuple[ScalarField, ScalarField, ScalarField] | None = None
    _u: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", t)
        for name in COMPONENTS:
            object.__setattr__(self, name, tuple(getattr(self, name)))
        M = t.size
        if M < MIN_NODES:
            raise ValueError(f"trajectory needs at least {MIN_NODES} nodes, got {M}")
        if not (t[0] > 0 and np.all(np.diff(t) > 0)):
            raise ValueError("time nodes must be positive and strictly increasing")
        if not all(len(getattr(self, k)) == M for k in COMPONENTS):
            raise ValueError("component lengths differ from the node count")
        g = self.grid
        fields = list(self.n) + list(self.c) + list(self.zeta) + list(self.initial or ())
        if any(f.grid != g for f in fields):
            raise GridMismatch("trajectory fields live on different grids")

    @property
    def grid(self) -> GridSpec:
        return self.n[0].grid

    @property
    def M(self) -> int:
        return self.times.size

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def component(self, name: str) -> tuple[ScalarField, ...]:
        return getattr(self, name)

    def velocity(self, i: int) -> VectorField:
        """``S * zeta`` at node ``i`` (cached)."""
        if i not in self._u:
            self._u[i] = velocity_from_vorticity(self.zeta[i])
        return self._u[i]

    def state(self, i: int):
        """``(t, n, c, zeta)`` at node ``i``; ``i = -1`` is ``t = 0`` (needs initial data)."""
        if i == -1:
            if self.initial is None:
                raise ValueError("trajectory carries no initial data")
            return (0.0, *self.initial)
        return float(self.times[i]), self.n[i], self.c[i], self.zeta[i]

    # -- interpolation -----------------------------------------------------------

    def _weights(self, t: float):
        """Bracketing node indices and linear weight; index -1 stands for t = 0."""
        ts = self.times
        if t < 0 or t > ts[-1] * (1 + 1e-12):
            raise ValueError(f"time {t} outside [0, {ts[-1]}]")
        k = int(np.searchsorted(ts, t))
        if k < ts.size and ts[k] == t:
            return k, k, 1.0
        if k == 0:
            return -1, 0, t / ts[0]
        k = min(k, ts.size - 1)
        t0, t1 = ts[k - 1], ts[k]
        # log-linear in time between positive nodes
        return k - 1, k, (math.log(t) - math.log(t0)) / (math.log(t1) - math.log(t0))

    def at(self, t: float) -> tuple[ScalarField, ScalarField, ScalarField]:
        """Interpolated ``(n, c, zeta)`` at time ``t``.

        With initial data the free heat part ``e^{t Delta} f_0`` is exact and only
        the Duhamel correction is interpolated; the correction vanishes at 0.
        """
        a, b, w = self._weights(t)
        out = []
        for ci, name in enumerate(COMPONENTS):
            comp = self.component(name)
            if self.initial is None:
                if a == -1:
                    raise ValueError("interpolation below t_1 needs initial data")
                fa, fb = comp[a], comp[b]
                out.append(fa * (1 - w) + fb * w)
                continue
            f0 = self.initial[ci]

            def corr(i):
                if i == -1:
                    return None
                return comp[i] - heat_propagate(f0, float(self.times[i]))

            ca, cb = corr(a), corr(b)
            c = cb * w if ca is None else ca * (1 - w) + cb * w
            out.append(heat_propagate(f0, t) + c)
        return tuple(out)

    # -- algebra -----------------------------------------------------------------

    def _check_compat(self, other: "Trajectory"):
        if other.grid != self.grid:
            raise GridMismatch(f"{self.grid} != {other.grid}")
        if other.M != self.M or not np.array_equal(other.times, self.times):
            raise ValueError("trajectories live on different time meshes")

    def combine(self, a: float, other: "Trajectory", b: float) -> "Trajectory":
        """``a * self + b * other`` nodewise (initial data combined likewise)."""
        self._check_compat(other)
        def lin(xs, ys):
            return tuple(x * a + y * b for x, y in zip(xs, ys))

        init = None
        if self.initial is not None and other.initial is not None:
            init = tuple(x * a + y * b for x, y in zip(self.initial, other.initial))
        return Trajectory(self.times, lin(self.n, other.n), lin(self.c, other.c), lin(self.zeta, other.zeta), init)

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        return self.combine(1.0, other, -1.0)

    def __add__(self, other: "Trajectory") -> "Trajectory":
        return self.combine(1.0, other, 1.0)

    def scaled(self, a: float) -> "Trajectory":
        init = None if self.initial is None else tuple(f * a for f in self.initial)
        return Trajectory(
            self.times, [f * a for f in self.n], [f * a for f in self.c], [f * a for f in self.zeta], init
        )

    def with_initial(self, n0, c0, z0) -> "Trajectory":
        return Trajectory(self.times, self.n, self.c, self.zeta, (n0, c0, z0))

    @classmethod
    def zeros(cls, grid: GridSpec, times) -> "Trajectory":
        M = len(times)
        z = grid.zeros()
        return cls(times, [z] * M, [z] * M, [z] * M, (z, z, z))

    # -- persistence -------------------------------------------------------------

    def save(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name in COMPONENTS:
            for i, f in enumerate(self.component(name)):
                write_field(d / f"{name}_{i:04d}", f, name, float(self.times[i]))
        if self.initial is not None:
            for name, f in zip(COMPONENTS, self.initial):
                write_field(d / f"{name}_init", f, name, 0.0)
        meta = {"times": self.times.tolist(), "L": self.grid.L, "N": self.grid.N, "initial": self.initial is not None}
        (d / "trajectory.json").write_text(json.dumps(meta, indent=1))
        return d

    @classmethod
    def load(cls, directory) -> "Trajectory":
        d = Path(directory)
        meta = json.loads((d / "trajectory.json").read_text())
        times = np.asarray(meta["times"], dtype=float)
        comps = {name: [read_field(d / f"{name}_{i:04d}")[0] for i in range(times.size)] for name in COMPONENTS}
        init = None
        if meta.get("initial"):
            init = tuple(read_field(d / f"{name}_init")[0] for name in COMPONENTS)
        return cls(times, comps["n"], comps["c"], comps["zeta"], init)


# -- Kato norms --------------------------------------------------------------------


def kato_norm(traj: Trajectory, component: str, p: float, alpha: float) -> float:
    """``max_m t_m^alpha ||f(t_m)||_p`` over the nodes.

    ``component`` is ``"n"``, ``"zeta"``, ``"c"``, ``"grad_c"`` or ``"c_inf"``
    (the latter ignores ``p``/``alpha`` and returns ``max ||c||_inf``).
    """
    if component == "c_inf":
        return max(f.sup() for f in traj.c)
    best = 0.0
    for t, i in zip(traj.times, range(traj.M)):
        if component == "grad_c":
            v = lp_norm(gradient(traj.c[i]), p)
        else:
            v = lp_norm(traj.component(component)[i], p)
        best = max(best, float(t) ** alpha * v)
    return best


def x_norms(traj: Trajectory, idx) -> tuple[float, float, float]:
    """``(||n||_{X1}, ||c||_{X2}, ||zeta||_{X3})`` for indices ``idx``."""
    p1, p2, p3 = idx.p
    a1, a2, a3 = idx.alpha
    x1 = kato_norm(traj, "n", p1, a1)
    x2 = kato_norm(traj, "c_inf", math.inf, 0.0) + kato_norm(traj, "grad_c", p2, a2)
    x3 = kato_norm(traj, "zeta", p3, a3)
    return x1, x2, x3
