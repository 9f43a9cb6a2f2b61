"""Semi-implicit spectral time stepper for the chemotaxis-fluid system.

One step is integrating-factor Euler::

    f(t + dt) = e^{dt Delta} (f(t) + dt * drift_f(t))

with the drift terms ``-div(n grad c + n u)``, ``-(u . grad c + n c)`` and
``-div(zeta u) + perp_div(n grad phi)`` built exactly as the Duhamel integrands
(same products, dealiasing and doubled-grid derivatives).  Diffusion is exact.
Undershoots of ``n`` and ``c`` are left alone.

The state is carried on the zero-padded doubled grid, so heat that diffuses
past the physical box is kept (as in a single free-space heat solve) instead
of being cut off at every step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .biot_savart import velocity_from_vorticity
from .duhamel import SpectralOps, drift_hats
from .field import GridSpec, ScalarField, VectorField
from .fieldio import read_field, write_field
from .trajectory import Trajectory

__all__ = ["StepperState", "CFLViolation", "imex_step", "run_oracle", "cfl_limit", "load_checkpoint"]


class CFLViolation(ValueError):
    def __init__(self, dt, limit):
        super().__init__(f"dt={dt:.4g} exceeds the advective limit h/(4 max|u|) = {limit:.4g}; use dt <= {limit:.4g}")
        self.dt = dt
        self.suggested_dt = limit


@dataclass(frozen=True, eq=False)
class StepperState:
    t: float
    n: ScalarField
    c: ScalarField
    zeta: ScalarField
    u: VectorField | None = field(default=None, repr=False)
    ext: dict | None = field(default=None, repr=False)
    """Doubled-grid spectra of ``n, c, zeta``; the physical fields are their crops."""

    def __post_init__(self):
        if not (self.n.grid == self.c.grid == self.zeta.grid):
            raise ValueError("state fields live on different grids")
        if self.u is None:
            object.__setattr__(self, "u", velocity_from_vorticity(self.zeta))
        if self.ext is None:
            sp = SpectralOps(self.grid)
            object.__setattr__(self, "ext", {k: sp.hat(getattr(self, k).values) for k in ("n", "c", "zeta")})

    @property
    def grid(self):
        return self.n.grid


def cfl_limit(state: StepperState) -> float:
    umax = float(state.u.magnitude().values.max())
    return math.inf if umax == 0 else state.grid.h / (4.0 * umax)


def imex_step(state: StepperState, dt: float, grad_phi: VectorField | None = None) -> StepperState:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    lim = cfl_limit(state)
    if dt > lim:
        raise CFLViolation(dt, lim)
    sp = SpectralOps(state.grid)
    drift = drift_hats(state.n, state.c, state.zeta, grad_phi, u=state.u)
    E = np.exp(-dt * sp.ksq)
    ext = {k: E * (state.ext[k] + dt * drift[k]) for k in ("n", "c", "zeta")}
    new = {k: sp.real(v) for k, v in ext.items()}
    return StepperState(state.t + dt, new["n"], new["c"], new["zeta"], ext=ext)


def _advance(state, t_end, dt, grad_phi):
    span = t_end - state.t
    if span <= 0:
        return state
    k = max(1, math.ceil(span / dt - 1e-9))
    h = span / k
    for i in range(k):
        state = imex_step(state, h, grad_phi)
    return replace(state, t=t_end)


def run_oracle(
    data,
    times,
    dt: float,
    grad_phi: VectorField | None = None,
    checkpoint_dir=None,
    checkpoint_every: int = 0,
) -> Trajectory:
    """Step from ``data = (n0, c0, zeta0)`` (fields or a :class:`StepperState`) and record at ``times``.

    Each gap between recording times is split into equal sub-steps no longer
    than ``dt``, so the records fall exactly on ``times``.
    """
    if isinstance(data, StepperState):
        state = data
        init = (data.n, data.c, data.zeta) if data.t == 0 else None
    else:
        n0, c0, z0 = data
        state = StepperState(0.0, n0, c0, z0)
        init = (n0, c0, z0)
    times = np.asarray(times, dtype=float)
    if np.any(times <= state.t):
        raise ValueError("recording times must lie after the start time")
    rec = {"n": [], "c": [], "zeta": []}
    for m, t in enumerate(times):
        state = _advance(state, float(t), dt, grad_phi)
        for k in rec:
            rec[k].append(getattr(state, k))
        if checkpoint_dir and checkpoint_every and (m + 1) % checkpoint_every == 0:
            save_checkpoint(state, Path(checkpoint_dir) / f"ckpt_{m + 1:04d}")
    return Trajectory(times, rec["n"], rec["c"], rec["zeta"], init)


def save_checkpoint(state: StepperState, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    g = state.grid
    big = GridSpec(2 * g.L, 2 * g.N)
    for name in ("n", "c", "zeta"):
        write_field(d / name, getattr(state, name), name, state.t)
        ext = sfft.irfft2(state.ext[name], s=(2 * g.N, 2 * g.N))
        write_field(d / f"{name}_ext", ScalarField(big, ext), f"{name} (doubled grid)", state.t)
    (d / "checkpoint.json").write_text(json.dumps({"t": state.t, "fields": ["n", "c", "zeta"], "L": g.L, "N": g.N}))
    return d


def load_checkpoint(directory) -> StepperState:
    d = Path(directory)
    meta = json.loads((d / "checkpoint.json").read_text())
    f = {name: read_field(d / name)[0] for name in ("n", "c", "zeta")}
    ext = {name: sfft.rfft2(read_field(d / f"{name}_ext")[0].values) for name in ("n", "c", "zeta")}
    return StepperState(float(meta["t"]), f["n"], f["c"], f["zeta"], ext=ext)
