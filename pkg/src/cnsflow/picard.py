"""Fixed-point iteration of the mild map on stored trajectories.

The map is ``Phi(x) = y - B(x)`` where ``y`` is the free heat evolution of the
(mollified) data and ``B`` collects the six Duhamel operators::

    n    = y_n    - B112(n, c) - B113(n, zeta)
    c    = y_c    - B223(c, zeta) - B212(n, c)
    zeta = y_zeta - B333(zeta, zeta) + L13(n)

Iterates are compared in the composite Kato norm ``||.||_X``.  The generic
constant of the contraction estimates is measured along the run (largest
ratio of an operator's norm to its Beta-function bound) and the resulting
budget is reported next to the seed norm.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .condition_a import (
    ContractionBudget,
    InvalidIndices,
    KatoIndices,
    beta_arguments,
    beta_fn,
    contraction_budget,
    validate,
)
from .duhamel import ALL_OPS, DuhamelOpId, duhamel_all
from .field import ScalarField, VectorField, gradient, heat_propagate, lp_norm
from .measures import RadonMeasureSpec, atomic_tv, finest_resolvable_level, mollify
from .trajectory import Trajectory, graded_times, x_norms

__all__ = [
    "MildSolution",
    "PicardDivergence",
    "NegativeData",
    "seed_trajectory",
    "mild_map",
    "solve_picard",
    "prepare_data",
    "measured_master_constant",
]

log = logging.getLogger(__name__)

SIGN_TOL = 1e-12


class PicardDivergence(RuntimeError):
    """Iteration failed to contract; ``report`` holds the partial :class:`MildSolution`."""

    def __init__(self, msg, report):
        super().__init__(msg)
        self.report = report


class NegativeData(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MildSolution:
    trajectory: Trajectory
    seed: Trajectory
    indices: KatoIndices
    T: float
    iterations: int
    converged: bool
    increments: list = field(default_factory=list)
    contraction_ratios: list = field(default_factory=list)
    component_increments: list = field(default_factory=list)
    iterate_norms: list = field(default_factory=list)
    kato_norms: tuple = (0.0, 0.0, 0.0)
    seed_norm: float = 0.0
    residual: float = math.nan
    c_master: float = 1.0
    budget: ContractionBudget | None = None
    mollification_level: float | None = None
    regime: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def ball_radius(self) -> float:
        """``2 K1 eps`` with ``eps`` the seed norm."""
        return self.budget.ball_radius(self.seed_norm) if self.budget else math.nan

    @property
    def in_lemma_regime(self) -> bool:
        return self.budget is not None and self.seed_norm < self.budget.eps_max

    def ball_contained(self) -> bool:
        r = self.ball_radius
        return all(v <= r * (1 + 1e-12) for v in self.iterate_norms)

    def summary(self) -> dict:
        return {
            "T": self.T,
            "iterations": self.iterations,
            "converged": self.converged,
            "seed_norm": self.seed_norm,
            "kato_norms": list(self.kato_norms),
            "residual": self.residual,
            "c_master": self.c_master,
            "eps_max": self.budget.eps_max if self.budget else None,
            "ball_radius": self.ball_radius,
            "ball_contained": bool(self.ball_contained()),
            "in_lemma_regime": bool(self.in_lemma_regime),
            "contraction_ratios": self.contraction_ratios,
            "regime": self.regime,
            "notes": self.notes,
        }

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "dn_X1", "dc_X2", "dzeta_X3", "ratio"])
            for k, (d, r) in enumerate(zip(self.component_increments, [math.nan] + self.contraction_ratios), 1):
                w.writerow([k, *(f"{v:.10e}" for v in d), f"{r:.10e}"])
        return path


def _check_sign(f: ScalarField, name: str):
    scale = max(f.sup(), 1.0)
    if f.min() < -SIGN_TOL * scale:
        raise NegativeData(f"{name} has negative values (min {f.min():.3e}); nonnegative data required")


def seed_trajectory(n0: ScalarField, c0: ScalarField, z0: ScalarField, times) -> Trajectory:
    """Free heat evolution ``(e^{t Delta} n0, e^{t Delta} c0, e^{t Delta} zeta0)`` at ``times``."""
    if not (n0.grid == c0.grid == z0.grid):
        raise ValueError("initial data live on different grids")
    _check_sign(n0, "n0")
    _check_sign(c0, "c0")
    times = np.asarray(times, dtype=float)
    heat = lambda f: [heat_propagate(f, float(t)) for t in times]  # noqa: E731
    return Trajectory(times, heat(n0), heat(c0), heat(z0), (n0, c0, z0))


def mild_map(x: Trajectory, y: Trajectory, grad_phi: VectorField | None = None):
    """``Phi(x) = y - B(x)``; also returns the individual operator outputs."""
    ops = ALL_OPS if grad_phi is not None else tuple(o for o in ALL_OPS if o is not DuhamelOpId.L13)
    x = x.with_initial(*y.initial)
    out = duhamel_all(x, grad_phi, ops)
    comps = {"n": list(y.n), "c": list(y.c), "zeta": list(y.zeta)}
    for op, series in out.items():
        tgt = comps[op.target]
        for i, f in enumerate(series):
            tgt[i] = tgt[i] - f * op.sign
    return Trajectory(y.times, comps["n"], comps["c"], comps["zeta"], y.initial), out


def _series_norm(series, times, kind, idx) -> float:
    p1, p2, p3 = idx.p
    a1, a2, a3 = idx.alpha
    if kind == "n":
        return max(t**a1 * lp_norm(f, p1) for t, f in zip(times, series))
    if kind == "zeta":
        return max(t**a3 * lp_norm(f, p3) for t, f in zip(times, series))
    return max(f.sup() for f in series) + max(t**a2 * lp_norm(gradient(f), p2) for t, f in zip(times, series))


_OP_INPUTS = {
    DuhamelOpId.B112: ("n", "c"),
    DuhamelOpId.B113: ("n", "zeta"),
    DuhamelOpId.B223: ("c", "zeta"),
    DuhamelOpId.B212: ("n", "c"),
    DuhamelOpId.B333: ("zeta", "zeta"),
}


def measured_master_constant(x: Trajectory, ops_out: dict, idx: KatoIndices, grad_phi_l2: float = 0.0) -> dict:
    """Ratio of each operator's Kato norm to its Beta-function bound with unit constant."""
    unit = contraction_budget(idx, 0.0, 1.0)
    xn = dict(zip(("n", "c", "zeta"), x_norms(x, idx)))
    consts = {**unit.bilinear}
    (la, lb), = beta_arguments(idx)["L13"]
    out = {}
    for op, series in ops_out.items():
        num = _series_norm(series, x.times, op.target, idx)
        if op is DuhamelOpId.L13:
            den = xn["n"] * grad_phi_l2 * beta_fn(la, lb)
        else:
            i, j = _OP_INPUTS[op]
            den = xn[i] * xn[j] * consts[op.name]
        if den > 0 and num > 0:
            out[op.name] = num / den
    return out


def prepare_data(data, j: float | None = None):
    """Mollify ``(mu_n, c0, mu_zeta)`` at level ``j`` (default: finest resolvable)."""
    mu_n, c0, mu_z = data
    grid = c0.grid
    if j is None:
        j = finest_resolvable_level(grid)
    n0 = mollify(mu_n, j, grid) if isinstance(mu_n, RadonMeasureSpec) else mu_n
    z0 = mollify(mu_z, j, grid) if isinstance(mu_z, RadonMeasureSpec) else mu_z
    return n0, c0, z0, j


def _regime(data) -> dict:
    mu_n, _, mu_z = data
    an = atomic_tv(mu_n) if isinstance(mu_n, RadonMeasureSpec) else 0.0
    az = atomic_tv(mu_z) if isinstance(mu_z, RadonMeasureSpec) else 0.0
    return {
        "atomic_tv_n": an,
        "atomic_tv_zeta": az,
        "uniqueness": "not asserted (atomic part present)" if an + az > 0 else "no atomic part in the data",
    }


def _iterate(y, idx, grad_phi, tol, max_iter):
    gp_l2 = lp_norm(grad_phi, 2) if grad_phi is not None else 0.0
    x = y
    seed_norm = sum(x_norms(y, idx))
    incs, ratios, comp_incs, norms = [], [], [], [sum(x_norms(y, idx))]
    masters: dict[str, float] = {}
    bad = 0
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        x_new, ops_out = mild_map(x, y, grad_phi)
        for name, v in measured_master_constant(x, ops_out, idx, gp_l2).items():
            masters[name] = max(masters.get(name, 0.0), v)
        d = x_norms(x_new - x, idx)
        inc = float(sum(d))
        comp_incs.append(d)
        if incs:
            ratios.append(inc / incs[-1] if incs[-1] > 0 else 0.0)
            bad = bad + 1 if ratios[-1] >= 1 else 0
        incs.append(inc)
        x = x_new
        norms.append(sum(x_norms(x, idx)))
        log.info("picard iter %d  increment %.3e  ratio %s", k, inc, f"{ratios[-1]:.3f}" if ratios else "-")
        if inc < tol:
            converged = True
            break
        if bad >= 3 or not math.isfinite(inc):
            break
    return x, dict(
        iterations=k,
        converged=converged,
        increments=incs,
        contraction_ratios=ratios,
        component_increments=comp_incs,
        iterate_norms=norms,
        seed_norm=seed_norm,
        masters=masters,
        diverged=bad >= 3 or not math.isfinite(incs[-1]),
        gp_l2=gp_l2,
    )


def solve_picard(
    data,
    idx: KatoIndices,
    grad_phi: VectorField | None = None,
    T: float = 0.1,
    tol: float = 1e-6,
    max_iter: int = 40,
    M: int = 16,
    j: float | None = None,
    halvings: int = 5,
    residual: bool = True,
) -> MildSolution:
    """Iterate ``x <- y - B(x)`` to a fixed point on the graded mesh ``T (m/M)^2``.

    ``data = (mu_n, c0, mu_zeta)``: measures (or fields) for ``n0`` and
    ``zeta0`` and a field for ``c0``.  On divergence the horizon is halved up to
    ``halvings`` times before :class:`PicardDivergence` is raised.
    """
    rep = validate(idx)
    if not rep.passed:
        raise InvalidIndices(f"indices fail {rep.failures()}")
    n0, c0, z0, j = prepare_data(data, j)
    if grad_phi is not None and not np.any(grad_phi.x.values) and not np.any(grad_phi.y.values):
        grad_phi = None
    notes = []
    budget_unit = contraction_budget(idx, 0.0, 1.0)
    thr = budget_unit.c0_threshold(float(idx.p1))
    if c0.sup() > thr:
        msg = f"||c0||_inf = {c0.sup():.4g} exceeds the smallness level {thr:.4g}; proceeding"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    regime = _regime(data)
    for attempt in range(halvings + 1):
        times = graded_times(T, M)
        y = seed_trajectory(n0, c0, z0, times)
        x, info = _iterate(y, idx, grad_phi, tol, max_iter)
        c_master = max(info["masters"].values(), default=1.0)
        budget = contraction_budget(idx, info["gp_l2"], c_master)
        res = math.nan
        if residual and info["converged"]:
            x2, _ = mild_map(x, y, grad_phi)
            res = float(sum(x_norms(x2 - x, idx)))
        sol = MildSolution(
            trajectory=x,
            seed=y,
            indices=idx,
            T=T,
            iterations=info["iterations"],
            converged=info["converged"],
            increments=info["increments"],
            contraction_ratios=info["contraction_ratios"],
            component_increments=info["component_increments"],
            iterate_norms=info["iterate_norms"],
            kato_norms=x_norms(x, idx),
            seed_norm=info["seed_norm"],
            residual=res,
            c_master=c_master,
            budget=budget,
            mollification_level=j,
            regime=regime,
            notes=list(notes),
        )
        if not sol.in_lemma_regime:
            sol.notes.append(
                f"seed norm {sol.seed_norm:.4g} >= eps_max {budget.eps_max:.4g}: the contraction guarantee does not apply"
            )
        if not info["diverged"]:
            return sol
        notes.append(f"divergence at T={T:.4g}; halving the horizon")
        T *= 0.5
    raise PicardDivergence(f"Picard iteration diverged after {halvings} horizon halvings", sol)
