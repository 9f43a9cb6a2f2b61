"""Quantitative checks on solution trajectories, collected in a ledger."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .field import ScalarField, VectorField, heat_propagate, lp_norm
from .measures import RadonMeasureSpec, TestFunctionSpec, exact_pairing, weak_pairing
from .trajectory import Trajectory

__all__ = [
    "ATOM_PLATEAU_L2",
    "DiagnosticRecord",
    "DiagnosticLedger",
    "check_conservation_and_sign",
    "check_zeta_bound",
    "zeta_bound",
    "check_weak_initial_convergence",
    "estimate_atomic_seminorm",
    "check_scaling_covariance",
    "ScalingProblem",
    "matched_discrepancy",
]


@dataclass(frozen=True)
class DiagnosticRecord:
    name: str
    claimed_bound: float
    measured_value: float
    passed: bool
    anchor: str
    note: str = ""

    def __post_init__(self):
        if not self.anchor:
            raise ValueError("every record needs an anchor (or 'plumbing')")


@dataclass
class DiagnosticLedger:
    records: list = field(default_factory=list)

    def add(self, recs):
        if isinstance(recs, DiagnosticRecord):
            recs = [recs]
        self.records.extend(recs)
        return self

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def failures(self) -> list[DiagnosticRecord]:
        return [r for r in self.records if not r.passed]

    def to_json(self, path=None) -> str:
        s = json.dumps({"passed": self.passed, "records": [asdict(r) for r in self.records]}, indent=1, default=float)
        if path is not None:
            Path(path).write_text(s)
        return s

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["name", "claimed_bound", "measured_value", "pass", "anchor", "note"])
            for r in self.records:
                w.writerow([r.name, repr(r.claimed_bound), repr(r.measured_value), r.passed, r.anchor, r.note])
        return path

    def exit_code(self) -> int:
        return 0 if self.passed else 1


def _with_initial(traj: Trajectory, name: str):
    series = list(traj.component(name))
    times = list(traj.times)
    if traj.initial is not None:
        series.insert(0, traj.initial[("n", "c", "zeta").index(name)])
        times.insert(0, 0.0)
    return times, series


def check_conservation_and_sign(
    traj: Trajectory,
    mass_tol: float = 1e-4,
    sign_tol: float = 1e-6,
    cinf_slack: float = 1e-8,
) -> list[DiagnosticRecord]:
    """Mass drift of ``n``, minima of ``n`` and ``c``, and monotonicity of ``||c||_inf``."""
    _, ns = _with_initial(traj, "n")
    _, cs = _with_initial(traj, "c")
    masses = np.array([f.integral() for f in ns])
    m0 = masses[0]
    drift = float(np.max(np.abs(masses - m0)))
    rel = drift / abs(m0) if m0 != 0 else drift
    n_scale = max(f.sup() for f in ns[:1]) or 1.0
    c_scale = max(f.sup() for f in cs[:1]) or 1.0
    n_min = min(f.min() for f in ns)
    c_min = min(f.min() for f in cs)
    cinf = np.array([f.sup() for f in cs])
    rise = float(np.max(np.diff(cinf))) if cinf.size > 1 else 0.0
    return [
        DiagnosticRecord("mass drift of n (relative)", mass_tol, rel, rel <= mass_tol, "mass-conservation"),
        DiagnosticRecord(
            "min n / sup n0", -sign_tol, n_min / n_scale, n_min >= -sign_tol * n_scale, "sign-preservation"
        ),
        DiagnosticRecord(
            "min c / sup c0", -sign_tol, c_min / c_scale, c_min >= -sign_tol * c_scale, "sign-preservation"
        ),
        DiagnosticRecord(
            "largest increase of ||c||_inf", cinf_slack, max(rise, 0.0), rise <= cinf_slack, "maximum-principle-c"
        ),
    ]


def zeta_bound(p: float, T: float, zeta_sigma_p: float, grad_phi_inf: float, C_np: float) -> float:
    """``C_{zeta,p}`` for ``p > 2``: ``[e^{T(p-1)(p-2)/4}(||zeta(sigma)||_p^p + T (2(p-1)/4) ||grad phi||_inf^p C_{n,p}^p)]^{1/p}``."""
    if not p > 2:
        raise ValueError("the direct bound needs p > 2")
    # log form keeps large exponents finite and tiny norms from underflowing
    growth = T * (p - 1) * (p - 2) / 4.0

    def log(x):
        return math.log(x) if x > 0 else -math.inf

    log_inner = np.logaddexp(
        p * log(zeta_sigma_p), log(T * (2.0 * (p - 1) / 4.0)) + p * (log(grad_phi_inf) + log(C_np))
    )
    if log_inner == -math.inf:
        return 0.0
    return math.exp((growth + float(log_inner)) / p)


def check_zeta_bound(
    traj: Trajectory,
    p: float,
    sigma: float = 0.0,
    grad_phi: VectorField | None = None,
    T: float | None = None,
) -> DiagnosticRecord:
    """Compare ``max_{t in [sigma, T]} ||zeta(t)||_p`` with the explicit vorticity bound.

    ``C_{n,q}`` is measured as ``max_t ||n(t)||_q`` over the same window.  For
    ``p in (1, 2]`` the bound interpolates ``||zeta(sigma)||_1`` and ``C_{zeta,4}``
    with ``theta = (4-p)/(3p)``.
    """
    times, zs = _with_initial(traj, "zeta")
    _, ns = _with_initial(traj, "n")
    times = np.asarray(times)
    if not np.any(np.isclose(times, sigma, rtol=0, atol=1e-14)):
        raise ValueError(f"sigma={sigma} is not a stored time")
    i0 = int(np.argmin(np.abs(times - sigma)))
    T = float(times[-1]) if T is None else T
    window = [k for k in range(i0, times.size) if times[k] <= T * (1 + 1e-12)]
    gpi = grad_phi.magnitude().sup() if grad_phi is not None else 0.0

    def direct(q):
        C_nq = max(lp_norm(ns[k], q) for k in window)
        return zeta_bound(q, T, lp_norm(zs[i0], q), gpi, C_nq)

    if p > 2:
        bound = direct(p)
        label = f"C_zeta,{p:g} (direct)"
    elif 1 < p <= 2:
        theta = (4.0 - p) / (3.0 * p)
        bound = lp_norm(zs[i0], 1) ** theta * direct(4.0) ** (1 - theta)
        label = f"C_zeta,{p:g} (interpolated, theta={theta:.4g})"
    else:
        raise ValueError("p must exceed 1")
    measured = max(lp_norm(zs[k], p) for k in window)
    slack = 1e-12 * max(bound, 1.0)
    return DiagnosticRecord(
        f"max ||zeta||_{p:g} on [{sigma:g}, {T:g}]", bound, measured, measured <= bound + slack, "vorticity-Lp-bound", label
    )


def check_weak_initial_convergence(
    traj: Trajectory,
    mu0: RadonMeasureSpec,
    psis,
    first: int = 5,
) -> tuple[list[DiagnosticRecord], dict]:
    """``|<n(t) - mu0, psi>|`` over the earliest nodes.

    Passes when, for every ``psi``, the series decreases monotonically as
    ``t`` decreases.  The mollification floor ``|<n(0) - mu0, psi>|`` is
    reported alongside.
    """
    if isinstance(psis, TestFunctionSpec):
        psis = [psis]
    recs, table = [], {}
    for k, psi in enumerate(psis):
        ref = exact_pairing(mu0, psi)
        series = np.array([abs(weak_pairing(traj.n[m], psi) - ref) for m in range(min(first, traj.M))])
        floor = abs(weak_pairing(traj.initial[0], psi) - ref) if traj.initial is not None else math.nan
        table[k] = {"times": traj.times[: series.size].tolist(), "series": series.tolist(), "floor": floor}
        steps = np.diff(series)
        ok = bool(np.all(steps >= -1e-14 * max(series.max(), 1e-300)))
        worst = float(steps.min()) if steps.size else 0.0
        recs.append(
            DiagnosticRecord(
                f"weak convergence psi#{k}: smallest step of |<n(t)-n0,psi>| (>= 0 means monotone)",
                0.0,
                worst,
                ok,
                "weak-initial-convergence",
                f"floor={floor:.3e}",
            )
        )
    return recs, table


ATOM_PLATEAU_L2 = (8.0 * math.pi) ** -0.5
"""Small-time limit of ``t^{1/2} ||e^{t Delta} delta||_2`` for a unit atom."""


def estimate_atomic_seminorm(
    f,
    p: float = 2.0,
    alpha: float | None = None,
    tau: float = 0.0,
    points: int = 3,
    s_max: float | None = None,
) -> float:
    """Extrapolate ``lim_{s -> 0} s^alpha ||e^{(s - tau) Delta} f||_p`` along dyadic ``s``.

    ``f`` is a field (typically a measure mollified at heat time ``tau``) or a
    trajectory (its data at ``t = 0`` are used).  With ``g(s)`` the sampled
    values, ``g^p`` is fitted as ``A^p + B s^{(p-1)/2}`` on the ``points``
    smallest ``s``; codimension-one parts scale out as ``s^{(p-1)/2}`` while
    atoms stay at a constant.  Returns ``A``.
    """
    if isinstance(f, Trajectory):
        if f.initial is None:
            raise ValueError("trajectory has no data at t = 0")
        f = f.initial[0]
    if alpha is None:
        alpha = 1.0 - 1.0 / p
    if points < 2:
        raise ValueError("too few small-t samples for an extrapolation")
    s0 = tau if tau > 0 else 2.0 * f.grid.h**2
    s = s0 * 2.0 ** np.arange(points)
    if s_max is not None and s[-1] > s_max:
        raise ValueError("too few small-t samples below s_max")
    g = np.array([si**alpha * lp_norm(heat_propagate(f, si - tau), p) for si in s])
    if math.isinf(p):
        # Aitken on the last three values
        d1, d2 = g[1] - g[0], g[2] - g[1]
        return float(g[0] - d1 * d1 / (d2 - d1)) if d2 != d1 else float(g[0])
    X = np.stack([np.ones_like(s), s ** ((p - 1) / 2.0)], axis=1)
    A_p = np.linalg.lstsq(X, g**p, rcond=None)[0][0]
    return float(max(A_p, 0.0) ** (1.0 / p))


# -- scaling covariance --------------------------------------------------------------


def matched_discrepancy(a: Trajectory, b: Trajectory, weights=(1.0, 1.0, 1.0)) -> float:
    """Largest relative L2 difference over nodes and components of ``a`` vs ``w * b``.

    Both trajectories must share ``N``; values are compared sample by sample.
    """
    worst = 0.0
    for name, w in zip(("n", "c", "zeta"), weights):
        for fa, fb in zip(a.component(name), b.component(name)):
            da = fa.values - w * fb.values
            den = np.sqrt(np.sum(fa.values**2))
            num = np.sqrt(np.sum(da**2))
            if den > 0:
                worst = max(worst, float(num / den))
            elif num > 0:
                worst = math.inf
    return worst


@dataclass(frozen=True, eq=False)
class ScalingProblem:
    """Data and solver settings for the scaling check."""

    mu_n: RadonMeasureSpec | ScalarField
    c0: ScalarField
    mu_zeta: RadonMeasureSpec | ScalarField
    indices: object
    T: float = 0.1
    M: int = 16
    solver: str = "picard"
    dt: float = 1e-3
    grad_phi: VectorField | None = None
    j: float | None = None


def _scaled_data(prob: ScalingProblem, lam: float):
    g = prob.c0.grid.scaled(lam)

    def sc(x, weight):
        if isinstance(x, RadonMeasureSpec):
            return x.scaled(lam)
        return ScalarField(g, x.values * weight)

    return sc(prob.mu_n, lam**2), ScalarField(g, prob.c0.values.copy()), sc(prob.mu_zeta, lam**2)


def _run(prob: ScalingProblem, data, T, j):
    from .picard import prepare_data, solve_picard
    from .stepper import run_oracle
    from .trajectory import graded_times

    if prob.solver == "picard":
        return solve_picard(data, prob.indices, None, T=T, M=prob.M, j=j, halvings=0).trajectory
    n0, c0, z0, _ = prepare_data(data, j)
    return run_oracle((n0, c0, z0), graded_times(T, prob.M), prob.dt)


def check_scaling_covariance(prob: ScalingProblem, lam: float, tol: float = 1e-3) -> DiagnosticRecord:
    """Solve the base and rescaled problems and compare at matched nodes."""
    from .measures import UnresolvableMollifier, finest_resolvable_level

    if prob.grad_phi is not None and (np.any(prob.grad_phi.x.values) or np.any(prob.grad_phi.y.values)):
        return DiagnosticRecord(
            "scaling covariance", tol, math.nan, True, "scaling-invariance", "skipped: a fixed potential breaks the symmetry"
        )
    g = prob.c0.grid
    j = prob.j if prob.j is not None else finest_resolvable_level(g)
    if 1.0 / (lam * j) < 2.0 * g.scaled(lam).h * (1 - 1e-12):
        raise UnresolvableMollifier(f"rescaled mollifier 1/(lam j) is below 2h on {g.scaled(lam)}")
    base = _run(prob, (prob.mu_n, prob.c0, prob.mu_zeta), prob.T, j)
    if lam == 1:
        return DiagnosticRecord("scaling covariance (lambda=1)", tol, 0.0, True, "scaling-invariance")
    scaled = _run(prob, _scaled_data(prob, lam), prob.T / lam**2, lam * j)
    err = matched_discrepancy(scaled, base, weights=(lam**2, 1.0, lam**2))
    return DiagnosticRecord(f"scaling covariance (lambda={lam:g})", tol, err, err <= tol, "scaling-invariance")
