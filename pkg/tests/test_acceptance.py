"""Acceptance criteria 1-10: one PASS/FAIL line per criterion, then an assertion.

Run on its own with ``pytest tests/test_acceptance.py -v`` (lines are printed
past pytest's capture) or ``python tests/test_acceptance.py``.
"""

import math
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import emit, rel_l2, square_ring
from cnsflow.biot_savart import velocity_divergence, velocity_from_vorticity
from cnsflow.condition_a import PROP31_SET, REMARK_SET, KatoIndices, validate
from cnsflow.diagnostics import (
    ATOM_PLATEAU_L2,
    ScalingProblem,
    check_conservation_and_sign,
    check_scaling_covariance,
    check_weak_initial_convergence,
    check_zeta_bound,
    estimate_atomic_seminorm,
)
from cnsflow.field import GridSpec, ScalarField, heat_propagate, lp_norm
from cnsflow.measures import Atom, RadonMeasureSpec, TestFunctionSpec, mollifier_time, mollify, total_variation
from cnsflow.picard import prepare_data, solve_picard
from cnsflow.stepper import run_oracle

F = Fraction


def verdict(k: int, title: str, ok: bool, detail: str, capsys) -> None:
    emit(f"{'PASS' if ok else 'FAIL'} criterion {k}: {title} | {detail}", capsys)


# -- 1 ---------------------------------------------------------------------------------

# one perturbation per constraint, each pushing exactly that constraint past its boundary
PERTURBATIONS = [
    ("A1.1", REMARK_SET, {"a1": F(9, 17) + F(1, 100)}),
    ("A1.2", REMARK_SET, {"a2": F(1, 6) + F(1, 100)}),
    ("A1.3", REMARK_SET, {"a3": F(7, 15) - F(1, 100)}),
    ("A2.2", REMARK_SET, {"p2": F(2), "a2": F(0)}),
    ("A2.3", REMARK_SET, {"p3": F(2), "a3": F(1, 2)}),
    ("A2.3", REMARK_SET, {"p3": F(5, 4), "a3": F(1, 5)}),
    ("A3.2", REMARK_SET, {"p1": F(19, 10), "a1": F(9, 19)}),
    ("A4.4", REMARK_SET, {"a3": F(1, 2), "p3": F(2)}),
]


def _flip_names(base, changes):
    d = dict(zip(("p1", "p2", "p3", "a1", "a2", "a3"), (base.p1, base.p2, base.p3, base.a1, base.a2, base.a3)))
    d.update(changes)
    return set(validate(KatoIndices(**d)).failures())


def test_criterion_1_condition_a_fidelity(capsys):
    ok_sets = validate(REMARK_SET).passed and validate(PROP31_SET).passed
    wrong = []
    for name, base, changes in PERTURBATIONS:
        fails = _flip_names(base, changes)
        if name not in fails:
            wrong.append((name, sorted(fails)))
    # constraints that cannot be moved alone without breaking a criticality equality:
    # step off the critical line on purpose and check the named constraint is among the failures
    extra = {
        "A2.1": {"p1": F(4, 3), "a1": F(1, 4)},
        "A2.4": {"p1": F(1), "a1": F(0)},
        "A3.1": {"p2": F(2), "p3": F(1), "a2": F(0), "a3": F(0)},
        "A3.3": {"p1": F(17, 8), "p2": F(2), "a2": F(0)},
        "A3.4": {"p1": F(2), "p3": F(2), "a1": F(1, 2), "a3": F(1, 2)},
        "A4.1": {"a1": F(9, 10), "a2": F(1, 5)},
        "A4.2": {"a1": F(3, 5), "a3": F(2, 5)},
        "A4.3": {"a2": F(3, 5), "a3": F(2, 5)},
    }
    for name, changes in extra.items():
        fails = _flip_names(REMARK_SET, changes)
        if name not in fails:
            wrong.append((name, sorted(fails)))
    ok = ok_sets and not wrong
    verdict(1, "Condition A fidelity", ok, f"reference sets valid={ok_sets}, misnamed flips={wrong}", capsys)
    assert ok


# -- 2 ---------------------------------------------------------------------------------


def test_criterion_2_heat_measure_estimate(capsys):
    g = GridSpec(8.0, 256)
    # a spectrally sampled Dirac: the mollifier heat time 1/(4 j^2) is negligible next to 10 h^2
    delta = mollify(RadonMeasureSpec((Atom((0.0, 0.0), 1.0),)), 1e4, g, allow_subgrid=True)
    worst = 0.0
    for t in np.geomspace(10 * g.h**2, 0.1, 12):
        u = heat_propagate(delta, float(t))
        for q in (1.0, 2.0, 4.0, math.inf):
            e = 1.0 - 1.0 / q
            ref = (4 * math.pi) ** (-e) * (q ** (-1.0 / q) if math.isfinite(q) else 1.0)
            worst = max(worst, abs(t**e * lp_norm(u, q) - ref) / ref)
    ok = worst <= 1e-3
    verdict(2, "heat-measure estimate", ok, f"max relative error {worst:.3e} (tol 1e-3)", capsys)
    assert ok


# -- 3 ---------------------------------------------------------------------------------


def test_criterion_3_biot_savart_oracle(capsys):
    g = GridSpec(16.0, 256)
    s2, gamma = 1.0, 1.0
    X1, X2 = g.coords()
    r2 = X1**2 + X2**2
    zeta = ScalarField(g, gamma / (math.pi * s2) * np.exp(-r2 / s2))
    u = velocity_from_vorticity(zeta)
    r = np.sqrt(r2)
    with np.errstate(invalid="ignore", divide="ignore"):
        ref = gamma / (2 * math.pi * r) * (1 - np.exp(-r2 / s2))
        u_theta = (-X2 * u.x.values + X1 * u.y.values) / r
    band = (r >= 5 * g.h) & (r <= g.L / 8)
    err = float(np.max(np.abs(u_theta[band] - ref[band])) / np.max(np.abs(ref[band])))
    div = velocity_divergence(zeta)
    scale = float(np.max(u.magnitude().values)) / g.h
    div_rel = float(np.max(np.abs(div.values))) / scale
    ok = err <= 1e-3 and div_rel <= 1e-10
    verdict(3, "Biot-Savart oracle", ok, f"Lamb-Oseen sup-rel {err:.3e} (tol 1e-3), divergence {div_rel:.3e} (tol 1e-10)", capsys)
    assert ok


# -- 4 ---------------------------------------------------------------------------------


def test_criterion_4_picard_contraction(smooth_cfg, capsys):
    cfg = smooth_cfg
    s = 0.05

    def shrink(mu):
        return RadonMeasureSpec(mu.atoms, mu.filaments, mu.density * s)

    data = (shrink(cfg.mu_n), cfg.c0 * s, shrink(cfg.mu_zeta))
    t0 = time.time()
    # a tight tolerance so the loop runs long enough to observe successive contraction ratios
    sol = solve_picard(data, cfg.indices, None, T=0.2, tol=1e-13, M=16)
    elapsed = time.time() - t0
    eps_max = sol.budget.eps_max
    r = sol.contraction_ratios
    checks = {
        "seed <= eps_max/10": sol.seed_norm <= eps_max / 10,
        "converged": sol.converged,
        "ratios < 1": bool(r) and all(x < 1 for x in r),
        "ratios decreasing": len(r) >= 2 and all(b < a for a, b in zip(r, r[1:])),
        "residual <= 2e-6": sol.residual <= 2e-6,
        "ball containment": sol.ball_contained(),
        "runtime <= 5 min": elapsed <= 300,
    }
    ok = all(checks.values())
    detail = (
        f"seed {sol.seed_norm:.3e}, eps_max {eps_max:.3e}, ratios {[f'{x:.2e}' for x in r]}, "
        f"residual {sol.residual:.2e}, {elapsed:.1f}s, failed={[k for k, v in checks.items() if not v]}"
    )
    verdict(4, "Picard contraction", ok, detail, capsys)
    assert ok


# -- 5 ---------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def dual_solve(smooth_cfg):
    cfg = smooth_cfg
    t0 = time.time()
    sol = solve_picard(cfg.data, cfg.indices, None, T=0.2, M=16)
    n0, c0, z0, _ = prepare_data(cfg.data)
    oracle = run_oracle((n0, c0, z0), sol.trajectory.times, dt=1e-3)
    return sol, oracle, time.time() - t0


def test_criterion_5_dual_solver_agreement(smooth_cfg, dual_solve, capsys):
    cfg = smooth_cfg
    n0, c0, z0, _ = prepare_data(cfg.data)
    data_ok = (
        abs(n0.integral() - 0.1) < 1e-6 and abs(c0.sup() - 0.005) < 1e-3 * 0.005  # peak sits between grid nodes
        and abs(z0.integral() - 0.1) < 1e-6 and cfg.grad_phi is None
    )
    sol, oracle, elapsed = dual_solve
    worst = 0.0
    for i in range(sol.trajectory.M):
        for name in ("n", "c", "zeta"):
            worst = max(worst, rel_l2(sol.trajectory.component(name)[i], oracle.component(name)[i]))
    ok = data_ok and sol.converged and worst <= 1e-4 and elapsed <= 600
    verdict(5, "dual-solver agreement", ok, f"max matched-node relative L2 {worst:.3e} (tol 1e-4), {elapsed:.1f}s", capsys)
    assert ok


# -- 6 ---------------------------------------------------------------------------------


def test_criterion_6_conservation_ledger(dirac_runs, dual_solve, capsys):
    sol_smooth, oracle, _ = dual_solve
    runs = {name: sol.trajectory for name, (sol, _, _) in dirac_runs.items()}
    runs["smooth picard"] = sol_smooth.trajectory
    runs["smooth oracle"] = oracle
    failures, worst = [], {"mass": 0.0, "min n": 0.0, "c rise": 0.0}
    for name, traj in runs.items():
        recs = check_conservation_and_sign(traj, 1e-4, 1e-6, 1e-8)
        worst["mass"] = max(worst["mass"], recs[0].measured_value)
        worst["min n"] = min(worst["min n"], recs[1].measured_value)
        worst["c rise"] = max(worst["c rise"], recs[3].measured_value)
        failures += [f"{name}: {r.name}" for r in recs if not r.passed]
    converged = all(sol.converged for sol, _, _ in dirac_runs.values())
    ok = converged and not failures
    detail = f"worst mass drift {worst['mass']:.2e}, min n {worst['min n']:.2e}, ||c||_inf rise {worst['c rise']:.2e}; failures={failures}"
    verdict(6, "conservation/sign/maximum principle", ok, detail, capsys)
    assert ok


# -- 7 ---------------------------------------------------------------------------------


def test_criterion_7_scaling_covariance(smooth_cfg, capsys):
    cfg = smooth_cfg
    t0 = time.time()
    out = {}
    for solver in ("picard", "oracle"):
        prob = ScalingProblem(cfg.mu_n, cfg.c0, cfg.mu_zeta, cfg.indices, T=0.2, M=16, solver=solver, dt=1e-3)
        out[solver] = check_scaling_covariance(prob, 2.0, 1e-3)
    elapsed = time.time() - t0
    ok = all(r.passed for r in out.values()) and elapsed <= 600
    detail = ", ".join(f"{k} {r.measured_value:.2e}" for k, r in out.items()) + f" (tol 1e-3), {elapsed:.1f}s"
    verdict(7, "scaling covariance lambda=2", ok, detail, capsys)
    assert ok


# -- 8 ---------------------------------------------------------------------------------


def test_criterion_8_vorticity_bound(dirac_runs, dual_solve, capsys):
    runs = [(name, sol.trajectory, gp, data[1]) for name, (sol, data, gp) in dirac_runs.items()]
    sol_smooth, oracle, _ = dual_solve
    runs += [("smooth picard", sol_smooth.trajectory, None, sol_smooth.seed.initial[1])]
    runs += [("smooth oracle", oracle, None, oracle.initial[1])]
    lines, ok = [], True
    for name, traj, gp, c0 in runs:
        assert c0.sup() <= 1 / 96
        for p in (4.0, 1.5):
            r = check_zeta_bound(traj, p, 0.0, gp)
            ok &= r.passed
            lines.append(f"{name} p={p:g}: {r.measured_value:.3e} <= {r.claimed_bound:.3e}")
    verdict(8, "vorticity Lp bound", ok, "; ".join(lines), capsys)
    assert ok


# -- 9 ---------------------------------------------------------------------------------


def test_criterion_9_atomic_seminorm_dichotomy(capsys):
    g = GridSpec(8.0, 256)
    j = 8.0
    tau = mollifier_time(j)
    atom = RadonMeasureSpec((Atom((0.1, -0.2), 1.0),))
    r = 0.5
    ring = RadonMeasureSpec(filaments=(square_ring(r, 1.0 / (4 * math.sqrt(2) * r)),))
    assert abs(total_variation(ring) - 1.0) < 1e-12
    est_atom = estimate_atomic_seminorm(mollify(atom, j, g), 2.0, 0.5, tau=tau)
    est_ring = estimate_atomic_seminorm(mollify(ring, j, g), 2.0, 0.5, tau=tau)
    ok = est_atom >= 0.1 * ATOM_PLATEAU_L2 and est_ring <= 0.01 * ATOM_PLATEAU_L2
    detail = f"atom {est_atom:.4f} (>= {0.1 * ATOM_PLATEAU_L2:.4f}), filament {est_ring:.2e} (<= {0.01 * ATOM_PLATEAU_L2:.4f})"
    verdict(9, "atomic-seminorm dichotomy", ok, detail, capsys)
    assert ok


# -- 10 --------------------------------------------------------------------------------


def test_criterion_10_weak_initial_convergence(dirac_runs, capsys):
    lines, ok = [], True
    for name, (sol, data, _) in dirac_runs.items():
        psi = TestFunctionSpec(tuple(data[0].atoms[0].x), 0.5)
        recs, table = check_weak_initial_convergence(sol.trajectory, data[0], psi, first=5)
        ok &= all(r.passed for r in recs)
        s = table[0]["series"]
        lines.append(f"{name}: {s[0]:.3e} .. {s[-1]:.3e} (floor {table[0]['floor']:.3e})")
    verdict(10, "weak initial convergence", ok, "; ".join(lines), capsys)
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
