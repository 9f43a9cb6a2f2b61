"""Command-line entry point: ``cnsflow <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .condition_a import KatoIndices, contraction_budget, sweep_indices, validate
from .config import ConfigError, RunConfig, load_config
from .diagnostics import (
    DiagnosticLedger,
    DiagnosticRecord,
    ATOM_PLATEAU_L2,
    ScalingProblem,
    check_conservation_and_sign,
    check_scaling_covariance,
    check_weak_initial_convergence,
    check_zeta_bound,
    estimate_atomic_seminorm,
)
from .field import lp_norm
from .measures import RadonMeasureSpec, TestFunctionSpec, UnresolvableMollifier, atomic_tv, mollifier_time, mollify, total_variation
from .picard import PicardDivergence, prepare_data, solve_picard
from .stepper import CFLViolation, run_oracle
from .trajectory import graded_times

log = logging.getLogger("cnsflow")


# -- helpers ------------------------------------------------------------------------


def _manifest(cfg: RunConfig | None, command: str, extra: dict | None = None) -> dict:
    return {
        "command": command,
        "config_hash": cfg.hash if cfg else None,
        "config": cfg.raw if cfg else None,
        "versions": {
            "cnsflow": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        **(extra or {}),
    }


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=float))


def _run_picard(cfg: RunConfig, out: Path):
    sol = solve_picard(
        cfg.data,
        cfg.indices,
        cfg.grad_phi,
        T=cfg.T,
        tol=cfg.tol["picard_tol"],
        max_iter=int(cfg.tol["max_iter"]),
        M=cfg.M,
        j=cfg.j,
    )
    sol.write_csv(out / "picard_iterations.csv")
    _write_json(out / "picard_summary.json", sol.summary())
    sol.trajectory.save(out / "picard")
    return sol


def _run_oracle(cfg: RunConfig, out: Path, T: float | None = None):
    n0, c0, z0, _ = prepare_data(cfg.data, cfg.j)
    traj = run_oracle((n0, c0, z0), graded_times(T or cfg.T, cfg.M), cfg.dt, cfg.grad_phi)
    traj.save(out / "oracle")
    return traj


def _default_psi(cfg: RunConfig):
    if cfg.psi:
        return list(cfg.psi)
    if cfg.mu_n.atoms:
        return [TestFunctionSpec(tuple(cfg.mu_n.atoms[0].x), 0.5)]
    return [TestFunctionSpec((0.0, 0.0), 0.5)]


def _trajectory_checks(cfg: RunConfig, traj, label: str) -> list[DiagnosticRecord]:
    t = cfg.tol
    recs = [
        DiagnosticRecord(f"[{label}] {r.name}", r.claimed_bound, r.measured_value, r.passed, r.anchor, r.note)
        for r in check_conservation_and_sign(traj, t["mass"], t["sign"], t["cinf"])
    ]
    if cfg.c0.sup() <= 1.0 / 96.0:
        for p in cfg.zeta_p:
            r = check_zeta_bound(traj, p, 0.0, cfg.grad_phi)
            recs.append(DiagnosticRecord(f"[{label}] {r.name}", r.claimed_bound, r.measured_value, r.passed, r.anchor, r.note))
    else:
        recs.append(
            DiagnosticRecord(f"[{label}] vorticity bound", 1 / 96, cfg.c0.sup(), True, "vorticity-Lp-bound", "skipped: ||c0||_inf > 1/96")
        )
    wr, _ = check_weak_initial_convergence(traj, cfg.mu_n, _default_psi(cfg))
    for r in wr:
        recs.append(DiagnosticRecord(f"[{label}] {r.name}", r.claimed_bound, r.measured_value, r.passed, r.anchor, r.note))
    return recs


def _atomic_record(cfg: RunConfig) -> DiagnosticRecord:
    # an integrable density has no atomic part, so only atoms and filaments are probed
    _, _, _, j = prepare_data(cfg.data, cfg.j)
    singular = RadonMeasureSpec(cfg.mu_n.atoms, cfg.mu_n.filaments)
    est = estimate_atomic_seminorm(mollify(singular, j, cfg.grid), 2.0, 0.5, tau=mollifier_time(j))
    weights = np.array([a.w for a in cfg.mu_n.atoms])
    if weights.size:
        target = 0.1 * ATOM_PLATEAU_L2 * float(np.sqrt(np.sum(weights**2)))
        return DiagnosticRecord("atomic seminorm of n0 (atoms present)", target, est, est >= target, "atomic-seminorm", ">= 0.1 x atom plateau")
    target = 0.01 * ATOM_PLATEAU_L2 * total_variation(cfg.mu_n)
    return DiagnosticRecord("atomic seminorm of n0 (no atoms)", target, est, est <= target, "atomic-seminorm", "<= 0.01 x plateau of equal mass")


def _compare_records(cfg: RunConfig, a, b, out: Path) -> DiagnosticRecord:
    worst = 0.0
    with (out / "compare.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "t", "component", "rel_l2"])
        for i, t in enumerate(a.times):
            for name in ("n", "c", "zeta"):
                fa, fb = a.component(name)[i], b.component(name)[i]
                den = lp_norm(fa, 2)
                num = lp_norm(fa - fb, 2)
                rel = num / den if den > 0 else (0.0 if num == 0 else math.inf)
                worst = max(worst, rel)
                w.writerow([i, repr(float(t)), name, repr(rel)])
    tol = cfg.tol["compare"]
    return DiagnosticRecord("picard vs oracle, max relative L2", tol, worst, worst <= tol, "plumbing")


def _finish(ledger: DiagnosticLedger, cfg: RunConfig, out: Path, command: str, extra=None) -> int:
    out.mkdir(parents=True, exist_ok=True)
    ledger.to_json(out / "ledger.json")
    ledger.to_csv(out / "ledger.csv")
    _write_json(out / "manifest.json", _manifest(cfg, command, {"ledger_passed": ledger.passed, **(extra or {})}))
    for r in ledger.records:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: measured {r.measured_value:.4g} vs {r.claimed_bound:.4g}")
    print(f"ledger: {'PASS' if ledger.passed else 'FAIL'} ({out / 'ledger.json'})")
    return ledger.exit_code()


# -- subcommands --------------------------------------------------------------------


def _read_indices(args) -> KatoIndices:
    if args.indices:
        return KatoIndices(*args.indices)
    if args.json:
        raw = json.loads(Path(args.json).read_text())
        vals = raw["indices"] if isinstance(raw, dict) else raw
        return KatoIndices(*vals)
    raise ConfigError("$.indices", "give --indices or --json")


def cmd_validate_indices(args) -> int:
    if args.sweep:
        vals = [v.strip() for v in args.sweep.split(",") if v.strip()]
        found = sweep_indices(vals)
        print(json.dumps([i.as_list() for i in found], indent=1))
        return 0 if found else 1
    idx = _read_indices(args)
    rep = validate(idx)
    out = rep.to_dict()
    if rep.passed and args.budget:
        out["budget"] = contraction_budget(idx, args.grad_phi_l2, args.c_master).to_dict()
    print(rep.table())
    print(json.dumps(out, indent=1, default=float))
    if args.out:
        _write_json(Path(args.out), out)
    return 0 if rep.passed else 1


def cmd_simulate(args, cfg: RunConfig) -> int:
    out = Path(args.out or cfg.output)
    ledger = DiagnosticLedger()
    extra = {}
    if cfg.solver in ("picard", "both"):
        sol = _run_picard(cfg, out)
        extra["picard"] = sol.summary()
        ledger.add(DiagnosticRecord("picard converged", cfg.tol["picard_tol"], sol.increments[-1], sol.converged, "plumbing"))
        ledger.add(_trajectory_checks(cfg, sol.trajectory, "picard"))
    if cfg.solver in ("oracle", "both"):
        traj = _run_oracle(cfg, out)
        ledger.add(_trajectory_checks(cfg, traj, "oracle"))
    return _finish(ledger, cfg, out, "simulate", extra)


def cmd_picard(args, cfg: RunConfig) -> int:
    out = Path(args.out or cfg.output)
    sol = _run_picard(cfg, out)
    ledger = DiagnosticLedger()
    ledger.add(DiagnosticRecord("picard converged", cfg.tol["picard_tol"], sol.increments[-1], sol.converged, "plumbing"))
    ledger.add(DiagnosticRecord("fixed-point residual", 2 * cfg.tol["picard_tol"], sol.residual, sol.residual <= 2 * cfg.tol["picard_tol"], "contraction-lemma"))
    ledger.add(DiagnosticRecord("ball containment (2 K1 eps)", sol.ball_radius, max(sol.iterate_norms), sol.ball_contained(), "contraction-lemma"))
    return _finish(ledger, cfg, out, "picard", {"picard": sol.summary()})


def cmd_verify(args, cfg: RunConfig) -> int:
    out = Path(args.out or cfg.output)
    ledger = DiagnosticLedger()
    sol = _run_picard(cfg, out)
    ledger.add(DiagnosticRecord("picard converged", cfg.tol["picard_tol"], sol.increments[-1], sol.converged, "plumbing"))
    ledger.add(_trajectory_checks(cfg, sol.trajectory, "picard"))
    ledger.add(_atomic_record(cfg))
    if cfg.grad_phi is None and not args.skip_scaling:
        prob = ScalingProblem(cfg.mu_n, cfg.c0, cfg.mu_zeta, cfg.indices, T=cfg.T, M=cfg.M, j=cfg.j)
        ledger.add(check_scaling_covariance(prob, cfg.scale_lambda, cfg.tol["scaling"]))
    return _finish(ledger, cfg, out, "verify", {"picard": sol.summary(), "atomic_tv_n": atomic_tv(cfg.mu_n)})


def cmd_compare(args, cfg: RunConfig) -> int:
    out = Path(args.out or cfg.output)
    sol = _run_picard(cfg, out)
    traj = _run_oracle(cfg, out, T=sol.T)
    ledger = DiagnosticLedger()
    ledger.add(_compare_records(cfg, sol.trajectory, traj, out))
    return _finish(ledger, cfg, out, "compare", {"picard": sol.summary()})


def cmd_scale_check(args, cfg: RunConfig) -> int:
    out = Path(args.out or cfg.output)
    lam = args.lam if args.lam is not None else cfg.scale_lambda
    solver = "oracle" if cfg.solver == "oracle" else "picard"
    prob = ScalingProblem(cfg.mu_n, cfg.c0, cfg.mu_zeta, cfg.indices, T=cfg.T, M=cfg.M, solver=solver, dt=cfg.dt, grad_phi=cfg.grad_phi, j=cfg.j)
    ledger = DiagnosticLedger().add(check_scaling_covariance(prob, lam, cfg.tol["scaling"]))
    return _finish(ledger, cfg, out, "scale-check", {"lambda": lam})


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cnsflow", description="Mild solutions of a chemotaxis-Navier-Stokes system with measure data.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate-indices", help="check an exponent sextuple and print the contraction budget")
    v.add_argument("--indices", nargs=6, metavar=("P1", "P2", "P3", "A1", "A2", "A3"))
    v.add_argument("--json", help="JSON file with an 'indices' list")
    v.add_argument("--budget", action="store_true", help="also print the contraction budget")
    v.add_argument("--grad-phi-l2", type=float, default=0.0)
    v.add_argument("--c-master", type=float, default=1.0)
    v.add_argument("--sweep", help="comma-separated exponents; list admissible critical sextuples")
    v.add_argument("--out", help="write the report JSON here")

    for name, helptext in (
        ("simulate", "run the configured solver(s) and the trajectory checks"),
        ("picard", "run the Picard iteration and report contraction"),
        ("verify", "run Picard and every diagnostic"),
        ("compare", "run both solvers and report matched-node discrepancies"),
        ("scale-check", "check covariance under the parabolic scaling"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides the config)")
        if name == "scale-check":
            p.add_argument("--lam", type=float)
        if name == "verify":
            p.add_argument("--skip-scaling", action="store_true")
    return ap


COMMANDS = {
    "simulate": cmd_simulate,
    "picard": cmd_picard,
    "verify": cmd_verify,
    "compare": cmd_compare,
    "scale-check": cmd_scale_check,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate-indices":
            return cmd_validate_indices(args)
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as e:
        print(f"config error at {e}", file=sys.stderr)
        return 2
    except (UnresolvableMollifier, CFLViolation, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except PicardDivergence as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
