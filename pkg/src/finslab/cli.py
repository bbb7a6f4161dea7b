"""Command line entry point.

Subcommands: ``constants`` (norm-dependent constants as JSON + table),
``radial`` (Wulff-ball sweep with optional profile dumps), ``planar``
(polygonal-domain sweep with field dumps and concentration diagnostics),
``sweep`` (either solver, plus extrapolation and gnuplot script), ``verify``
(the full property suite).  Exit codes: 0 success, 1 verification failure,
2 config error, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import geometry, planar, radial, sweep
from .config import ConfigError, load_config
from .mesh import MeshError, domain_mesh
from .norms import NormError, check_assumptions, parse_norm, verify_identities
from .planar import NonConvergenceError, SolveConfig, SolverError
from .radial import J0_FIRST_ZERO, ShootingError

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _common_flags(sub):
    sub.add_argument("--config", help="key = value config file")
    sub.add_argument("--norm", help="euclidean | ellipse:a11,a12,a22[,...] | lq:q")
    sub.add_argument("--dim", type=int)
    sub.add_argument("--p-list", dest="p_list", help="comma separated, increasing, > 1")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--threads", type=int, help="cap for the per-p work pool")
    sub.add_argument("--rtol", type=float, help="ODE relative tolerance")
    sub.add_argument("--grad-tol", dest="grad_tol", type=float)
    sub.add_argument("--mesh-h", dest="mesh_h", type=float)
    sub.add_argument("--radius", type=float, help="Wulff ball radius (radial)")
    sub.add_argument("--model", choices=["best", "logp", "p", "plogp"])
    sub.add_argument("--budget", type=int, help="multistart budget")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="finslab",
        description="Least energy solutions of the anisotropic Lane-Emden "
                    "problem and their large-exponent asymptotics.")
    subs = ap.add_subparsers(dest="command", required=True)
    for name, descr in (
        ("constants", "compute the geometric constants of a norm"),
        ("radial", "Wulff-ball sweep by 1-D shooting"),
        ("planar", "polygonal-domain sweep by P1 minimization"),
        ("sweep", "either solver plus extrapolation outputs"),
        ("verify", "run the full property suite"),
    ):
        sub = subs.add_parser(name, help=descr)
        _common_flags(sub)
        if name == "radial":
            sub.add_argument("--dump-profiles", action="store_true")
        if name == "planar":
            sub.add_argument("--domain", help="square | disk | polygon:<file>")
            sub.add_argument("--dump-fields", action="store_true")
        if name == "sweep":
            sub.add_argument("--solver", choices=["radial", "planar"], default="radial")
            sub.add_argument("--domain", help="square | disk | polygon:<file>")
    return ap


def _config_from_args(args):
    overrides = {}
    for key in ("norm", "dim", "seed", "out", "threads", "rtol", "grad_tol",
                "mesh_h", "radius", "model", "budget", "domain"):
        if hasattr(args, key) and getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if getattr(args, "p_list", None):
        overrides["p_list"] = tuple(float(t) for t in args.p_list.split(","))
    return load_config(args.config, overrides)


def _json_dump(payload, path):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _pmap(func, items, threads):
    if threads <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


# -- subcommands -------------------------------------------------------------


def cmd_constants(cfg):
    norm = cfg.norm_model()
    report = geometry.limit_constants(norm, budget=cfg.budget, seed=cfg.seed)
    os.makedirs(cfg.out, exist_ok=True)
    _json_dump(report.as_dict(), os.path.join(cfg.out, "constants.json"))
    rows = [(k, v) for k, v in report.as_dict().items()
            if k not in ("flux_monotonicity_pair",)]
    width = max(len(k) for k, _ in rows)
    print(f"constants for {report.norm_spec} (dim {report.dim})")
    for k, v in rows:
        print(f"  {k:<{width}}  {v}")
    return EXIT_OK


def _p_tag(p):
    return f"{int(round(p)):03d}" if abs(p - round(p)) < 1e-12 else \
        repr(float(p)).replace(".", "_")


def cmd_radial(cfg, dump_profiles=False):
    norm = cfg.norm_model()
    os.makedirs(cfg.out, exist_ok=True)

    def solve_one(p):
        return sweep._radial_record(norm, p, cfg.radius, cfg.rtol)

    outcomes = _pmap(solve_one, cfg.p_list, cfg.threads)
    records = [rec for rec, _ in outcomes]
    sweep.emit_csv(records, os.path.join(cfg.out, "radial.csv"))
    for line in open(os.path.join(cfg.out, "radial.csv"), encoding="utf-8"):
        print(line.rstrip())
    if dump_profiles:
        for (rec, sol), p in zip(outcomes, cfg.p_list):
            prof = sol.profile
            path = os.path.join(cfg.out, f"phi_p{_p_tag(p)}.csv")
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write("r,phi,dphi\n")
                for r, f, df in zip(prof.r, prof.phi, prof.dphi):
                    fh.write(f"{float(r)!r},{float(f)!r},{float(df)!r}\n")
    return EXIT_OK


def cmd_planar(cfg, dump_fields=False):
    norm = cfg.norm_model()
    scfg = SolveConfig(grad_tol=cfg.grad_tol, max_iters=cfg.max_iters, seed=cfg.seed)
    result = sweep.run_sweep("planar", norm, cfg.p_list, domain=cfg.domain,
                             mesh_h=cfg.mesh_h, planar_config=scfg,
                             keep_solutions=True)
    os.makedirs(cfg.out, exist_ok=True)
    sweep.emit_csv(result.records, os.path.join(cfg.out, "planar.csv"))
    if result.failures:
        print("failures:", result.failures, file=sys.stderr)
        return EXIT_SOLVER
    fields, ps = [], []
    for p in cfg.p_list:
        field = result.fields[p]
        Cp = next(r.Cp for r in result.records if r.p == p)
        fields.append(planar.least_energy_solution(field, Cp, p))
        ps.append(p)
    geo = geometry.limit_constants(norm, budget=cfg.budget, seed=cfg.seed)
    diag = planar.blowup_diagnostics(fields, norm, ps, geometry=geo)
    _json_dump(diag, os.path.join(cfg.out, "diagnostics.json"))
    if dump_fields:
        for p, field in zip(ps, fields):
            path = os.path.join(cfg.out, f"field_p{_p_tag(p)}.dat")
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                for (x, y), u in zip(field.mesh.vertices, field.values):
                    fh.write(f"{float(x)!r} {float(y)!r} {float(u)!r}\n")
    for row in diag:
        print(f"p={row['p']:g} peak=({row['peak_x']:.4f},{row['peak_y']:.4f}) "
              f"dist={row['peak_dist']:.4f} maxima={row['local_maxima']} "
              f"gamma(0.2 diam)={row['gamma_020']:.4f}")
    return EXIT_OK


def cmd_sweep(cfg, solver):
    norm = cfg.norm_model()
    scfg = SolveConfig(grad_tol=cfg.grad_tol, max_iters=cfg.max_iters, seed=cfg.seed)
    result = sweep.run_sweep(solver, norm, cfg.p_list, domain=cfg.domain,
                             radius=cfg.radius, rtol=cfg.rtol,
                             mesh_h=cfg.mesh_h, planar_config=scfg)
    targets = {"energy limit": geometry.energy_limit(norm)}
    sweep.write_sweep_outputs(result, cfg.out, model=cfg.model, targets=targets)
    print(f"wrote sweep.csv, sweep.json, extrapolation.json, sweep.plt to {cfg.out}")
    if result.failures:
        print("failures:", result.failures, file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


# -- verification suite -------------------------------------------------------


def verify_all(cfg):
    """Cross-module oracle checks; returns (exit_code, report dict)."""
    checks = {}

    def record(name, passed, **details):
        checks[name] = {"passed": bool(passed), **details}

    norms = {
        "euclidean": parse_norm("euclidean", dim=2),
        "ellipse": parse_norm("ellipse:4,0,1"),
        "lq2.5-numeric": parse_norm("lq:2.5", dim=2, dual_mode="numeric"),
    }
    for name, norm in norms.items():
        tol = 1e-5 if norm.dual_mode == "numeric" else 1e-8
        try:
            rep = verify_identities(norm, samples=1000, tol=tol, seed=cfg.seed)
            record(f"identities:{name}", True, max_residual=rep.max_residual())
        except NormError as exc:
            record(f"identities:{name}", False, error=str(exc))

    kappa_e = geometry.wulff_volume(norms["euclidean"])
    record("kappa:euclidean", abs(kappa_e - np.pi) < 1e-8, value=kappa_e)
    kappa_a = geometry.wulff_volume(norms["ellipse"])
    record("kappa:ellipse", abs(kappa_a - 2 * np.pi) < 1e-6, value=kappa_a)
    beta2 = geometry.moser_exponent(norms["euclidean"], kappa_e)
    record("moser_exponent:euclidean", abs(beta2 - 4 * np.pi) < 1e-7, value=beta2)

    d2 = geometry.d_constant(norms["euclidean"], budget=16, seed=cfg.seed)
    record("flux_monotonicity:euclidean2", abs(d2.value - 1.0) < 1e-6, value=d2.value)
    d3 = geometry.d_constant(parse_norm("euclidean", dim=3), budget=24, seed=cfg.seed)
    record("flux_monotonicity:euclidean3", d3.value <= 0.5 + 1e-4, value=d3.value)

    coarea, direct = geometry.moser_energy_check(0.2, 1.0, norms["ellipse"])
    record("moser_energy:ellipse", abs(coarea - 1) < 1e-10 and abs(direct - 1) < 1e-4,
           coarea=coarea, direct=direct)

    try:
        prof = radial.shoot(2, 1.0, rtol=cfg.rtol)
        record("bessel_zero", abs(prof.R1 - J0_FIRST_ZERO) < 1e-6, R1=prof.R1)
    except ShootingError as exc:
        record("bessel_zero", False, error=str(exc))

    poh = {}
    for p in (5.0, 50.0):
        sol = radial.solve_radial(norms["euclidean"], p, rtol=cfg.rtol)
        poh[p] = radial.pohozaev_residual(sol)
    record("pohozaev", all(v <= 2e-2 for v in poh.values()),
           residuals={str(k): v for k, v in poh.items()})

    sol_r = radial.solve_radial(norms["euclidean"], 5.0, rtol=cfg.rtol)
    sol_2r = radial.solve_radial(norms["euclidean"], 5.0, R=2.0, rtol=cfg.rtol)
    expected = sol_r.Cp * 2.0 ** (-4.0 / 6.0)      # Cp(2R) = Cp(R) 2^(-N^2/(p+1))
    record("scaling_law", abs(sol_2r.Cp - expected) / expected < 1e-6,
           cp_R=sol_r.Cp, cp_2R=sol_2r.Cp)

    try:
        mesh = domain_mesh("disk", 1.0 / 24.0)
        scfg = SolveConfig(grad_tol=cfg.grad_tol, seed=cfg.seed)
        lam, _, _ = planar.first_eigenvalue(mesh, norms["euclidean"], scfg)
        record("disk_lambda1", abs(lam - J0_FIRST_ZERO ** 2) / J0_FIRST_ZERO ** 2 < 0.02,
               value=lam)
        warm = None
        cross = {}
        for p in (3.0, 5.0, 10.0):
            field, Cp, _ = planar.minimize_cp(mesh, norms["euclidean"],
                                              scfg.replace(p=p), u0=warm)
            warm = field.values
            rad = radial.solve_radial(norms["euclidean"], p, rtol=cfg.rtol)
            cross[p] = abs(Cp - rad.Cp) / rad.Cp
        record("cross_solver", all(v < 0.03 for v in cross.values()),
               rel_errors={str(k): v for k, v in cross.items()})
    except (SolverError, MeshError) as exc:
        record("disk_lambda1", False, error=str(exc))

    try:
        planar.minimize_cp(domain_mesh("square", 0.25), parse_norm("lq:4", dim=2),
                           SolveConfig(p=5.0))
        record("lq4_refused", False, error="degenerate norm was not refused")
    except SolverError as exc:
        record("lq4_refused", True, message=str(exc))

    passed = all(c["passed"] for c in checks.values())
    return (EXIT_OK if passed else EXIT_VERIFY), checks


def cmd_verify(cfg):
    code, checks = verify_all(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    _json_dump(checks, os.path.join(cfg.out, "verify.json"))
    for name, c in checks.items():
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {name}")
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
    except (ConfigError, NormError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "constants":
            return cmd_constants(cfg)
        if args.command == "radial":
            return cmd_radial(cfg, dump_profiles=args.dump_profiles)
        if args.command == "planar":
            return cmd_planar(cfg, dump_fields=args.dump_fields)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.solver)
        if args.command == "verify":
            return cmd_verify(cfg)
    except (NonConvergenceError, ShootingError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (MeshError, NormError, ConfigError, SolverError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
