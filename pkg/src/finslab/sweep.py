"""Exponent sweeps across solvers, asymptotic extrapolation and table output.

One SweepRecord per exponent p collects every observable the asymptotic
statements constrain: the constrained minimum Cp, the energy of the scaled
solution, the p- and (p+1)-masses, the sup norm, the peak-scale mass, the
Green-function defect, and (planar only) peak location diagnostics.  The
``pN1*`` columns are the p^(N-1)-scaled versions whose limits are finite.

Extrapolation fits value = a + b * g(p) for g in {1/log p, 1/p, log p / p}
by least squares on the largest-p half of the series.  The measured
convergence of the scaled energies is ~log p / p (the inradius factor in the
energy upper bound contributes ~1/p), so by default all three models are
fitted and the smallest-residual one is selected; a specific model can be
forced.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os

import numpy as np

from . import geometry, planar, radial
from .mesh import Mesh, domain_mesh
from .norms import FinslerNorm

CSV_FIELDS = ("p", "Cp", "pN1Cp", "energy", "pN1energy", "massp1", "pN1massp1",
              "umax", "lambdap", "plambdap", "L0est", "dingmass", "greensup",
              "peakdist", "gammahat")


@dataclasses.dataclass
class SweepRecord:
    p: float
    Cp: float = None
    pN1Cp: float = None
    energy: float = None
    pN1energy: float = None
    massp1: float = None
    pN1massp1: float = None
    umax: float = None
    lambdap: float = None
    plambdap: float = None
    L0est: float = None
    dingmass: float = None
    greensup: float = None
    peakdist: float = None
    gammahat: float = None

    def as_row(self):
        return [getattr(self, f) for f in CSV_FIELDS]


@dataclasses.dataclass
class SweepResult:
    solver: str
    norm_spec: str
    domain: str
    records: list
    failures: list                  # (p, message) pairs
    profiles: dict = dataclasses.field(default_factory=dict)
    fields: dict = dataclasses.field(default_factory=dict)

    def series(self, name):
        ps, vs = [], []
        for rec in self.records:
            v = getattr(rec, name)
            if v is not None and np.isfinite(v):
                ps.append(rec.p)
                vs.append(v)
        return np.asarray(ps), np.asarray(vs)


def _radial_record(norm: FinslerNorm, p, radius, rtol, annulus=(0.3, 0.9)):
    sol = radial.solve_radial(norm, p, R=radius, rtol=rtol)
    N = norm.dim
    resc = radial.rescaled_profile(sol)
    rec = SweepRecord(
        p=float(p),
        Cp=sol.Cp, pN1Cp=p ** (N - 1) * sol.Cp,
        energy=sol.energy, pN1energy=p ** (N - 1) * sol.energy,
        massp1=sol.mass_p1, pN1massp1=p ** (N - 1) * sol.mass_p1,
        umax=sol.umax,
        lambdap=sol.lambda_p, plambdap=p * sol.lambda_p,
        L0est=resc.L0_estimate,
        dingmass=resc.mass,
        greensup=radial.green_compare(sol, annulus[0] * radius, annulus[1] * radius),
    )
    return rec, sol


def _planar_record(mesh: Mesh, norm: FinslerNorm, p, cfg: planar.SolveConfig,
                   warm=None, disk_radius=None):
    field, Cp, info = planar.minimize_cp(mesh, norm, cfg.replace(p=p), u0=warm)
    up = planar.least_energy_solution(field, Cp, p)
    energy = planar.assemble_energy(up, norm)
    massp1 = planar.lumped_integral(mesh, up.values, p + 1.0)
    lam = planar.lumped_integral(mesh, up.values, p)
    diag = planar.blowup_diagnostics([up], norm, [p])[0]
    rec = SweepRecord(
        p=float(p),
        Cp=Cp, pN1Cp=p * Cp,
        energy=energy, pN1energy=p * energy,
        massp1=massp1, pN1massp1=p * massp1,
        umax=up.max(),
        lambdap=lam, plambdap=p * lam,
        L0est=diag["L0_estimate"],
        peakdist=diag["peak_dist"],
        gammahat=diag["gamma_020"],
    )
    if disk_radius is not None:
        s = np.linalg.norm(mesh.vertices, axis=1)
        ring = (s >= 0.3 * disk_radius) & (s <= 0.9 * disk_radius)
        if np.any(ring):
            kappa = geometry.wulff_volume(norm)
            G = (2.0 * kappa) ** -1.0 * np.log(disk_radius / s[ring])
            rec.greensup = float(np.max(np.abs(up.values[ring] / lam - G)))
    return rec, field


def run_sweep(solver, norm: FinslerNorm, p_list, domain="disk", radius=1.0,
              rtol=1e-8, mesh_h=1 / 32, planar_config=None, keep_solutions=False):
    """One record per exponent; per-p failures are recorded and skipped.

    ``solver`` is "radial" (Wulff ball of ``radius``) or "planar"
    (``domain`` in {square, disk, polygon:<file>}); the planar path uses
    p-continuation warm starts.
    """
    p_list = list(p_list)
    if any(p <= 1 for p in p_list) or sorted(p_list) != p_list:
        raise ValueError("p list must be increasing with every p > 1")
    result = SweepResult(solver=solver, norm_spec=norm.spec(),
                         domain=domain if solver == "planar" else f"wulff:{radius}",
                         records=[], failures=[])
    if solver == "radial":
        for p in p_list:
            try:
                rec, sol = _radial_record(norm, p, radius, rtol)
                result.records.append(rec)
                if keep_solutions:
                    result.profiles[p] = sol
            except Exception as exc:   # noqa: BLE001 - per-p failures recorded
                result.failures.append((p, f"{type(exc).__name__}: {exc}"))
    elif solver == "planar":
        mesh = domain_mesh(domain, mesh_h)
        cfg = planar_config or planar.SolveConfig()
        warm = None
        disk_radius = 1.0 if domain == "disk" else None
        for p in p_list:
            try:
                rec, field = _planar_record(mesh, norm, p, cfg, warm=warm,
                                            disk_radius=disk_radius)
                result.records.append(rec)
                if cfg.continuation:
                    warm = field.values
                if keep_solutions:
                    result.fields[p] = field
            except Exception as exc:   # noqa: BLE001
                result.failures.append((p, f"{type(exc).__name__}: {exc}"))
    else:
        raise ValueError(f"unknown solver {solver!r}")
    return result


# -- extrapolation -----------------------------------------------------------

MODELS = {
    "logp": ("a + b/log p", lambda p: 1.0 / np.log(p)),
    "p": ("a + b/p", lambda p: 1.0 / p),
    "plogp": ("a + b log p/p", lambda p: np.log(p) / p),
}


@dataclasses.dataclass(frozen=True)
class ExtrapolationResult:
    model: str
    limit: float
    slope: float
    residual: float
    points_used: int


def extrapolate(p_values, values, model="plogp", use_tail=True):
    """Least-squares a + b g(p) on the largest-p half; returns the limit a.

    Raises on fewer than 4 series points or an ill-conditioned design.
    """
    p_values = np.asarray(p_values, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(p_values) < 4:
        raise ValueError("extrapolation needs at least 4 points")
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {sorted(MODELS)}")
    order = np.argsort(p_values)
    p_values, values = p_values[order], values[order]
    if use_tail:
        half = len(p_values) - len(p_values) // 2
        p_values, values = p_values[-half:], values[-half:]
    x = MODELS[model][1](p_values)
    design = np.column_stack([np.ones_like(x), x])
    cond = np.linalg.cond(design)
    if cond > 1e12:
        raise ValueError(f"ill-conditioned extrapolation fit (cond {cond:.2e})")
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    resid = float(np.sqrt(np.mean((design @ coef - values) ** 2)))
    return ExtrapolationResult(model=model, limit=float(coef[0]),
                               slope=float(coef[1]), residual=resid,
                               points_used=len(p_values))


def extrapolate_best(p_values, values):
    """Fit every model and return (selected, {model: fit}) by least residual."""
    fits = {name: extrapolate(p_values, values, model=name) for name in MODELS}
    best = min(fits.values(), key=lambda f: f.residual)
    return best, fits


# -- output ------------------------------------------------------------------


def _fmt(value):
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return ""
    return repr(float(value))


def emit_csv(records, path):
    lines = [",".join(CSV_FIELDS)]
    for rec in sorted(records, key=lambda r: r.p):
        lines.append(",".join(_fmt(v) for v in rec.as_row()))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def emit_json(records, path, meta=None):
    payload = {
        "meta": meta or {},
        "records": [
            {k: (None if v is None or not math.isfinite(v) else float(v))
             for k, v in zip(CSV_FIELDS, rec.as_row())}
            for rec in sorted(records, key=lambda r: r.p)
        ],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return path


def parse_csv(path):
    """Round-trip reader for emit_csv output."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != CSV_FIELDS:
            raise ValueError(f"unexpected CSV header in {path}")
        records = []
        for line in fh:
            if not line.strip():
                continue
            vals = [None if tok == "" else float(tok) for tok in line.strip().split(",")]
            records.append(SweepRecord(**dict(zip(CSV_FIELDS, vals))))
    return records


def emit_extrapolation(series_fits, path, default_model=None):
    """Write every model's fit plus the selected (best-residual) one per series."""
    payload = {}
    for name, (best, fits) in series_fits.items():
        payload[name] = {
            "selected_model": best.model,
            "selected_limit": best.limit,
            "note": "models fitted on the largest-p half; rates are empirical",
            "fits": {m: dataclasses.asdict(f) for m, f in fits.items()},
        }
        if default_model:
            payload[name]["requested_model"] = default_model
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return path


def emit_gnuplot(csv_name, path, targets=None):
    """gnuplot script plotting the scaled energy/mass columns of the CSV."""
    tgt = ""
    if targets:
        for i, (label, value) in enumerate(targets.items()):
            tgt += f"set arrow {i + 1} from graph 0, first {value!r} to graph 1, first {value!r} nohead dt 2\n"
            tgt += f"set label {i + 1} '{label}' at graph 0.02, first {value!r} offset 0,0.7\n"
    script = (
        "set datafile separator ','\n"
        "set key autotitle columnhead\n"
        "set logscale x\n"
        "set xlabel 'p'\n"
        "set ylabel 'p^{N-1}-scaled quantities'\n"
        f"{tgt}"
        f"plot '{csv_name}' using 1:3 with linespoints, \\\n"
        f"     '{csv_name}' using 1:5 with linespoints, \\\n"
        f"     '{csv_name}' using 1:7 with linespoints\n"
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(script)
    return path


def write_sweep_outputs(result: SweepResult, outdir, model=None, targets=None):
    """sweep.csv, sweep.json, extrapolation.json and sweep.plt in outdir."""
    os.makedirs(outdir, exist_ok=True)
    emit_csv(result.records, os.path.join(outdir, "sweep.csv"))
    emit_json(result.records, os.path.join(outdir, "sweep.json"),
              meta={"solver": result.solver, "norm": result.norm_spec,
                    "domain": result.domain,
                    "failures": [list(f) for f in result.failures]})
    fits = {}
    for name in ("pN1Cp", "pN1energy", "pN1massp1"):
        ps, vs = result.series(name)
        if len(ps) >= 4:
            if model and model != "best":
                forced = extrapolate(ps, vs, model=model)
                _, all_fits = extrapolate_best(ps, vs)
                fits[name] = (forced, all_fits)
            else:
                fits[name] = extrapolate_best(ps, vs)
    if fits:
        emit_extrapolation(fits, os.path.join(outdir, "extrapolation.json"),
                           default_model=model)
    emit_gnuplot("sweep.csv", os.path.join(outdir, "sweep.plt"), targets=targets)
    return outdir
