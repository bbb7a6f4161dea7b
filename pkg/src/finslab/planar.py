"""Constrained P1 minimization of the anisotropic energy on polygonal domains.

The planar solver computes, for N = 2,

    Cp  = min { int H(grad u)^2 : u in P1, u = 0 on the boundary,
                int |u|^(p+1) = 1 }

by projected descent: the energy gradient (chain rule through H^2 per
triangle, where the P1 gradient is constant so the anisotropy is evaluated
exactly) is preconditioned by the Euclidean P1 stiffness matrix (a Sobolev
gradient, which makes the iteration count mesh-independent), the iterate is
replaced by its absolute value and renormalized after every step, and a
backtracking line search enforces energy descent.  The L^(p+1) constraint
and all other u-integrals use the lumped (vertex) quadrature rule, which
keeps powers diagonal and robust at large p.

``first_eigenvalue`` is the same minimization with the L^2 constraint.
"""

from __future__ import annotations

import dataclasses
import weakref

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import logsumexp

from .mesh import Mesh, tri_geometry
from .norms import FinslerNorm, check_assumptions


class SolverError(RuntimeError):
    pass


class NonConvergenceError(SolverError):
    """Carries the last iterate and its projected gradient norm."""

    def __init__(self, message, field=None, grad_norm=None):
        super().__init__(message)
        self.field = field
        self.grad_norm = grad_norm


@dataclasses.dataclass(frozen=True)
class PlanarField:
    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != self.mesh.n_vertices:
            raise SolverError("nodal array does not match the mesh")

    def peak(self):
        k = int(np.argmax(self.values))
        return k, self.mesh.vertices[k]

    def max(self):
        return float(np.max(self.values))


@dataclasses.dataclass
class SolveConfig:
    p: float = 10.0
    max_iters: int = 20000
    grad_tol: float = 1e-7
    alpha0: float = 1.0
    alpha_max: float = 64.0
    armijo: float = 1e-4
    backtrack: float = 0.5
    grow: float = 1.4
    continuation: bool = True
    seed: int = 42

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


class _Assembly:
    """Mesh-level operators cached across solves (geometry, lumped weights,
    Euclidean stiffness factorization)."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.area, self.grads = tri_geometry(mesh)
        n = mesh.n_vertices
        w = np.zeros(n)
        np.add.at(w, mesh.triangles.ravel(), np.repeat(self.area / 3.0, 3))
        self.lumped = w
        rows, cols, vals = [], [], []
        for i in range(3):
            for j in range(3):
                rows.append(mesh.triangles[:, i])
                cols.append(mesh.triangles[:, j])
                vals.append(self.area * np.einsum(
                    "ti,ti->t", self.grads[:, i, :], self.grads[:, j, :]))
        self.stiffness = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n))
        self.interior = ~mesh.boundary
        self._lu = spla.splu(
            self.stiffness[self.interior][:, self.interior].tocsc())

    def riesz(self, residual):
        out = np.zeros(self.mesh.n_vertices)
        out[self.interior] = self._lu.solve(residual[self.interior])
        return out

    def field_gradients(self, u):
        return np.einsum("tk,tki->ti", u[self.mesh.triangles], self.grads)


_ASSEMBLY_CACHE: "weakref.WeakKeyDictionary[Mesh, _Assembly]" = weakref.WeakKeyDictionary()


def _assembly(mesh: Mesh):
    asm = _ASSEMBLY_CACHE.get(mesh)
    if asm is None:
        asm = _Assembly(mesh)
        _ASSEMBLY_CACHE[mesh] = asm
    return asm


def assemble_energy(field: PlanarField, norm: FinslerNorm):
    """int H(grad u)^2: exact per triangle for P1 fields."""
    asm = _assembly(field.mesh)
    g = asm.field_gradients(field.values)
    return float(np.sum(asm.area * norm.value(g) ** 2))


def _energy_and_gradient(asm: _Assembly, norm: FinslerNorm, u):
    g = asm.field_gradients(u)
    h = norm.value(g)
    E = float(np.sum(asm.area * h ** 2))
    flux = 2.0 * asm.area[:, None] * norm.flux(g)     # d(h^2)/dgrad per triangle
    contrib = np.einsum("ti,tki->tk", flux, asm.grads)
    dE = np.zeros(len(u))
    np.add.at(dE, asm.mesh.triangles.ravel(), contrib.ravel())
    return E, dE


def lumped_integral(mesh: Mesh, values, power=1.0):
    """Vertex-rule integral of values^power; powers in log space for p > 200."""
    asm = _assembly(mesh)
    v = np.abs(values)
    if power > 200:
        mask = v > 0
        if not np.any(mask):
            return 0.0
        return float(np.exp(logsumexp(power * np.log(v[mask]), b=asm.lumped[mask])))
    return float(np.sum(asm.lumped * v ** power))


def _project(u, w, s, boundary):
    u = np.abs(u)
    u[boundary] = 0.0
    nrm = np.sum(w * u ** s) ** (1.0 / s)
    if not np.isfinite(nrm) or nrm == 0.0:
        raise SolverError("constraint normalization degenerated")
    return u / nrm


def _minimize_constrained(mesh: Mesh, norm: FinslerNorm, s, config: SolveConfig,
                          u0=None):
    """Minimize the energy over {||u||_s = 1, u >= 0, u|_bd = 0}.

    Returns (u, energy, info).  Raises NonConvergenceError when max_iters is
    exhausted with the H1-projected gradient norm above grad_tol, and
    SolverError on amplitude collapse.
    """
    if config.max_iters < 1 or config.grad_tol <= 0:
        raise SolverError("max_iters must be >= 1 and grad_tol > 0")
    asm = _assembly(mesh)
    w, bnd = asm.lumped, mesh.boundary
    rng = np.random.default_rng(config.seed)
    if u0 is None:
        u0 = asm.riesz(w)                     # smooth positive bubble
        u0 = u0 * (1.0 + 1e-3 * rng.random(len(u0)))
    u = _project(np.asarray(u0, dtype=float).copy(), w, s, bnd)
    E, dE = _energy_and_gradient(asm, norm, u)
    alpha = config.alpha0
    theta = np.inf
    stall = 0
    history = [E]
    for it in range(config.max_iters):
        c = w * u ** (s - 1.0)                # constraint gradient direction
        g = dE.copy()
        g[bnd] = 0.0
        denom = float(c @ u)
        gP = g - (float(g @ u) / denom) * c if denom > 0 else g
        gP[bnd] = 0.0
        d = asm.riesz(gP)
        theta = float(np.sqrt(abs(gP @ d)))
        if theta <= config.grad_tol:
            return u, E, {"iterations": it, "grad_norm": theta, "converged": True,
                          "energy_history": history}
        accepted = False
        a = alpha
        for _ in range(60):
            v = _project(u - a * d, w, s, bnd)
            Ev, dEv = _energy_and_gradient(asm, norm, v)
            if Ev <= E - config.armijo * a * theta ** 2:
                accepted = True
                break
            a *= config.backtrack
        if not accepted:
            # descent exhausted in floating point; accept as stalled optimum
            if theta <= 1e4 * config.grad_tol:
                return u, E, {"iterations": it, "grad_norm": theta,
                              "converged": True, "stalled": True,
                              "energy_history": history}
            raise NonConvergenceError(
                f"line search stalled at grad norm {theta:.3e}",
                field=PlanarField(mesh, u), grad_norm=theta)
        E_prev = E
        u, E, dE = v, Ev, dEv
        history.append(E)
        alpha = min(max(a, 1e-12) * config.grow, config.alpha_max)
        if np.max(u) > 1e6:
            raise SolverError("iterate collapse: ||u||_inf exceeded 1e6")
        stall = stall + 1 if E > E_prev - 1e-13 * max(1.0, abs(E_prev)) else 0
        if stall > 50:
            return u, E, {"iterations": it, "grad_norm": theta,
                          "converged": theta <= 1e4 * config.grad_tol,
                          "stalled": True, "energy_history": history}
    raise NonConvergenceError(
        f"no convergence in {config.max_iters} iterations "
        f"(grad norm {theta:.3e} > tol {config.grad_tol:.1e})",
        field=PlanarField(mesh, u), grad_norm=theta)


def _require_elliptic(norm: FinslerNorm):
    report = check_assumptions(norm)
    if not report.passes:
        raise SolverError(
            f"norm {norm.spec()} violates the ellipticity assumption "
            f"(min Hessian eigenvalue {report.hess_min_eig:.2e}); "
            "the planar solver requires a uniformly convex norm")


def minimize_cp(mesh: Mesh, norm: FinslerNorm, config: SolveConfig, u0=None):
    """Normalized minimizer and Cp = inf energy under ||u||_(p+1) = 1."""
    if norm.dim != 2:
        raise SolverError("planar solver is two-dimensional")
    if not config.p > 1:
        raise SolverError("need p > 1")
    _require_elliptic(norm)
    u, E, info = _minimize_constrained(mesh, norm, config.p + 1.0, config, u0)
    return PlanarField(mesh, u), E, info


def least_energy_solution(field: PlanarField, Cp, p):
    """Scale the normalized minimizer by Cp^(1/(p-1)) so it solves the PDE."""
    return PlanarField(field.mesh, Cp ** (1.0 / (p - 1.0)) * field.values)


def first_eigenvalue(mesh: Mesh, norm: FinslerNorm, config: SolveConfig, u0=None):
    """Least Rayleigh quotient int H(grad u)^2 / int u^2."""
    if norm.dim != 2:
        raise SolverError("planar solver is two-dimensional")
    _require_elliptic(norm)
    u, E, info = _minimize_constrained(mesh, norm, 2.0, config, u0)
    return E, PlanarField(mesh, u), info


# -- diagnostics -------------------------------------------------------------


def _vertex_adjacency(mesh: Mesh):
    T = mesh.triangles
    pairs = np.vstack([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    pairs = np.unique(np.sort(pairs, axis=1), axis=0)
    return pairs


def count_local_maxima(field: PlanarField, threshold=0.5):
    """Nodes above threshold*max that dominate all their neighbors.

    Exact ties between neighbors are broken by vertex index so a symmetric
    plateau counts as one maximum.
    """
    u = field.values
    cut = threshold * np.max(u)
    pairs = _vertex_adjacency(field.mesh)
    dominated = np.zeros(len(u), dtype=bool)
    a, b = pairs[:, 0], pairs[:, 1]
    a_loses = (u[a] < u[b]) | ((u[a] == u[b]) & (a > b))
    np.logical_or.at(dominated, a, a_loses)
    np.logical_or.at(dominated, b, ~a_loses)
    return int(np.sum((u >= cut) & ~dominated))


def blowup_diagnostics(fields, norm: FinslerNorm, p_values, geometry=None):
    """Per-exponent concentration table for a sweep of solution fields.

    For each p: peak node and its distance to the boundary, sup norm,
    lambda_p = int u^p, the concentration mass gamma(delta) inside Wulff
    neighborhoods of the peak for delta in {0.05, 0.1, 0.2} diam, the count
    of local maxima above half max, and the limsup-type estimates (p lambda_p
    scaled, with the induced lower bound for the concentration mass when a
    GeometryReport is supplied).
    """
    rows = []
    for field, p in zip(fields, p_values):
        mesh = field.mesh
        asm = _assembly(mesh)
        u = field.values
        k, x_peak = field.peak()
        lam = lumped_integral(mesh, u, p)
        # concentration fractions in log space (u^p overflows for large p)
        with np.errstate(divide="ignore"):
            log_fw = p * np.log(np.maximum(np.abs(u), 1e-300)) + \
                np.log(np.maximum(asm.lumped, 1e-300))
        log_total = logsumexp(log_fw)
        diam = mesh.diameter()
        gammas = {}
        for frac in (0.05, 0.1, 0.2):
            ball = norm.dual_value(mesh.vertices - x_peak) < frac * diam
            gammas[frac] = float(np.exp(logsumexp(log_fw[ball]) - log_total)) \
                if np.any(ball) else 0.0
        L0 = p * lam / (2.0 * np.exp(0.5))
        row = {
            "p": p,
            "peak_index": k,
            "peak_x": float(x_peak[0]),
            "peak_y": float(x_peak[1]),
            "peak_dist": float(mesh.interior_distance(x_peak)),
            "umax": field.max(),
            "lambda_p": lam,
            "p_lambda": p * lam,
            "L0_estimate": L0,
            "gamma_005": gammas[0.05],
            "gamma_010": gammas[0.1],
            "gamma_020": gammas[0.2],
            "local_maxima": count_local_maxima(field),
        }
        if geometry is not None:
            L1 = L0 * geometry.flux_monotonicity ** (-1.0) if geometry.flux_monotonicity > 0 else np.inf
            row["L1_estimate"] = L1
            row["gamma_lower_bound"] = (geometry.moser_exponent / L1) if L1 > 0 else np.inf
        rows.append(row)
    return rows
