"""Norm-dependent geometric constants: Wulff volumes, perimeters, test
functions and the limit constants of the large-exponent asymptotics.

Conventions, for a norm H with dual H0 on R^N:

* Wulff ball  W_r = {x : H0(x) < r},  kappa = |W_1|,
  computed from kappa = (1/N) int_{S^{N-1}} H0(w)^{-N} dsigma(w).
* moser_exponent  beta = N (N kappa)^(1/(N-1)), the sharp exponential
  integrability exponent for unit-energy functions.
* flux_monotonicity  d = inf over pairs of the monotonicity quotient of the
  flux map  Phi(X) = H(X)^(N-1) grad H(X):
      d(X, Y) = (Phi(X) - Phi(Y)).(X - Y) / H(X - Y)^N,
  jointly 0-homogeneous and symmetric; always <= 1 (antipodal pairs give
  2^(2-N)) and equal to 1 identically for N=2 quadratic norms.
* energy_limit  (N e beta / (N-1))^(N-1): the limit of p^(N-1) times the
  least constrained energy as the exponent p grows.
* liouville_mass_bound  (N/(N-1))^(N-1) N^N kappa: lower bound for the mass
  of entire limit profiles of the rescaled solutions.
* peak_count_bound  [e^((N-1)/N) / d]: cap on the number of interior
  concentration points.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtri
from scipy.stats import qmc

from . import polygons
from .norms import FinslerNorm, check_assumptions


@dataclasses.dataclass(frozen=True)
class GeometryReport:
    """All computed constants for one norm."""

    norm_spec: str
    dim: int
    wulff_volume: float
    moser_exponent: float
    flux_monotonicity: float
    hess_min_eig: float
    alpha: float
    beta: float
    energy_limit: float
    liouville_mass_bound: float
    peak_count_bound: int
    flux_monotonicity_pair: tuple = ()
    boundary_suspect: bool = False
    wulff_volume_stderr: float = 0.0

    def as_dict(self):
        d = dataclasses.asdict(self)
        d["flux_monotonicity_pair"] = [list(map(float, v)) for v in self.flux_monotonicity_pair]
        return d


# -- Wulff volume ---------------------------------------------------------


def wulff_volume(norm: FinslerNorm, n_angle=4096, n_gauss=128, qmc_points=2 ** 16):
    """Volume of the unit Wulff ball.

    N=2: periodic trapezoid rule (spectrally accurate for smooth duals),
    N=3: Gauss-Legendre in the polar cosine times trapezoid in azimuth,
    N>=4: Sobol quasi-Monte Carlo over sphere directions; the standard error
    estimate is available through ``wulff_volume_qmc``.
    """
    N = norm.dim
    if N == 2:
        th = np.arange(n_angle) * (2 * np.pi / n_angle)
        w = np.column_stack([np.cos(th), np.sin(th)])
        return float(0.5 * np.mean(norm.dual_value(w) ** -2.0) * 2 * np.pi)
    if N == 3:
        mu, wmu = np.polynomial.legendre.leggauss(n_gauss)
        phi = np.arange(2 * n_gauss) * (2 * np.pi / (2 * n_gauss))
        st = np.sqrt(1.0 - mu ** 2)
        W = np.empty((n_gauss, 2 * n_gauss, 3))
        W[..., 0] = st[:, None] * np.cos(phi)[None, :]
        W[..., 1] = st[:, None] * np.sin(phi)[None, :]
        W[..., 2] = mu[:, None]
        inner = np.mean(norm.dual_value(W) ** -3.0, axis=1) * 2 * np.pi
        return float(np.sum(wmu * inner) / 3.0)
    return wulff_volume_qmc(norm, qmc_points)[0]


def wulff_volume_qmc(norm: FinslerNorm, n_points=2 ** 16, seed=7):
    """Quasi-Monte Carlo sphere average for N >= 4; returns (value, stderr)."""
    N = norm.dim
    sob = qmc.Sobol(d=N, scramble=True, seed=seed)
    u = sob.random(n_points)
    g = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    g = g[np.linalg.norm(g, axis=1) > 0]
    w = g / np.linalg.norm(g, axis=1, keepdims=True)
    f = norm.dual_value(w) ** (-float(N))
    surface = 2.0 * np.pi ** (N / 2.0) / math.gamma(N / 2.0)
    val = surface * float(np.mean(f)) / N
    # batch-means error estimate over 16 consecutive blocks
    blocks = np.array_split(f, 16)
    means = np.array([np.mean(b) for b in blocks])
    stderr = surface * float(np.std(means, ddof=1) / np.sqrt(len(means))) / N
    return val, stderr


def moser_exponent(norm: FinslerNorm, kappa=None):
    N = norm.dim
    if kappa is None:
        kappa = wulff_volume(norm)
    return N * (N * kappa) ** (1.0 / (N - 1.0))


# -- flux monotonicity constant --------------------------------------------


@dataclasses.dataclass(frozen=True)
class FluxMonotonicityResult:
    value: float
    pair: tuple
    boundary_suspect: bool
    n_starts: int


def _d_quotient(norm, X, Y):
    N = norm.dim
    dXY = X - Y
    return float(np.dot(norm.flux(X) - norm.flux(Y), dXY) / norm.value(dXY) ** N)


def d_constant(norm: FinslerNorm, budget=64, seed=0, exclusion=1e-6):
    """Infimum of the flux monotonicity quotient by multistart local descent.

    The quotient is jointly 0-homogeneous, so candidates are normalized to
    H(X) = 1 before evaluation.  Pairs inside the exclusion neighborhoods
    H(X - Y) < 1e-6 or H(Y) < 1e-6 are rejected; minima found within 10x of
    those thresholds are flagged boundary-suspect (degenerate-Hessian norms
    drive the infimum to 0 along X -> Y).  Collinear/antipodal starts are
    always included; for any norm the antipodal pair gives exactly 2^(2-N).
    """
    N = norm.dim
    rng = np.random.default_rng(seed)
    penalty = 10.0

    def normalized(z):
        X, Y = z[:N].copy(), z[N:].copy()
        hX = norm.value(X)
        if hX < 1e-9:
            return None
        return X / hX, Y / hX

    def objective(z):
        pair = normalized(z)
        if pair is None:
            return penalty
        X, Y = pair
        if norm.value(X - Y) < exclusion or norm.value(Y) < exclusion:
            return penalty
        return _d_quotient(norm, X, Y)

    starts = [rng.standard_normal(2 * N) for _ in range(budget)]
    dirs = list(np.eye(N)) + [rng.standard_normal(N) for _ in range(4)]
    for e in dirs:
        e = np.asarray(e, dtype=float)
        for t in (0.25, 0.5, 1.0, 2.0, 4.0):
            starts.append(np.concatenate([e, -t * e]))

    best, best_z = np.inf, None
    for z0 in starts:
        res = minimize(objective, z0, method="Nelder-Mead",
                       options={"maxiter": 600, "xatol": 1e-10, "fatol": 1e-12})
        if res.fun < best:
            best, best_z = float(res.fun), res.x
    if best > 1.0 + 1e-6:
        raise RuntimeError(f"flux monotonicity search returned {best} > 1; "
                           "the antipodal family guarantees a value <= 1")
    X, Y = normalized(best_z)
    suspect = bool(norm.value(X - Y) < 10 * exclusion or norm.value(Y) < 10 * exclusion)
    return FluxMonotonicityResult(min(best, 1.0) if best > 1.0 else best,
                                  (tuple(map(float, X)), tuple(map(float, Y))),
                                  suspect, len(starts))


# -- perimeter -------------------------------------------------------------


def anisotropic_perimeter(vertices, norm: FinslerNorm):
    """Sum over polygon edges of length times H(outward unit normal), N=2.

    For counter-clockwise vertices the outward normal of edge (v_i, v_{i+1})
    is the rotated tangent (dy, -dx)/|edge|.
    """
    if norm.dim != 2:
        raise ValueError("anisotropic_perimeter is a planar (N=2) operation")
    v = np.asarray(vertices, dtype=float)
    if not polygons.is_simple_polygon(v):
        raise ValueError("polygon is self-intersecting")
    if polygons.polygon_area(v) < 0:
        v = v[::-1]
    e = np.roll(v, -1, axis=0) - v
    lengths = np.linalg.norm(e, axis=1)
    normals = np.column_stack([e[:, 1], -e[:, 0]]) / lengths[:, None]
    return float(np.sum(lengths * norm.value(normals)))


# -- logarithmic test function ----------------------------------------------


def moser_function(l, L, norm: FinslerNorm, x):
    """Truncated-logarithm test function with unit anisotropic energy.

    Plateau (N kappa)^(-1/N) (log L/l)^((N-1)/N) on H0(x) <= l, logarithmic
    decay on l <= H0(x) <= L, zero outside.
    """
    if not 0 < l < L:
        raise ValueError("need 0 < l < L")
    N = norm.dim
    kappa = wulff_volume(norm)
    c = (N * kappa) ** (-1.0 / N)
    s = norm.dual_value(x)
    log_ratio = np.log(L / l)
    plateau = c * log_ratio ** ((N - 1.0) / N)
    with np.errstate(divide="ignore"):
        ramp = c * np.log(L / np.maximum(s, 1e-300)) / log_ratio ** (1.0 / N)
    return np.where(s <= l, plateau, np.where(s <= L, np.maximum(ramp, 0.0), 0.0))


def moser_energy_check(l, L, norm: FinslerNorm, n_s=64, n_theta=512):
    """Energy int H(grad m)^N of the test function, computed two ways.

    The radial (coarea) route quadratures N kappa int_l^L ds/s against
    N kappa log(L/l) and is exact up to 1-D quadrature error.  The direct
    route (N=2 only) evaluates the actual gradient field pointwise and
    integrates over the annulus in Wulff polar coordinates, independent of
    the identity H(grad H0) = 1 the reduction uses.  Returns
    (coarea_value, direct_value); both must be 1 within quadrature tolerance.
    """
    if not 0 < l < L:
        raise ValueError("need 0 < l < L")
    N = norm.dim
    kappa = wulff_volume(norm)
    xg, wg = np.polynomial.legendre.leggauss(n_s)
    s = 0.5 * (L + l) + 0.5 * (L - l) * xg
    ws = 0.5 * (L - l) * wg
    coarea = float(N * kappa * np.sum(ws / s) / (N * kappa * np.log(L / l)))

    direct = None
    if N == 2:
        th = np.arange(n_theta) * (2 * np.pi / n_theta)
        u = np.column_stack([np.cos(th), np.sin(th)])
        w = u / norm.dual_value(u)[:, None]
        # dw/dtheta by spectral differentiation of the periodic boundary curve
        freq = 1j * np.fft.rfftfreq(n_theta, d=1.0 / n_theta)
        wp = np.empty_like(w)
        for c in range(2):
            wp[:, c] = np.fft.irfft(np.fft.rfft(w[:, c]) * freq, n_theta)
        jac = w[:, 0] * wp[:, 1] - w[:, 1] * wp[:, 0]
        c0 = (N * kappa) ** (-1.0 / N) * np.log(L / l) ** (-1.0 / N)
        X = s[:, None, None] * w[None, :, :]
        grad_m = -c0 * norm.dual_gradient(X) / norm.dual_value(X)[..., None]
        integrand = norm.value(grad_m) ** N
        direct = float(np.sum((ws * s)[:, None] * jac[None, :] * integrand) * (2 * np.pi / n_theta))
    return coarea, direct


# -- large-exponent bounds ---------------------------------------------------


def cp_upper_bound(p, L, norm: FinslerNorm, kappa=None):
    """Upper bound for the least constrained energy at exponent p.

    Evaluates N kappa (N^2 e/(N-1))^(N-1) (p+1)^(-(N-1)) (L^N kappa)^(-N/(p+1)),
    the value of the energy ratio of the logarithmic test function with inner
    radius l = L exp(-(N-1)(p+1)/N^2).  L is the H0-inradius of the domain.
    """
    if not p > 1:
        raise ValueError("need p > 1")
    N = norm.dim
    if kappa is None:
        kappa = wulff_volume(norm)
    return (N * kappa * (N * N * math.e / (N - 1.0)) ** (N - 1.0)
            * (p + 1.0) ** (-(N - 1.0)) * (L ** N * kappa) ** (-N / (p + 1.0)))


def energy_limit(norm: FinslerNorm, kappa=None):
    """(N e beta/(N-1))^(N-1), the p -> infinity limit of p^(N-1) C_p."""
    N = norm.dim
    beta = moser_exponent(norm, kappa)
    return (N * math.e * beta / (N - 1.0)) ** (N - 1.0)


def gauss_bracket(x, nudge=1e-9):
    """floor with an upward nudge so exact-integer arguments are not lost."""
    return int(math.floor(x + nudge))


def limit_constants(norm: FinslerNorm, budget=64, seed=0, sphere_samples=256):
    """Assemble the full GeometryReport for a norm."""
    N = norm.dim
    if N >= 4:
        kappa, stderr = wulff_volume_qmc(norm)
    else:
        kappa, stderr = wulff_volume(norm), 0.0
    beta_tm = moser_exponent(norm, kappa)
    assume = check_assumptions(norm, sphere_samples)
    dres = d_constant(norm, budget=budget, seed=seed)
    return GeometryReport(
        norm_spec=norm.spec(),
        dim=N,
        wulff_volume=kappa,
        moser_exponent=beta_tm,
        flux_monotonicity=dres.value,
        hess_min_eig=assume.hess_min_eig,
        alpha=assume.alpha,
        beta=assume.beta,
        energy_limit=(N * math.e * beta_tm / (N - 1.0)) ** (N - 1.0),
        liouville_mass_bound=(N / (N - 1.0)) ** (N - 1.0) * N ** N * kappa,
        peak_count_bound=gauss_bracket(math.exp((N - 1.0) / N) / dres.value)
        if dres.value > 0 else 0,
        flux_monotonicity_pair=dres.pair,
        boundary_suspect=dres.boundary_suspect,
        wulff_volume_stderr=stderr,
    )
