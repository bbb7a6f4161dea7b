"""Radial solver for -Q_N u = u^p on Wulff balls W_R = {H0(x) < R}.

Reduction to one dimension
--------------------------
Positive solutions on Wulff balls are Finsler-radial, u(x) = phi(H0(x)).
Writing s = H0(x) and using the structural identities H(grad H0) = 1 and
H0(x) (grad H)(grad H0(x)) = x:

    grad u = phi'(s) grad H0(x),        H(grad u) = |phi'(s)|,
    H(grad u)^(N-1) (grad H)(grad u) = |phi'|^(N-2) phi' x / s,

so the quasilinear operator collapses to the weighted 1-D form

    Q_N u = s^(1-N) ( s^(N-1) |phi'|^(N-2) phi' )',

and the PDE becomes the initial value problem

    ( r^(N-1) |phi'|^(N-2) phi' )' = - r^(N-1) phi^p,   phi(0) = 1, phi'(0) = 0.

The solver integrates the first-order system in (phi, psi) with the flux
variable psi = r^(N-1) |phi'|^(N-2) phi' (psi <= 0), recovers phi' as
-|psi|^(1/(N-1))/r, and locates the first zero R1 of phi.  The profile is
started at r0 = 1e-6 from the series phi = 1 - ((N-1)/N) r^(N/(N-1)) / N^(1/(N-1)).

Note that R1 grows like exp((N-1)(p+1-N)/N^2): at p = 800, N = 2 the first
zero sits near 1.5e86.  Adaptive steps in r cross that range in a few
thousand steps, and all p-dependent rescalings are carried in log space.

Rescaling to a target ball
--------------------------
With a = R1/R and c = a^(N/(p+1-N)), the field u(x) = c phi(a H0(x)) is the
positive solution on W_R (it is the least energy solution: the radial profile
with unit center value is unique, and the scaling group maps it onto every
radius).  Volume integrals reduce by the radial measure
int_{W_R} g(H0(x)) dx = N kappa int_0^R g(s) s^(N-1) ds; the profile moments

    E1 = int_0^{R1} |phi'|^N t^(N-1) dt,   M_k = int_0^{R1} phi^k t^(N-1) dt

are evaluated by composite Gauss panels on the integrator's own adaptive
grid (the solver resolves both the concentration scale near the origin and
the logarithmic far field), giving

    energy = int H(grad u)^N = N kappa c^N E1,
    mass_k = int u^k          = N kappa c^k a^(-N) M_k.
"""

from __future__ import annotations

import dataclasses
import math
import warnings

import numpy as np
from scipy.integrate import solve_ivp

from .geometry import wulff_volume
from .norms import FinslerNorm

#: First zero of the order-zero Bessel function J0; lambda_1 of the unit disk
#: for the 2-D operator is its square, and the radial reduction makes the
#: same value the first-eigenvalue scale of every unit Wulff ball when N=2.
J0_FIRST_ZERO = 2.404825557695773


class ShootingError(RuntimeError):
    """Radial integration failed to produce a usable profile."""


@dataclasses.dataclass(frozen=True)
class RadialProfile:
    """Profile phi with phi(0) = 1 and its first zero.

    ``interpolant`` evaluates (phi, psi) at arbitrary r in [r0, R1]; ``r``,
    ``phi``, ``dphi`` materialize the integrator grid for dumps and plots.
    """

    dim: int
    p: float
    r: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    R1: float
    rtol: float
    start_bias: float
    interpolant: object = dataclasses.field(repr=False, default=None)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        y = self.interpolant(np.clip(r, self.r[0], self.R1))
        phi = np.clip(y[0], 0.0, None)
        return np.where(r >= self.R1, 0.0, phi)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        rc = np.clip(r, self.r[0], self.R1)
        psi = self.interpolant(rc)[1]
        return -np.abs(psi) ** (1.0 / (self.dim - 1)) / rc


def shoot(dim, p, rtol=1e-8, atol=1e-10, r0=1e-6, r_max=1e300, check_start=True):
    """Integrate the radial profile and locate its first zero.

    ``p`` may be 1 (the Bessel validation case, phi = J0 for N=2); otherwise
    p > 1.  The start bias is guarded by one Richardson-style refinement of
    r0 (a second pass from r0/4); the recorded ``start_bias`` is the relative
    shift of R1 between the two passes.
    """
    if dim < 2:
        raise ShootingError("dimension must be >= 2")
    if not p >= 1:
        raise ShootingError("exponent must satisfy p >= 1")
    if not rtol > 0:
        raise ShootingError("rtol must be positive")

    def solve_from(r_start):
        N = dim
        cN = (N - 1.0) / N / N ** (1.0 / (N - 1.0))
        phi0 = 1.0 - cN * r_start ** (N / (N - 1.0))
        psi0 = -r_start ** N / N

        def rhs(r, y):
            phi, psi = y
            dphi = -abs(psi) ** (1.0 / (N - 1)) / r
            dpsi = -(r ** (N - 1)) * max(phi, 0.0) ** p
            return (dphi, dpsi)

        def crossing(r, y):
            return y[0]

        crossing.terminal = True
        crossing.direction = -1
        sol = solve_ivp(rhs, (r_start, r_max), (phi0, psi0), method="RK45",
                        rtol=rtol, atol=atol, events=crossing, dense_output=True)
        if sol.status != 1:
            raise ShootingError(
                f"profile did not cross zero before r = {r_max:g} "
                f"(dim={dim}, p={p}): {sol.message}")
        return sol, float(sol.t_events[0][0])

    sol, R1 = solve_from(r0)
    bias = 0.0
    if check_start:
        _, R1_fine = solve_from(r0 / 4.0)
        bias = abs(R1_fine - R1) / R1
        if bias > 50 * rtol:
            warnings.warn(f"series start bias {bias:.2e} above 50*rtol at p={p}",
                          stacklevel=2)
    grid = sol.t[sol.t <= R1]
    grid = np.append(grid, R1)
    phi = np.clip(sol.sol(grid)[0], 0.0, None)
    dphi = -np.abs(sol.sol(grid)[1]) ** (1.0 / (dim - 1)) / grid
    return RadialProfile(dim=dim, p=float(p), r=grid, phi=phi, dphi=dphi,
                         R1=R1, rtol=rtol, start_bias=bias, interpolant=sol.sol)


def _gauss_panels(ts, order=8):
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = ts[:-1], ts[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return (mid[:, None] + half[:, None] * x[None, :]).ravel(), \
        (half[:, None] * w[None, :]).ravel()


def profile_moments(profile: RadialProfile, exponents=()):
    """E1 = int |phi'|^N t^(N-1) dt and M_k = int phi^k t^(N-1) dt on [0, R1].

    Composite Gauss quadrature on the integrator's adaptive grid; powers of
    phi are taken in log space so exponents of order 10^3 neither overflow
    nor lose the concentration region.
    """
    N = profile.dim
    nodes, w = _gauss_panels(profile.r)
    y = profile.interpolant(nodes)
    phi = np.clip(y[0], 0.0, None)
    psi = y[1]
    dphi = np.abs(psi) ** (1.0 / (N - 1)) / nodes
    rN1 = nodes ** (N - 1)
    E1 = float(np.sum(w * dphi ** N * rN1))
    moments = {}
    with np.errstate(divide="ignore"):
        logphi = np.where(phi > 0, np.log(np.where(phi > 0, phi, 1.0)), -np.inf)
    for k in exponents:
        moments[k] = float(np.sum(w * np.exp(k * logphi) * rN1))
    return E1, moments


@dataclasses.dataclass(frozen=True)
class RadialSolution:
    """Least energy solution u(x) = c phi(a H0(x)) on W_R with its integrals."""

    profile: RadialProfile
    norm: FinslerNorm
    R: float
    log_a: float
    log_c: float
    kappa: float
    energy: float
    mass_p1: float
    mass_p: float
    Cp: float
    umax: float
    lambda_p: float
    eps_p: float

    @property
    def p(self):
        return self.profile.p

    @property
    def dim(self):
        return self.profile.dim

    def u(self, s):
        """Solution value at H0-radius s in [0, R]."""
        a = math.exp(self.log_a)
        return self.umax * self.profile(a * np.asarray(s, dtype=float))

    def du(self, s):
        a = math.exp(self.log_a)
        return self.umax * a * self.profile.derivative(a * np.asarray(s, dtype=float))


def rescale_to_domain(profile: RadialProfile, R, norm: FinslerNorm):
    """Rescale the unit-center profile onto the Wulff ball of radius R.

    Requires p + 1 > N (so the amplitude exponent N/(p+1-N) is defined)
    except for the identity rescale R = R1, where c = 1.
    """
    if not R > 0:
        raise ValueError("radius must be positive")
    if norm.dim != profile.dim:
        raise ValueError("norm dimension does not match the profile")
    N, p = profile.dim, profile.p
    log_a = math.log(profile.R1 / R)
    if p + 1.0 - N <= 0:
        if abs(log_a) > 1e-12:
            raise ValueError(
                "p + 1 <= N: amplitude scaling is degenerate; only the "
                "identity rescale R = R1 is available")
        log_c = 0.0
    else:
        log_c = (N / (p + 1.0 - N)) * log_a

    kappa = wulff_volume(norm)
    E1, moments = profile_moments(profile, exponents=(p + 1.0, p))
    Mp1, Mp = moments[p + 1.0], moments[p]
    # c^(p+1) a^(-N) = c^N and c^p a^(-N) = c^(N-1); carried via logs
    energy = N * kappa * math.exp(N * log_c) * E1
    mass_p1 = N * kappa * math.exp(N * log_c) * Mp1
    mass_p = N * kappa * math.exp((N - 1.0) * log_c) * Mp
    Cp = energy / mass_p1 ** (N / (p + 1.0))
    umax = math.exp(log_c)
    lambda_p = mass_p ** (1.0 / (N - 1.0))
    # eps^N p^(N-1) umax^(p+1-N) = 1  =>  log eps = -((N-1)/N) log p - log a
    log_eps = -((N - 1.0) / N) * math.log(p) - log_a if p > 1 else 0.0
    return RadialSolution(
        profile=profile, norm=norm, R=float(R), log_a=log_a, log_c=log_c,
        kappa=kappa, energy=energy, mass_p1=mass_p1, mass_p=mass_p, Cp=Cp,
        umax=umax, lambda_p=lambda_p, eps_p=math.exp(log_eps),
    )


def solve_radial(norm: FinslerNorm, p, R=1.0, rtol=1e-8):
    """shoot + rescale in one call."""
    return rescale_to_domain(shoot(norm.dim, p, rtol=rtol), R, norm)


# -- diagnostics -------------------------------------------------------------


def green_value(solution: RadialSolution, s):
    """Ball Green function (N kappa)^(-1/(N-1)) log(R/s), zero on the boundary."""
    N = solution.dim
    return (N * solution.kappa) ** (-1.0 / (N - 1.0)) * np.log(solution.R / np.asarray(s, float))


def green_compare(solution: RadialSolution, s0, s1, n_points=241):
    """sup over the annulus [s0, s1] of |u/lambda_p - G|."""
    if not 0 < s0 < s1 < solution.R:
        raise ValueError("annulus must satisfy 0 < s0 < s1 < R")
    s = np.linspace(s0, s1, n_points)
    v = solution.u(s) / solution.lambda_p
    return float(np.max(np.abs(v - green_value(solution, s))))


@dataclasses.dataclass(frozen=True)
class RescaledProfile:
    """Peak-scale renormalization z(rho) = p (u(eps rho) - umax)/umax and its mass."""

    rho: np.ndarray
    z: np.ndarray
    mass: float
    p_lambda: float
    L0_estimate: float

    def z_at(self, rho):
        return np.interp(rho, self.rho, self.z)


def rescaled_profile(solution: RadialSolution, rho_max=16.0, n_points=801):
    """Rescale around the peak and integrate the renormalized mass.

    In profile variables z(rho) = p (phi(p^(-(N-1)/N) rho) - 1), since
    a eps_p = p^(-(N-1)/N); the mass int (1 + z/p)^(p+1) rho^(N-1) drho over
    the full ball equals N kappa p^(N-1) M_{p+1} exactly, which is how it is
    evaluated (no overflow at any p).  For N = 2 the limit profile is
    -2 log(1 + rho^2/8) with mass 8 kappa.
    """
    prof = solution.profile
    N, p = prof.dim, prof.p
    scale = p ** (-(N - 1.0) / N)
    rho_cap = min(rho_max, prof.R1 / scale)
    rho = np.linspace(0.0, rho_cap, n_points)
    z = p * (prof(scale * rho) - 1.0)
    _, moments = profile_moments(prof, exponents=(p + 1.0,))
    mass = N * solution.kappa * p ** (N - 1.0) * moments[p + 1.0]
    p_lambda = p * solution.lambda_p
    L0 = p_lambda / ((N / (N - 1.0)) * math.exp((N - 1.0) / N))
    return RescaledProfile(rho=rho, z=z, mass=mass, p_lambda=p_lambda, L0_estimate=L0)


def liouville_profile(rho):
    """Entire limit profile of the N=2 rescaling: -2 log(1 + rho^2 / 8)."""
    return -2.0 * np.log1p(np.asarray(rho, dtype=float) ** 2 / 8.0)


def pohozaev_residual(solution: RadialSolution):
    """Relative defect of the interior/boundary integral identity.

    For the q = N case on W_R centered at the origin the identity reduces to

        (N/(p+1)) int u^(p+1)  =  (N-1) kappa R^N |u'(R)|^N :

    the boundary terms collapse through x.nu = R/|grad H0|, the divergence
    theorem int_{bd W_R} x.nu = N kappa R^N, and the coarea identity
    int_{bd W_R} |grad H0|^(-1) = N kappa R^(N-1).  The residual is pure
    discretization error and scales linearly with the ODE tolerance.
    """
    N, p = solution.dim, solution.p
    lhs = (N / (p + 1.0)) * solution.mass_p1
    du_R = abs(float(solution.du(solution.R)))
    rhs = (N - 1.0) * solution.kappa * solution.R ** N * du_R ** N
    return abs(lhs - rhs) / abs(lhs)


def lambda1_wulff(R=1.0, dim=2):
    """First eigenvalue of the N=2 operator on W_R: (j01/R)^2 for every norm.

    The radial reduction is norm-independent in the H0-radial variable, so
    the 2-D eigenvalue problem on any unit Wulff ball is the Bessel problem.
    """
    if dim != 2:
        raise NotImplementedError("closed-form first eigenvalue only for N = 2")
    return (J0_FIRST_ZERO / R) ** 2
