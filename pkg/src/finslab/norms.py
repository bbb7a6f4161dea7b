"""Finsler norms H on R^N: values, derivatives, dual norms and validity checks.

A Finsler norm here is an even, positively 1-homogeneous convex function that
is smooth away from the origin.  Three families are built in:

* ``euclidean``            H(xi) = |xi|
* ``ellipse(A)``           H(xi) = sqrt(xi^T A xi),  A symmetric positive definite
* ``lq(q)``                H(xi) = (sum |xi_i|^q)^(1/q),  q > 1

Each norm carries its dual H0(x) = sup_{xi != 0} xi.x / H(xi) either in closed
form (``analytic`` mode) or by multistart maximization over the unit sphere
(``numeric`` mode).  The solvers never differentiate H at the origin; they go
through the flux map xi -> H(xi)^(N-1) grad H(xi), which is (N-1)-homogeneous
and extends continuously by 0 at xi = 0 for N >= 2.

All operations are pure and norm objects are immutable after construction, so
they are safe to share across threads.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np


class NormError(ValueError):
    """Invalid norm construction or a failed norm-identity check."""


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise NormError(f"expected vectors of length {dim}, got shape {x.shape}")
    return x


class FinslerNorm:
    """Base class; subclasses provide value/gradient/hess_power and the dual.

    ``value`` and ``gradient`` accept arrays of shape (..., dim) and operate on
    the last axis.  ``hess_power`` evaluates Hess(H^N / N) at a single vector.
    """

    kind = "abstract"

    def __init__(self, dim, dual_mode="analytic"):
        if dim < 2:
            raise NormError("dimension must be >= 2")
        if dual_mode not in ("analytic", "numeric"):
            raise NormError(f"unknown dual_mode {dual_mode!r}")
        self.dim = int(dim)
        self.dual_mode = dual_mode

    # -- primal ---------------------------------------------------------

    def value(self, xi):
        raise NotImplementedError

    def gradient(self, xi):
        """grad H(xi); rejects xi = 0 where the gradient is undefined."""
        raise NotImplementedError

    def hess_power(self, xi):
        """Hess(H^N(xi)/N), the coefficient matrix of the quasilinear operator."""
        raise NotImplementedError

    def flux(self, xi):
        """H(xi)^(N-1) grad H(xi), extended by 0 at xi = 0 (continuous for N >= 2)."""
        xi = _as_points(xi, self.dim)
        h = self.value(xi)
        out = np.zeros_like(xi)
        nz = h > 0
        if np.any(nz):
            g = self.gradient(xi[nz] if xi.ndim > 1 else xi)
            if xi.ndim == 1:
                return h ** (self.dim - 1) * g
            out[nz] = h[nz, None] ** (self.dim - 1) * g
        return out

    # -- dual -----------------------------------------------------------

    def dual_value(self, x):
        if self.dual_mode == "analytic":
            return self._dual_value_analytic(x)
        return self._dual_value_numeric(x)

    def dual_gradient(self, x):
        """grad H0(x), x != 0; satisfies H(grad H0(x)) = 1."""
        x = _as_points(x, self.dim)
        self._reject_origin(x)
        if self.dual_mode == "analytic":
            return self._dual_gradient_analytic(x)
        return self._dual_gradient_numeric(x)

    def _dual_value_analytic(self, x):
        raise NotImplementedError

    def _dual_gradient_analytic(self, x):
        raise NotImplementedError

    def _dual_value_numeric(self, x, n_steps=50, tol=1e-8):
        """Multistart projected ascent of xi.x/H(xi) over the Euclidean sphere.

        256 starts for N=2, 2048 for N=3 and beyond, with per-start adaptive
        step control.  Raises if the objective is still improving by more than
        ``tol`` (relative) after the refinement budget.
        """
        x = _as_points(x, self.dim)
        single = x.ndim == 1
        X = x[None, :] if single else x.reshape(-1, self.dim)
        norms_x = np.linalg.norm(X, axis=-1)
        out = np.zeros(len(X))
        live = norms_x > 0
        if np.any(live):
            out[live] = self._sphere_ascent(X[live], n_steps, tol)
        if single:
            return float(out[0])
        return out.reshape(x.shape[:-1])

    def _sphere_ascent(self, X, n_steps, tol):
        n_starts = 256 if self.dim == 2 else 2048
        rng = np.random.default_rng(0)
        if self.dim == 2:
            th = np.arange(n_starts) * (2 * np.pi / n_starts)
            S = np.column_stack([np.cos(th), np.sin(th)])
        else:
            S = rng.standard_normal((n_starts, self.dim))
            S /= np.linalg.norm(S, axis=1, keepdims=True)

        def objective(xi):
            # xi: (m, k, dim) candidate directions for each of the m points
            return np.einsum("mkd,md->mk", xi, X) / self.value(xi)

        f0 = objective(np.broadcast_to(S, (len(X), n_starts, self.dim)))
        best = np.argmax(f0, axis=1)
        xi = S[best]                                   # (m, dim)
        f = f0[np.arange(len(X)), best]
        step = np.full(len(X), 0.5)
        scale = np.maximum(np.linalg.norm(X, axis=1), 1e-300)
        for _ in range(n_steps):
            h = self.value(xi)
            g = X / h[:, None] - (f / h)[:, None] * self.gradient(xi)
            g -= np.einsum("md,md->m", g, xi)[:, None] * xi
            cand = xi + step[:, None] * g / scale[:, None]
            cand /= np.linalg.norm(cand, axis=1, keepdims=True)
            fc = np.einsum("md,md->m", cand, X) / self.value(cand)
            better = fc > f
            xi = np.where(better[:, None], cand, xi)
            improve = np.where(better, fc - f, 0.0)
            f = np.where(better, fc, f)
            step = np.where(better, step * 1.5, step * 0.4)
        if np.any(improve > tol * np.maximum(f, 1e-300)):
            raise NormError("numeric dual refinement stalled above tolerance")
        return f

    def _dual_gradient_numeric(self, x, rel_h=1e-6):
        x = np.asarray(x, dtype=float)
        h = rel_h * np.linalg.norm(x, axis=-1, keepdims=True)
        out = np.zeros_like(x)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            out[..., i] = (self.dual_value(x + h * e) - self.dual_value(x - h * e)) / (
                2.0 * h[..., 0] if x.ndim > 1 else 2.0 * float(h)
            )
        return out

    # -- helpers --------------------------------------------------------

    def _reject_origin(self, x):
        n = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        if np.any(n == 0.0):
            raise NormError("derivative undefined at the origin")

    def spec(self):
        """The CLI/config string that reconstructs this norm."""
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, dual_mode={self.dual_mode!r})"


class EuclideanNorm(FinslerNorm):
    kind = "euclidean"

    def value(self, xi):
        return np.linalg.norm(_as_points(xi, self.dim), axis=-1)

    def gradient(self, xi):
        xi = _as_points(xi, self.dim)
        self._reject_origin(xi)
        return xi / np.linalg.norm(xi, axis=-1, keepdims=True)

    def hess_power(self, xi):
        xi = _as_points(xi, self.dim)
        self._reject_origin(xi)
        N = self.dim
        r = np.linalg.norm(xi)
        return r ** (N - 2) * np.eye(N) + (N - 2) * r ** (N - 4) * np.outer(xi, xi)

    def _dual_value_analytic(self, x):
        return np.linalg.norm(_as_points(x, self.dim), axis=-1)

    def _dual_gradient_analytic(self, x):
        return x / np.linalg.norm(x, axis=-1, keepdims=True)

    def spec(self):
        return "euclidean"


class EllipseNorm(FinslerNorm):
    """H(xi) = sqrt(xi^T A xi) for symmetric positive definite A.

    The dual is the ellipse norm of A^{-1} and the Wulff ball is the ellipsoid
    {x : x^T A^{-1} x < 1}.
    """

    kind = "ellipse"

    def __init__(self, A, dual_mode="analytic"):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise NormError("ellipse matrix must be square")
        if not np.allclose(A, A.T, atol=1e-12):
            raise NormError("ellipse matrix must be symmetric")
        eig = np.linalg.eigvalsh(A)
        if eig[0] <= 0:
            raise NormError("ellipse matrix must be positive definite")
        super().__init__(A.shape[0], dual_mode)
        self.A = A
        self.A_inv = np.linalg.inv(A)

    def value(self, xi):
        xi = _as_points(xi, self.dim)
        return np.sqrt(np.einsum("...i,ij,...j->...", xi, self.A, xi))

    def gradient(self, xi):
        xi = _as_points(xi, self.dim)
        self._reject_origin(xi)
        return np.einsum("ij,...j->...i", self.A, xi) / self.value(xi)[..., None]

    def hess_power(self, xi):
        xi = _as_points(xi, self.dim)
        self._reject_origin(xi)
        N = self.dim
        h = float(self.value(xi))
        a = self.A @ xi
        return h ** (N - 2) * self.A + (N - 2) * h ** (N - 4) * np.outer(a, a)

    def _dual_value_analytic(self, x):
        x = _as_points(x, self.dim)
        return np.sqrt(np.einsum("...i,ij,...j->...", x, self.A_inv, x))

    def _dual_gradient_analytic(self, x):
        return np.einsum("ij,...j->...i", self.A_inv, x) / self._dual_value_analytic(x)[..., None]

    def spec(self):
        iu = np.triu_indices(self.dim)
        return "ellipse:" + ",".join(repr(float(v)) for v in self.A[iu])


class LqNorm(FinslerNorm):
    """The l_q norm, q > 1.  Dual is l_q' with 1/q + 1/q' = 1.

    For q > 2 the quasilinear coefficient matrix Hess(H^N/N) degenerates on
    the coordinate axes; ``check_assumptions`` flags such norms and the planar
    solver refuses them (the radial reduction never needs the Hessian).
    """

    kind = "lq"

    def __init__(self, q, dim, dual_mode="analytic"):
        if not q > 1:
            raise NormError("lq norm requires q > 1")
        super().__init__(dim, dual_mode)
        self.q = float(q)
        self.q_dual = self.q / (self.q - 1.0)

    def value(self, xi):
        xi = _as_points(xi, self.dim)
        return np.sum(np.abs(xi) ** self.q, axis=-1) ** (1.0 / self.q)

    def gradient(self, xi):
        xi = _as_points(xi, self.dim)
        self._reject_origin(xi)
        h = self.value(xi)
        return np.abs(xi) ** (self.q - 1) * np.sign(xi) * h[..., None] ** (1.0 - self.q)

    def hess_power(self, xi):
        xi = np.asarray(_as_points(xi, self.dim), dtype=float)
        self._reject_origin(xi)
        N, q = self.dim, self.q
        h = float(self.value(xi))
        g = np.abs(xi) ** (q - 1) * np.sign(xi)
        # |xi_i|^(q-2) diverges on the axes for q < 2; clamp so eigvalsh stays finite
        diag = (q - 1) * np.minimum(np.maximum(np.abs(xi), 1e-300) ** (q - 2), 1e300)
        return (N - q) * h ** (N - 2 * q) * np.outer(g, g) + h ** (N - q) * np.diag(diag)

    def _dual_value_analytic(self, x):
        x = _as_points(x, self.dim)
        return np.sum(np.abs(x) ** self.q_dual, axis=-1) ** (1.0 / self.q_dual)

    def _dual_gradient_analytic(self, x):
        qd = self.q_dual
        h = self._dual_value_analytic(x)
        return np.abs(x) ** (qd - 1) * np.sign(x) * h[..., None] ** (1.0 - qd)

    def spec(self):
        return f"lq:{self.q!r}"


# -- spec-string parsing -------------------------------------------------


def parse_norm(spec, dim=None, dual_mode="analytic"):
    """Build a norm from its CLI/config string.

    Grammar: ``euclidean`` | ``ellipse:a11,a12,a22[,...]`` (row-major upper
    triangle, symmetric completion) | ``lq:q``.
    """
    spec = spec.strip()
    if spec == "euclidean":
        return EuclideanNorm(dim or 2, dual_mode)
    if spec.startswith("ellipse:"):
        try:
            entries = [float(t) for t in spec[len("ellipse:"):].split(",")]
        except ValueError as exc:
            raise NormError(f"malformed ellipse spec {spec!r}") from exc
        # n(n+1)/2 upper-triangle entries determine n
        n = int((np.sqrt(8 * len(entries) + 1) - 1) / 2)
        if n * (n + 1) // 2 != len(entries) or n < 2:
            raise NormError(f"ellipse spec needs n(n+1)/2 entries for some n >= 2, got {len(entries)}")
        if dim is not None and dim != n:
            raise NormError(f"ellipse spec implies dimension {n}, but dim={dim} given")
        A = np.zeros((n, n))
        A[np.triu_indices(n)] = entries
        A = A + np.triu(A, 1).T
        return EllipseNorm(A, dual_mode)
    if spec.startswith("lq:"):
        try:
            q = float(spec[len("lq:"):])
        except ValueError as exc:
            raise NormError(f"malformed lq spec {spec!r}") from exc
        return LqNorm(q, dim or 2, dual_mode)
    raise NormError(f"unknown norm spec {spec!r}")


# -- validity checks ------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class AssumptionReport:
    """Bounds alpha|xi| <= H(xi) <= beta|xi| and ellipticity of Hess(H^N/N).

    ``hess_min_eig`` is the least eigenvalue of Hess(H^N/N) over the Euclidean
    unit sphere.  For N > 2 the Hessian is (N-2)-homogeneous, so the value is
    only meaningful as a sphere-restricted quantity.
    """

    alpha: float
    beta: float
    hess_min_eig: float
    passes: bool
    worst_direction: tuple


@dataclasses.dataclass(frozen=True)
class IdentityReport:
    """Max residual of each homogeneity/duality identity over random samples."""

    gradient_bound: float
    euler: float
    sign_homogeneity: float
    dual_unit: float
    dual_inversion: float
    samples: int

    def max_residual(self):
        return max(self.gradient_bound, self.euler, self.sign_homogeneity,
                   self.dual_unit, self.dual_inversion)


def sphere_directions(dim, n, seed=None, include_axes=True):
    """Deterministic sampling of the Euclidean unit sphere.

    N=2 uses a uniform angular grid (hits the axes when 4 | n), higher
    dimensions use a seeded Gaussian sample; coordinate axes are appended so
    degenerate directions of lq norms are always probed.
    """
    if dim == 2:
        th = np.arange(n) * (2 * np.pi / n)
        pts = np.column_stack([np.cos(th), np.sin(th)])
    else:
        rng = np.random.default_rng(0 if seed is None else seed)
        pts = rng.standard_normal((n, dim))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    if include_axes:
        pts = np.vstack([pts, np.eye(dim), np.full((1, dim), dim ** -0.5)])
    return pts


def check_assumptions(norm, sphere_samples=256, tol=1e-8):
    """Extremize H over the sphere and scan the least Hessian eigenvalue.

    ``passes`` is False for norms whose coefficient matrix degenerates (for
    example lq with q > 2 on the axes); such norms are admitted with a warning
    and refused by the planar solver.
    """
    min_required = 64 if norm.dim == 2 else 32 * norm.dim
    if sphere_samples < min_required:
        raise NormError(f"need at least {min_required} sphere samples for dim {norm.dim}")
    pts = sphere_directions(norm.dim, sphere_samples)
    h = norm.value(pts)
    alpha, beta = float(np.min(h)), float(np.max(h))
    lam_min, worst = np.inf, pts[0]
    for xi in pts:
        lam = float(np.linalg.eigvalsh(norm.hess_power(xi))[0])
        if lam < lam_min:
            lam_min, worst = lam, xi
    passes = lam_min > tol
    if not passes:
        warnings.warn(
            f"{norm!r}: Hess(H^N/N) not uniformly positive definite on the sphere "
            f"(min eig {lam_min:.3e} at {worst}); planar solves will be refused",
            stacklevel=2,
        )
    return AssumptionReport(alpha, beta, lam_min, passes, tuple(worst))


def verify_identities(norm, samples=1000, tol=1e-8, seed=42):
    """Check the five structural identities on random nonzero samples.

    (1) |grad H| <= beta, (2) Euler identities for H and H0, (3) sign
    homogeneity of grad H, (4) H(grad H0) = 1 and H0(grad H) = 1,
    (5) H0(x) (grad H)(grad H0(x)) = x.  Raises NormError with the violating
    sample if any residual exceeds ``tol``.
    """
    if samples < 1:
        raise NormError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((samples, norm.dim))
    xi = xi[np.linalg.norm(xi, axis=1) > 1e-8]
    x = rng.standard_normal((len(xi), norm.dim))

    beta = float(np.max(norm.value(sphere_directions(norm.dim, 512))))
    g = norm.gradient(xi)
    r1 = float(np.max(np.maximum(np.linalg.norm(g, axis=1) - beta, 0.0))) / beta

    h = norm.value(xi)
    r2a = np.abs(np.einsum("ij,ij->i", g, xi) - h) / h
    h0x = norm.dual_value(x)
    g0 = norm.dual_gradient(x)
    r2b = np.abs(np.einsum("ij,ij->i", g0, x) - h0x) / h0x
    r2 = float(max(np.max(r2a), np.max(r2b)))

    r3 = 0.0
    for t in (-2.0, -0.5, 0.7, 3.0):
        gt = norm.gradient(t * xi)
        r3 = max(r3, float(np.max(np.linalg.norm(gt - np.sign(t) * g, axis=1))))

    r4 = float(max(np.max(np.abs(norm.value(g0) - 1.0)), np.max(np.abs(norm.dual_value(g) - 1.0))))

    r5 = float(np.max(
        np.linalg.norm(h0x[:, None] * norm.gradient(g0) - x, axis=1) / np.linalg.norm(x, axis=1)
    ))

    report = IdentityReport(r1, r2, r3, r4, r5, len(xi))
    if report.max_residual() > tol:
        bad = int(np.argmax(r2a)) if np.max(r2a) > tol else 0
        raise NormError(
            f"norm identity residual {report.max_residual():.3e} exceeds tol {tol:.1e} "
            f"(report {report}, sample xi={xi[bad]})"
        )
    return report
