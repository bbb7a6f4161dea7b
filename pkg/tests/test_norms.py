"""Norm toolkit tests: closed-form values, derivative oracles by central
finite differences, duality identities, and validity checks."""

import numpy as np
import pytest

from finslab import (
    EllipseNorm,
    EuclideanNorm,
    LqNorm,
    NormError,
    check_assumptions,
    parse_norm,
    verify_identities,
)


def fd_gradient(f, x, h=1e-7):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_hessian(f, x, h=1e-4):
    x = np.asarray(x, dtype=float)
    n = len(x)
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            ei = np.zeros(n); ei[i] = h
            ej = np.zeros(n); ej[j] = h
            H[i, j] = (f(x + ei + ej) - f(x + ei - ej)
                       - f(x - ei + ej) + f(x - ei - ej)) / (4 * h * h)
    return H


class TestValues:
    def test_euclidean(self):
        n = EuclideanNorm(2)
        assert n.value([3.0, 4.0]) == pytest.approx(5.0, abs=1e-15)

    def test_ellipse_axis(self):
        n = EllipseNorm(np.diag([4.0, 1.0]))
        assert n.value([1.0, 0.0]) == pytest.approx(2.0, abs=1e-15)

    def test_lq3(self):
        n = LqNorm(3.0, 2)
        assert n.value([1.0, 1.0]) == pytest.approx(2.0 ** (1.0 / 3.0), rel=1e-12)

    def test_batched_evaluation(self):
        n = EllipseNorm(np.diag([4.0, 1.0]))
        pts = np.array([[1.0, 0.0], [0.0, 1.0], [3.0, 4.0]])
        np.testing.assert_allclose(n.value(pts), [2.0, 1.0, np.sqrt(52.0)], rtol=1e-14)

    def test_homogeneity_and_triangle(self):
        rng = np.random.default_rng(3)
        for norm in (EuclideanNorm(2), EllipseNorm([[4.0, 1.0], [1.0, 2.0]]), LqNorm(2.5, 2)):
            xi = rng.standard_normal((200, 2))
            eta = rng.standard_normal((200, 2))
            for t in (-2.0, 0.5, 3.0):
                np.testing.assert_allclose(norm.value(t * xi), abs(t) * norm.value(xi), rtol=1e-12)
            assert np.all(norm.value(xi + eta) <= norm.value(xi) + norm.value(eta) + 1e-12)
            assert np.all(norm.value(xi[np.linalg.norm(xi, axis=1) > 0]) > 0)


class TestGradients:
    def test_euclidean_example(self):
        n = EuclideanNorm(2)
        np.testing.assert_allclose(n.gradient([3.0, 4.0]), [0.6, 0.8], rtol=1e-14)

    def test_ellipse_example(self):
        A = np.diag([4.0, 1.0])
        n = EllipseNorm(A)
        np.testing.assert_allclose(n.gradient([1.0, 1.0]),
                                   np.array([4.0, 1.0]) / np.sqrt(5.0), rtol=1e-14)

    def test_lq_fd_oracle(self):
        n = LqNorm(2.5, 2)
        rng = np.random.default_rng(11)
        for _ in range(20):
            xi = rng.standard_normal(2)
            if np.min(np.abs(xi)) < 0.05:
                continue
            g = n.gradient(xi)
            g_fd = fd_gradient(lambda z: float(n.value(z)), xi)
            np.testing.assert_allclose(g, g_fd, rtol=1e-6, atol=1e-8)

    def test_gradient_rejects_origin(self):
        with pytest.raises(NormError):
            EuclideanNorm(2).gradient([0.0, 0.0])

    def test_euler_identity_property(self):
        rng = np.random.default_rng(5)
        for norm in (EuclideanNorm(2), EllipseNorm([[4.0, 0.0], [0.0, 1.0]]),
                     LqNorm(3.0, 2), EuclideanNorm(3)):
            xi = rng.standard_normal((1000, norm.dim))
            xi = xi[np.linalg.norm(xi, axis=1) > 1e-6]
            g = norm.gradient(xi)
            h = norm.value(xi)
            assert np.max(np.abs(np.einsum("ij,ij->i", g, xi) - h) / h) <= 1e-8

    def test_sign_homogeneity(self):
        n = LqNorm(2.5, 2)
        xi = np.array([0.7, -1.3])
        g = n.gradient(xi)
        np.testing.assert_allclose(n.gradient(-3.0 * xi), -g, rtol=1e-12)
        np.testing.assert_allclose(n.gradient(0.25 * xi), g, rtol=1e-12)


class TestHessPower:
    def test_euclidean_identity(self):
        n = EuclideanNorm(2)
        np.testing.assert_allclose(n.hess_power([0.3, -1.2]), np.eye(2), atol=1e-14)

    def test_ellipse_matrix(self):
        A = np.array([[4.0, 1.0], [1.0, 2.0]])
        n = EllipseNorm(A)
        np.testing.assert_allclose(n.hess_power([0.5, 2.0]), A, atol=1e-12)

    def test_lq_fd_oracle(self):
        # hess_power returns Hess(H^N / N): H^2/2 in the plane
        n = LqNorm(3.0, 2)
        xi = np.array([1.0, 2.0])
        H = n.hess_power(xi)
        H_fd = fd_hessian(lambda z: float(n.value(z)) ** 2 / 2.0, xi)
        np.testing.assert_allclose(H, H_fd, rtol=1e-5)

    def test_lq_fd_oracle_3d(self):
        n = LqNorm(3.0, 3)
        xi = np.array([1.0, 2.0, -0.7])
        H = n.hess_power(xi)
        H_fd = fd_hessian(lambda z: float(n.value(z)) ** 3 / 3.0, xi)
        np.testing.assert_allclose(H, H_fd, rtol=1e-5, atol=1e-7)

    def test_symmetry(self):
        rng = np.random.default_rng(7)
        for norm in (EuclideanNorm(3), EllipseNorm(np.diag([4.0, 1.0])), LqNorm(2.5, 2)):
            for _ in range(10):
                xi = rng.standard_normal(norm.dim)
                H = norm.hess_power(xi)
                assert np.max(np.abs(H - H.T)) <= 1e-12 * max(1.0, np.max(np.abs(H)))

    def test_flux_jacobian_consistency(self):
        # d/dt flux(xi + t eta) at t=0 equals hess_power(xi) @ eta
        rng = np.random.default_rng(9)
        for norm in (EllipseNorm([[4.0, 0.0], [0.0, 1.0]]), LqNorm(2.5, 2), EuclideanNorm(3)):
            xi = rng.standard_normal(norm.dim)
            eta = rng.standard_normal(norm.dim)
            t = 1e-6
            fd = (norm.flux(xi + t * eta) - norm.flux(xi - t * eta)) / (2 * t)
            np.testing.assert_allclose(fd, norm.hess_power(xi) @ eta, rtol=1e-5, atol=1e-7)

    def test_flux_vanishes_at_origin(self):
        for norm in (EuclideanNorm(2), LqNorm(2.5, 3)):
            np.testing.assert_allclose(norm.flux(np.zeros(norm.dim)), 0.0, atol=1e-300)

    def test_flux_homogeneous(self):
        n = EllipseNorm(np.diag([4.0, 1.0]))
        xi = np.array([0.4, -0.9])
        np.testing.assert_allclose(n.flux(3.0 * xi), 3.0 * n.flux(xi), rtol=1e-12)


class TestDual:
    def test_euclidean_self_dual(self):
        n = EuclideanNorm(2)
        assert n.dual_value([3.0, 4.0]) == pytest.approx(5.0, abs=1e-14)

    def test_lq3_dual_exponent(self):
        n = LqNorm(3.0, 2)
        assert n.dual_value([1.0, 1.0]) == pytest.approx(2.0 ** (2.0 / 3.0), rel=1e-12)

    def test_ellipse_dual(self):
        n = EllipseNorm(np.diag([4.0, 1.0]))
        assert n.dual_value([1.0, 0.0]) == pytest.approx(0.5, abs=1e-14)

    def test_dual_gradient_examples(self):
        n = EuclideanNorm(2)
        np.testing.assert_allclose(n.dual_gradient([0.0, 2.0]), [0.0, 1.0], atol=1e-14)
        e = EllipseNorm(np.diag([4.0, 1.0]))
        g = e.dual_gradient([2.0, 0.0])
        np.testing.assert_allclose(g, [0.5, 0.0], atol=1e-14)
        assert e.value(g) == pytest.approx(1.0, abs=1e-14)

    def test_dual_inversion_residual_lq(self):
        n = LqNorm(3.0, 2)
        rng = np.random.default_rng(13)
        for _ in range(25):
            x = rng.standard_normal(2)
            res = n.dual_value(x) * n.gradient(n.dual_gradient(x)) - x
            assert np.linalg.norm(res) <= 1e-5 * np.linalg.norm(x)

    def test_dual_of_dual_closed_forms(self):
        # dual of ellipse(A) is ellipse(A^-1); dualizing again recovers A
        A = np.array([[4.0, 1.0], [1.0, 2.0]])
        n, nd = EllipseNorm(A), EllipseNorm(np.linalg.inv(A))
        rng = np.random.default_rng(17)
        x = rng.standard_normal((200, 2))
        np.testing.assert_allclose(n.dual_value(x), nd.value(x), rtol=1e-6)
        np.testing.assert_allclose(nd.dual_value(x), n.value(x), rtol=1e-6)
        q = 2.5
        lq, lqd = LqNorm(q, 2), LqNorm(q / (q - 1.0), 2)
        np.testing.assert_allclose(lq.dual_value(x), lqd.value(x), rtol=1e-6)
        np.testing.assert_allclose(lqd.dual_value(x), lq.value(x), rtol=1e-6)

    def test_numeric_dual_matches_analytic(self):
        for spec in ("lq:2.5", "ellipse:4,0,1"):
            an = parse_norm(spec, dim=2)
            nu = parse_norm(spec, dim=2, dual_mode="numeric")
            rng = np.random.default_rng(19)
            x = rng.standard_normal((50, 2))
            np.testing.assert_allclose(nu.dual_value(x), an.dual_value(x), rtol=1e-7)

    def test_dual_bounds(self):
        n = EllipseNorm(np.diag([4.0, 1.0]))
        rep = check_assumptions(n)
        rng = np.random.default_rng(23)
        x = rng.standard_normal((300, 2))
        r = np.linalg.norm(x, axis=1)
        h0 = n.dual_value(x)
        assert np.all(h0 >= r / rep.beta - 1e-12)
        assert np.all(h0 <= r / rep.alpha + 1e-12)


class TestIdentitySuite:
    def test_euclidean(self):
        rep = verify_identities(EuclideanNorm(2), samples=1000, tol=1e-8)
        assert rep.max_residual() < 1e-10

    def test_ellipse(self):
        rep = verify_identities(EllipseNorm(np.diag([4.0, 1.0])), samples=1000, tol=1e-8)
        assert rep.max_residual() < 1e-8

    def test_lq_numeric_dual(self):
        n = parse_norm("lq:2.5", dim=2, dual_mode="numeric")
        rep = verify_identities(n, samples=1000, tol=1e-5)
        assert rep.max_residual() < 1e-5

    def test_requires_samples(self):
        with pytest.raises(NormError):
            verify_identities(EuclideanNorm(2), samples=0)


class TestAssumptions:
    def test_euclidean(self):
        rep = check_assumptions(EuclideanNorm(2))
        assert rep.alpha == pytest.approx(1.0, abs=1e-12)
        assert rep.beta == pytest.approx(1.0, abs=1e-12)
        assert rep.hess_min_eig == pytest.approx(1.0, abs=1e-10)
        assert rep.passes

    def test_ellipse(self):
        rep = check_assumptions(EllipseNorm(np.diag([4.0, 1.0])))
        assert rep.alpha == pytest.approx(1.0, abs=1e-6)
        assert rep.beta == pytest.approx(2.0, abs=1e-6)
        assert rep.hess_min_eig == pytest.approx(1.0, abs=1e-6)
        assert rep.passes

    def test_lq4_degenerate(self):
        with pytest.warns(UserWarning):
            rep = check_assumptions(LqNorm(4.0, 2))
        assert rep.hess_min_eig == pytest.approx(0.0, abs=1e-9)
        assert not rep.passes

    def test_sample_floor(self):
        with pytest.raises(NormError):
            check_assumptions(EuclideanNorm(2), sphere_samples=8)


class TestParsing:
    def test_euclidean(self):
        assert parse_norm("euclidean", dim=3).dim == 3

    def test_ellipse_symmetric_completion(self):
        n = parse_norm("ellipse:4,0,1")
        np.testing.assert_allclose(n.A, [[4.0, 0.0], [0.0, 1.0]])
        n3 = parse_norm("ellipse:4,0,0,1,0,1")
        assert n3.dim == 3

    def test_rejects_non_positive_definite(self):
        with pytest.raises(NormError):
            parse_norm("ellipse:1,2,1")

    def test_rejects_bad_specs(self):
        for bad in ("lq:1", "lq:abc", "ellipse:1,2", "taxicab", "ellipse:a,b,c"):
            with pytest.raises(NormError):
                parse_norm(bad, dim=2)

    def test_roundtrip_spec(self):
        for spec in ("euclidean", "ellipse:4.0,0.0,1.0", "lq:2.5"):
            n = parse_norm(spec, dim=2)
            m = parse_norm(n.spec(), dim=2)
            assert type(m) is type(n)
