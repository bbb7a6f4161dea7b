"""Mesh construction and planar minimizer tests, with stiffness-matrix,
change-of-variables and radial cross-oracles."""

import numpy as np
import pytest

from finslab import (
    EllipseNorm,
    EuclideanNorm,
    LqNorm,
    MeshError,
    PlanarField,
    SolveConfig,
    SolverError,
    assemble_energy,
    blowup_diagnostics,
    disk_mesh,
    first_eigenvalue,
    least_energy_solution,
    limit_constants,
    lambda1_wulff,
    minimize_cp,
    polygon_mesh,
    solve_radial,
    square_mesh,
)
from finslab.mesh import read_polygon, tri_geometry
from finslab.planar import count_local_maxima, lumped_integral
from finslab.polygons import point_in_polygon, polygon_area

EUCLID = EuclideanNorm(2)
ELLIPSE = EllipseNorm(np.diag([4.0, 1.0]))


@pytest.fixture(scope="module")
def disk24():
    return disk_mesh(1.0 / 24.0)


@pytest.fixture(scope="module")
def square32():
    return square_mesh(1.0 / 32.0)


class TestMesh:
    def test_square_structure(self, square32):
        m = square32
        assert m.n_vertices == 33 * 33
        area, _ = tri_geometry(m)
        assert np.all(area > 0)
        assert np.sum(area) == pytest.approx(1.0, abs=1e-12)
        assert np.sum(m.boundary) == 4 * 32
        assert m.h_max <= np.sqrt(2.0) / 32 + 1e-12

    def test_disk_covers_polygon_area(self, disk24):
        m = disk24
        area, _ = tri_geometry(m)
        assert np.sum(area) == pytest.approx(polygon_area(m.polygon), rel=1e-10)
        assert polygon_area(m.polygon) == pytest.approx(np.pi, rel=5e-3)
        on_circle = np.abs(np.linalg.norm(m.vertices[m.boundary], axis=1) - 1.0)
        assert np.max(on_circle) < 1e-12

    def test_boundary_vertices_on_polygon(self, disk24):
        d = disk24.interior_distance(disk24.vertices[disk24.boundary][0])
        assert d < 1e-12

    def test_nonconvex_polygon(self):
        lshape = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], dtype=float)
        m = polygon_mesh(lshape, 0.1)
        area, _ = tri_geometry(m)
        assert np.sum(area) == pytest.approx(3.0, rel=1e-10)
        # no triangle centroid in the cut corner
        cent = m.vertices[m.triangles].mean(axis=1)
        assert not np.any((cent[:, 0] > 1.0 + 1e-9) & (cent[:, 1] > 1.0 + 1e-9))

    def test_rejects_self_intersecting(self):
        bowtie = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float)
        with pytest.raises(MeshError):
            polygon_mesh(bowtie, 0.2)

    def test_read_polygon(self, tmp_path):
        f = tmp_path / "poly.txt"
        f.write_text("0 0\n1 0  # corner\n1 1\n0 1\n")
        v = read_polygon(str(f))
        assert v.shape == (4, 2)
        bad = tmp_path / "bad.txt"
        bad.write_text("0 0\n1\n")
        with pytest.raises(MeshError):
            read_polygon(str(bad))

    def test_point_in_polygon(self):
        sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        assert point_in_polygon([0.5, 0.5], sq)
        assert not point_in_polygon([1.5, 0.5], sq)


class TestEnergy:
    def test_masked_linear_field_self_consistency(self, square32):
        m = square32
        u = np.where(m.boundary, 0.0, m.vertices[:, 0])
        field = PlanarField(m, u)
        area, grads = tri_geometry(m)
        g = np.einsum("tk,tki->ti", u[m.triangles], grads)
        by_hand = float(np.sum(area * np.sum(g * g, axis=1)))
        assert assemble_energy(field, EUCLID) == pytest.approx(by_hand, rel=1e-14)

    def test_euclidean_matches_stiffness_matrix(self, square32):
        # textbook P1 stiffness assembly, element matrix from edge vectors
        m = square32
        rng = np.random.default_rng(0)
        u = rng.standard_normal(m.n_vertices)
        u[m.boundary] = 0.0
        area, grads = tri_geometry(m)
        quad = 0.0
        for k in range(3):
            for l in range(3):
                quad += np.sum(area * np.einsum("ti,ti->t", grads[:, k], grads[:, l])
                               * u[m.triangles[:, k]] * u[m.triangles[:, l]])
        assert assemble_energy(PlanarField(m, u), EUCLID) == pytest.approx(float(quad), rel=1e-12)

    def test_ellipse_change_of_variables(self, square32):
        # energy under A equals det(A^1/2) times the Dirichlet energy of the
        # same nodal values on the A^(-1/2)-mapped mesh (exact for P1 fields)
        import dataclasses
        m = square32
        rng = np.random.default_rng(1)
        u = rng.standard_normal(m.n_vertices)
        u[m.boundary] = 0.0
        root = np.diag([2.0, 1.0])            # A^(1/2) for diag(4, 1)
        mapped = dataclasses.replace(m, vertices=m.vertices @ np.linalg.inv(root))
        e_aniso = assemble_energy(PlanarField(m, u), ELLIPSE)
        e_mapped = assemble_energy(PlanarField(mapped, u), EUCLID) * np.linalg.det(root)
        assert e_aniso == pytest.approx(e_mapped, rel=1e-12)


class TestEigenvalue:
    def test_disk_bessel(self, disk24):
        lam, _, info = first_eigenvalue(disk24, EUCLID, SolveConfig())
        assert abs(lam - lambda1_wulff(1.0)) / lambda1_wulff(1.0) < 0.02

    def test_square_separation_of_variables(self, square32):
        lam, _, _ = first_eigenvalue(square32, EUCLID, SolveConfig())
        assert abs(lam - 2 * np.pi ** 2) / (2 * np.pi ** 2) < 0.02

    def test_ellipse_change_of_variables_oracle(self, square32):
        # lambda_1^H([0,1]^2) = lambda_1^euclid(A^(-1/2)[0,1]^2)
        #                     = lambda_1^euclid([0,1/2]x[0,1]) = 5 pi^2
        lam, _, _ = first_eigenvalue(square32, ELLIPSE, SolveConfig())
        target = 5.0 * np.pi ** 2
        assert abs(lam - target) / target < 0.02


class TestMinimizeCp:
    def test_matches_radial_on_disk(self, disk24):
        warm = None
        for p in (3.0, 5.0):
            field, Cp, info = minimize_cp(disk24, EUCLID, SolveConfig(p=p), u0=warm)
            warm = field.values
            rad = solve_radial(EUCLID, p)
            assert abs(Cp - rad.Cp) / rad.Cp < 0.03

    def test_stationarity_under_more_iterations(self, disk24):
        cfg = SolveConfig(p=5.0, max_iters=400)
        _, cp1, _ = minimize_cp(disk24, EUCLID, cfg)
        _, cp2, _ = minimize_cp(disk24, EUCLID, cfg.replace(max_iters=800))
        assert abs(cp1 - cp2) < cfg.grad_tol * 10

    def test_energy_descent_history(self, disk24):
        _, _, info = minimize_cp(disk24, EUCLID, SolveConfig(p=4.0))
        hist = np.asarray(info["energy_history"])
        assert np.all(np.diff(hist) <= 1e-12)

    def test_minimizer_nonnegative(self, disk24):
        field, _, _ = minimize_cp(disk24, EUCLID, SolveConfig(p=4.0))
        assert np.all(field.values >= 0.0)
        assert np.all(field.values[field.mesh.boundary] == 0.0)

    def test_refuses_degenerate_norm(self, square32):
        with pytest.warns(UserWarning):
            with pytest.raises(SolverError):
                minimize_cp(square32, LqNorm(4.0, 2), SolveConfig(p=5.0))

    def test_requires_p_above_one(self, square32):
        with pytest.raises(SolverError):
            minimize_cp(square32, EUCLID, SolveConfig(p=1.0))

    def test_seed_reproducibility(self, disk24):
        a = minimize_cp(disk24, EUCLID, SolveConfig(p=6.0, seed=7))
        b = minimize_cp(disk24, EUCLID, SolveConfig(p=6.0, seed=7))
        assert np.array_equal(a[0].values, b[0].values)
        assert a[1] == b[1]

    def test_mesh_refinement_consistency(self):
        # Cp(h) vs Cp(h/2) within 3 percent against the radial oracle at p=5
        rad = solve_radial(EUCLID, 5.0)
        values = []
        for h in (1.0 / 12.0, 1.0 / 24.0):
            mesh = disk_mesh(h)
            _, Cp, _ = minimize_cp(mesh, EUCLID, SolveConfig(p=5.0))
            values.append(Cp)
            assert abs(Cp - rad.Cp) / rad.Cp < 0.03
        assert abs(values[0] - values[1]) / values[1] < 0.03


class TestLeastEnergySolution:
    def test_identity_when_cp_is_one(self, disk24):
        field = PlanarField(disk24, np.ones(disk24.n_vertices))
        scaled = least_energy_solution(field, 1.0, 7.0)
        assert np.array_equal(scaled.values, field.values)

    def test_weak_form_identity(self, disk24):
        p = 5.0
        field, Cp, _ = minimize_cp(disk24, EUCLID, SolveConfig(p=p))
        up = least_energy_solution(field, Cp, p)
        energy = assemble_energy(up, EUCLID)
        mass = lumped_integral(disk24, up.values, p + 1.0)
        assert abs(energy - mass) / mass < 0.01

    def test_sup_norm_close_to_radial(self, disk24):
        p = 3.0
        field, Cp, _ = minimize_cp(disk24, EUCLID, SolveConfig(p=p))
        up = least_energy_solution(field, Cp, p)
        rad = solve_radial(EUCLID, p)
        assert abs(up.max() - rad.umax) / rad.umax < 0.03


class TestDiagnostics:
    def test_square_peaks_interior(self, square32):
        geo = limit_constants(EUCLID, budget=8)
        fields, ps = [], []
        warm = None
        for p in (5.0, 10.0, 20.0):
            field, Cp, _ = minimize_cp(square32, EUCLID, SolveConfig(p=p), u0=warm)
            warm = field.values
            fields.append(least_energy_solution(field, Cp, p))
            ps.append(p)
        rows = blowup_diagnostics(fields, EUCLID, ps, geometry=geo)
        gammas = [r["gamma_020"] for r in rows]
        for row in rows:
            assert row["peak_dist"] >= 0.1
            assert row["local_maxima"] == 1
        assert gammas[-1] > 0.95
        assert gammas == sorted(gammas)

    def test_count_local_maxima_two_bumps(self, square32):
        x, y = square32.vertices[:, 0], square32.vertices[:, 1]
        u = np.exp(-60 * ((x - 0.25) ** 2 + (y - 0.5) ** 2)) + \
            np.exp(-60 * ((x - 0.75) ** 2 + (y - 0.5) ** 2))
        u[square32.boundary] = 0.0
        assert count_local_maxima(PlanarField(square32, u)) == 2
