"""Conforming P1 triangulations of planar polygonal domains.

Built-in domains: the unit square [0,1]^2, polygonal approximations of the
unit disk, and user polygons (counter-clockwise ``x y`` vertex pairs, one
per line).  Interior points come from a hexagonal lattice clipped away from
the boundary; the triangulation is the Delaunay triangulation filtered to
triangles whose centroid lies inside the polygon, so non-convex domains work.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.spatial import Delaunay

from . import polygons


class MeshError(ValueError):
    pass


@dataclasses.dataclass(frozen=True, eq=False)
class Mesh:
    """Identity-hashed so solver-side assembly caches can key on the mesh."""

    vertices: np.ndarray        # (n, 2)
    triangles: np.ndarray       # (m, 3) int, counter-clockwise
    boundary: np.ndarray        # (n,) bool
    polygon: np.ndarray         # boundary polygon the mesh discretizes
    h_max: float

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def diameter(self):
        return polygons.polygon_diameter(self.polygon)

    def interior_distance(self, point):
        return polygons.distance_to_boundary(point, self.polygon)


def tri_geometry(mesh: Mesh):
    """Per-triangle areas and P1 shape-function gradients (m, 3, 2).

    Degenerate triangles (area below 1e-14 of h_max^2) are rejected.
    """
    V, T = mesh.vertices, mesh.triangles
    p0, p1, p2 = V[T[:, 0]], V[T[:, 1]], V[T[:, 2]]
    d1, d2 = p1 - p0, p2 - p0
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(det <= 1e-14 * mesh.h_max ** 2):
        raise MeshError("degenerate (or misoriented) triangle in mesh")
    area = 0.5 * det
    inv = np.empty((len(T), 2, 2))
    inv[:, 0, 0] = d2[:, 1] / det
    inv[:, 0, 1] = -d2[:, 0] / det
    inv[:, 1, 0] = -d1[:, 1] / det
    inv[:, 1, 1] = d1[:, 0] / det
    gref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    grads = np.einsum("kj,tji->tki", gref, inv)
    return area, grads


def _orient_ccw(vertices, triangles):
    p0 = vertices[triangles[:, 0]]
    d1 = vertices[triangles[:, 1]] - p0
    d2 = vertices[triangles[:, 2]] - p0
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    flip = det < 0
    triangles = triangles.copy()
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    return triangles


def _edge_lengths_max(vertices, triangles):
    h = 0.0
    for i, j in ((0, 1), (1, 2), (2, 0)):
        e = vertices[triangles[:, i]] - vertices[triangles[:, j]]
        h = max(h, float(np.max(np.linalg.norm(e, axis=1))))
    return h


def square_mesh(h):
    """Structured criss-cross triangulation of the unit square."""
    n = max(2, int(round(1.0 / h)))
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    V = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    tris = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            if (i + j) % 2 == 0:
                tris += [[a, b, c], [a, c, d]]
            else:
                tris += [[a, b, d], [b, c, d]]
    T = _orient_ccw(V, np.asarray(tris))
    bnd = (V[:, 0] < 1e-12) | (V[:, 0] > 1 - 1e-12) | \
          (V[:, 1] < 1e-12) | (V[:, 1] > 1 - 1e-12)
    mesh = Mesh(V, T, bnd, polygons.unit_square(), _edge_lengths_max(V, T))
    tri_geometry(mesh)
    return mesh


def polygon_mesh(boundary, h):
    """Unstructured mesh of a simple polygon with target spacing h.

    Boundary edges are subdivided at spacing <= h; interior points sit on a
    hexagonal lattice kept 0.55 h away from the boundary to avoid slivers.
    """
    boundary = np.asarray(boundary, dtype=float)
    if not polygons.is_simple_polygon(boundary):
        raise MeshError("polygon is self-intersecting")
    if polygons.polygon_area(boundary) < 0:
        boundary = boundary[::-1]

    bpts = []
    nb = len(boundary)
    for i in range(nb):
        a, b = boundary[i], boundary[(i + 1) % nb]
        k = max(1, int(round(np.linalg.norm(b - a) / h)))
        for t in np.arange(k) / k:
            bpts.append(a + t * (b - a))
    bpts = np.asarray(bpts)

    lo, hi = boundary.min(axis=0), boundary.max(axis=0)
    dy = h * np.sqrt(3.0) / 2.0
    rows = np.arange(lo[1] - h, hi[1] + h, dy)
    pts = []
    for k, y in enumerate(rows):
        xs = np.arange(lo[0] - h, hi[0] + h, h) + (k % 2) * h / 2.0
        row = np.column_stack([xs, np.full_like(xs, y)])
        keep = polygons.point_in_polygon(row, boundary)
        if np.any(keep):
            row = row[keep]
            keep2 = polygons.distance_to_boundary(row, boundary) > 0.55 * h
            pts.append(row[keep2])
    interior = np.vstack(pts) if pts else np.empty((0, 2))

    V = np.vstack([bpts, interior])
    T = Delaunay(V).simplices
    centroids = V[T].mean(axis=1)
    T = T[polygons.point_in_polygon(centroids, boundary)]
    T = _orient_ccw(V, T)
    used = np.zeros(len(V), dtype=bool)
    used[T.ravel()] = True
    if not used.all():
        remap = np.cumsum(used) - 1
        V, T = V[used], remap[T]
        nbnd = int(np.sum(used[:len(bpts)]))
    else:
        nbnd = len(bpts)
    bnd = np.zeros(len(V), dtype=bool)
    bnd[:nbnd] = True
    mesh = Mesh(V, T, bnd, boundary, _edge_lengths_max(V, T))
    tri_geometry(mesh)
    return mesh


def disk_mesh(h, radius=1.0, center=(0.0, 0.0)):
    """Mesh of the inscribed polygon approximating a disk of given radius."""
    m = max(16, int(round(2 * np.pi * radius / h)))
    return polygon_mesh(polygons.regular_polygon(radius, m, center), h)


def read_polygon(path):
    """Read one ``x y`` vertex pair per line (counter-clockwise)."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise MeshError(f"{path}:{line_no}: expected 'x y', got {line!r}")
            rows.append((float(parts[0]), float(parts[1])))
    if len(rows) < 3:
        raise MeshError(f"{path}: a polygon needs at least 3 vertices")
    return np.asarray(rows)


def domain_mesh(spec, h):
    """Build a mesh from a CLI domain spec: square | disk | polygon:<file>."""
    if spec == "square":
        return square_mesh(h)
    if spec == "disk":
        return disk_mesh(h)
    if spec.startswith("polygon:"):
        return polygon_mesh(read_polygon(spec[len("polygon:"):]), h)
    raise MeshError(f"unknown domain spec {spec!r}")
