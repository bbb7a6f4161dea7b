"""Small planar polygon utilities shared by the constants and mesh modules."""

from __future__ import annotations

import numpy as np


def polygon_area(vertices):
    """Signed shoelace area; positive for counter-clockwise orientation."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_diameter(vertices):
    v = np.asarray(vertices, dtype=float)
    d2 = np.sum((v[:, None, :] - v[None, :, :]) ** 2, axis=-1)
    return float(np.sqrt(d2.max()))


def is_simple_polygon(vertices, tol=1e-12):
    """True if no two non-adjacent edges intersect (O(n^2) segment test)."""
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    if n < 3:
        return False
    a = v
    b = np.roll(v, -1, axis=0)

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - \
               (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    for i in range(n):
        js = np.arange(i + 2, n if i > 0 else n - 1)
        if len(js) == 0:
            continue
        p1, p2 = a[i], b[i]
        q1, q2 = a[js], b[js]
        d1 = orient(p1[None], p2[None], q1)
        d2 = orient(p1[None], p2[None], q2)
        d3 = orient(q1, q2, np.broadcast_to(p1, q1.shape))
        d4 = orient(q1, q2, np.broadcast_to(p2, q1.shape))
        crossing = (d1 * d2 < -tol) & (d3 * d4 < -tol)
        if np.any(crossing):
            return False
    return True


def point_in_polygon(points, vertices):
    """Vectorized even-odd (ray casting) test; boundary points unspecified."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    v = np.asarray(vertices, dtype=float)
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x1, y1 = v[:, 0][None, :], v[:, 1][None, :]
    x2, y2 = np.roll(v[:, 0], -1)[None, :], np.roll(v[:, 1], -1)[None, :]
    cond = (y1 <= y) != (y2 <= y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    hits = cond & (x < xs)
    inside = np.sum(hits, axis=1) % 2 == 1
    return inside if np.asarray(points).ndim > 1 else bool(inside[0])


def distance_to_boundary(points, vertices):
    """Euclidean distance from each point to the polygon boundary."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    v = np.asarray(vertices, dtype=float)
    a = v[None, :, :]
    b = np.roll(v, -1, axis=0)[None, :, :]
    ab = b - a
    ap = pts[:, None, :] - a
    t = np.clip(np.sum(ap * ab, axis=-1) / np.sum(ab * ab, axis=-1), 0.0, 1.0)
    proj = a + t[..., None] * ab
    d = np.min(np.linalg.norm(pts[:, None, :] - proj, axis=-1), axis=1)
    return d if np.asarray(points).ndim > 1 else float(d[0])


def wulff_polygon(norm, radius=1.0, n_vertices=256):
    """Inscribed polygon approximating the Wulff ball {H0 < radius} (N=2)."""
    th = np.arange(n_vertices) * (2 * np.pi / n_vertices)
    u = np.column_stack([np.cos(th), np.sin(th)])
    return radius * u / norm.dual_value(u)[:, None]


def regular_polygon(radius=1.0, n_vertices=64, center=(0.0, 0.0)):
    th = np.arange(n_vertices) * (2 * np.pi / n_vertices)
    return np.column_stack([center[0] + radius * np.cos(th),
                            center[1] + radius * np.sin(th)])


def unit_square():
    return np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
