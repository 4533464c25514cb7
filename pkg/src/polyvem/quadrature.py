"""Quadrature on edges, triangles and polygonal cells.

Triangle rules are collapsed (Duffy-type) tensor Gauss-Legendre rules, so
any requested order is available without tabulated constants.  Polygon
rules triangulate the cell (centroid fan for convex cells, ear clipping
for cells with reflex vertices) and map the triangle rule to each piece.
Edge rules are Gauss-Lobatto: their nodes double as the edge degrees of
freedom of the order-k virtual space, which makes boundary integrals of
traces diagonal in the edge DOFs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as _leg


class QuadratureError(Exception):
    """Raised when a rule cannot be constructed (degenerate geometry)."""


# ---------------------------------------------------------------------------
# reference triangle rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TriangleRule:
    """Rule on the reference triangle (0,0)-(1,0)-(0,1).

    Parameters
    ----------
    order : int
        Largest total polynomial degree integrated exactly.
    points : ndarray, shape (n, 3)
        Barycentric coordinates of the nodes.
    weights : ndarray, shape (n,)
        Normalized weights, summing to 1.  The physical weight on a
        triangle T is ``weights * area(T)``.
    """

    order: int
    points: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=None)
def triangle_rule(order: int) -> TriangleRule:
    """Build a rule exact for bivariate polynomials up to ``order``.

    Uses the square-to-triangle collapse x = u, y = v(1-u) with Jacobian
    (1-u): a degree-d integrand becomes degree d+1 in u and d in v, so
    Gauss-Legendre with ceil((d+2)/2) x ceil((d+1)/2) points is exact.
    """
    if order < 0:
        raise ValueError("quadrature order must be >= 0")
    nu = (order + 3) // 2
    nv = (order + 2) // 2
    xu, wu = _leg.leggauss(nu)
    xv, wv = _leg.leggauss(nv)
    # map [-1,1] -> [0,1]
    su, pu = (xu + 1.0) / 2.0, wu / 2.0
    sv, pv = (xv + 1.0) / 2.0, wv / 2.0
    u = np.repeat(su, nv)
    v = np.tile(sv, nu)
    w = np.repeat(pu, nv) * np.tile(pv, nu) * (1.0 - u)
    x = u
    y = v * (1.0 - u)
    bary = np.column_stack([1.0 - x - y, x, y])
    weights = w / w.sum()
    return TriangleRule(order=order, points=bary, weights=weights)


def map_to_triangle(rule: TriangleRule, tri: np.ndarray):
    """Map a reference rule to the physical triangle ``tri`` (3x2 array).

    Returns (points, weights) with weights summing to the triangle area.
    Orientation does not matter; the absolute area is used.
    """
    tri = np.asarray(tri, dtype=float)
    area = 0.5 * abs(
        (tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1])
        - (tri[2, 0] - tri[0, 0]) * (tri[1, 1] - tri[0, 1])
    )
    pts = rule.points @ tri
    return pts, rule.weights * area


# ---------------------------------------------------------------------------
# polygon triangulation
# ---------------------------------------------------------------------------


def _signed_area(coords: np.ndarray) -> float:
    x, y = coords[:, 0], coords[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _area_centroid(coords: np.ndarray):
    x, y = coords[:, 0], coords[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    area = 0.5 * cross.sum()
    cx = ((x + np.roll(x, -1)) * cross).sum() / (6.0 * area)
    cy = ((y + np.roll(y, -1)) * cross).sum() / (6.0 * area)
    return area, np.array([cx, cy])


def _turn_crosses(coords: np.ndarray) -> np.ndarray:
    prev = coords - np.roll(coords, 1, axis=0)
    nxt = np.roll(coords, -1, axis=0) - coords
    return prev[:, 0] * nxt[:, 1] - prev[:, 1] * nxt[:, 0]


def triangulate_polygon(coords: np.ndarray) -> list[np.ndarray]:
    """Split a simple CCW polygon into triangles (as 3x2 coordinate arrays).

    Convex polygons (collinear vertices allowed) get a fan from the area
    centroid; polygons with a reflex vertex are ear-clipped.
    """
    coords = np.asarray(coords, dtype=float)
    n = len(coords)
    if n < 3:
        raise QuadratureError("polygon needs at least 3 vertices")
    scale = float(np.ptp(coords, axis=0).max())
    if scale <= 0.0:
        raise QuadratureError("degenerate polygon: zero extent")
    tol = 1e-12 * scale * scale
    poly_area = _signed_area(coords)
    if poly_area <= tol:
        raise QuadratureError("polygon is not CCW or has (near-)zero area")
    crosses = _turn_crosses(coords)
    if np.all(crosses >= -tol):
        _, centroid = _area_centroid(coords)
        tris = []
        for i in range(n):
            tri = np.array([centroid, coords[i], coords[(i + 1) % n]])
            if _signed_area(tri) > tol:
                tris.append(tri)
    else:
        tris = _ear_clip(coords, tol)
    covered = sum(_signed_area(t) for t in tris)
    if abs(covered - poly_area) > 1e-9 * max(poly_area, scale * scale):
        raise QuadratureError(
            "triangulation failure: triangle areas do not cover the polygon "
            "(self-intersecting loop?)"
        )
    return tris


def _point_in_triangle(p: np.ndarray, a, b, c, tol: float) -> bool:
    # strictly inside (boundary points do not block an ear)
    d1 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    d2 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])
    d3 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])
    return d1 > tol and d2 > tol and d3 > tol


def _ear_clip(coords: np.ndarray, tol: float) -> list[np.ndarray]:
    idx = list(range(len(coords)))
    tris: list[np.ndarray] = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 4 * len(coords) * len(coords):
            raise QuadratureError("triangulation failure: no ear found (tangled polygon?)")
        clipped = False
        m = len(idx)
        for j in range(m):
            ia, ib, ic = idx[j - 1], idx[j], idx[(j + 1) % m]
            a, b, c = coords[ia], coords[ib], coords[ic]
            cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
            if cross < -tol:
                continue  # reflex tip
            if cross <= tol:
                # collinear: a hanging vertex on a straight run; drop it
                if min(a[0], c[0]) - 1e-12 <= b[0] <= max(a[0], c[0]) + 1e-12 and \
                   min(a[1], c[1]) - 1e-12 <= b[1] <= max(a[1], c[1]) + 1e-12:
                    idx.pop(j)
                    clipped = True
                    break
                continue
            blocked = any(
                _point_in_triangle(coords[other], a, b, c, tol)
                for other in idx
                if other not in (ia, ib, ic)
            )
            if blocked:
                continue
            tris.append(np.array([a, b, c]))
            idx.pop(j)
            clipped = True
            break
        if not clipped:
            raise QuadratureError("triangulation failure: no ear found (tangled polygon?)")
    last = coords[idx]
    if _signed_area(last) > tol:
        tris.append(np.array(last))
    return tris


# ---------------------------------------------------------------------------
# polygon rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolygonRule:
    """Physical-space rule over one polygonal cell.

    weights carry the area measure: sum(weights) == |K|.
    """

    order: int
    points: np.ndarray  # (n, 2)
    weights: np.ndarray  # (n,)


def polygon_rule(coords: np.ndarray, order: int) -> PolygonRule:
    """Rule over the simple CCW polygon ``coords``, exact up to ``order``."""
    base = triangle_rule(order)
    pts = []
    wts = []
    for tri in triangulate_polygon(coords):
        p, w = map_to_triangle(base, tri)
        pts.append(p)
        wts.append(w)
    return PolygonRule(order=order, points=np.vstack(pts), weights=np.concatenate(wts))


# ---------------------------------------------------------------------------
# edge rules (Gauss-Lobatto)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EdgeRule:
    """Gauss-Lobatto rule along a physical edge.

    Nodes include both endpoints; exact for polynomials of degree
    <= 2*npoints - 3 along the edge.
    """

    points: np.ndarray  # (n, 2)
    weights: np.ndarray  # (n,)


@lru_cache(maxsize=None)
def gauss_lobatto(npoints: int):
    """Reference Gauss-Lobatto nodes/weights on [-1, 1] (weights sum to 2)."""
    if npoints < 2:
        raise ValueError("Gauss-Lobatto needs at least 2 points")
    if npoints == 2:
        return np.array([-1.0, 1.0]), np.array([1.0, 1.0])
    # interior nodes are the roots of P'_{n-1}
    series = np.zeros(npoints)
    series[-1] = 1.0
    interior = np.sort(_leg.legroots(_leg.legder(series)))
    nodes = np.concatenate([[-1.0], np.real(interior), [1.0]])
    pvals = _leg.legval(nodes, series)
    weights = 2.0 / (npoints * (npoints - 1) * pvals**2)
    return nodes, weights


def edge_gauss_lobatto(a, b, npoints: int) -> EdgeRule:
    """Gauss-Lobatto rule on the segment from ``a`` to ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.hypot(*(b - a)))
    if length <= 1e-14:
        raise QuadratureError("zero-length edge")
    nodes, weights = gauss_lobatto(npoints)
    pts = a[None, :] + 0.5 * (nodes[:, None] + 1.0) * (b - a)[None, :]
    return EdgeRule(points=pts, weights=weights * (length / 2.0))


def lobatto_interior_params(k: int) -> np.ndarray:
    """Parameters in (0,1) of the k-1 interior Lobatto nodes of a (k+1)-point rule."""
    if k < 2:
        return np.empty(0)
    nodes, _ = gauss_lobatto(k + 1)
    return (nodes[1:-1] + 1.0) / 2.0
