"""Polygonal mesh data model, mesh family generators, refinement and I/O.

Meshes are immutable after construction: generators and ``refine_cells``
always return new ``PolyMesh`` objects.  Cells are stored as CCW vertex
index loops; edges, boundary flags and per-cell geometry are derived.

The three built-in families discretize the unit square:

* distorted quadrilateral grids (randomly perturbed tensor meshes),
* clipped Voronoi diagrams (optionally Lloyd-relaxed, convex cells),
* concave meshes (each square split into two congruent polygons with a
  reflex vertex by a zigzag interface; h halves exactly under n -> 2n).

Hanging nodes created by local quad refinement are ordinary vertices in
the coarse neighbor's loop; no closure refinement is performed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Voronoi

__all__ = [
    "MeshError",
    "PolyMesh",
    "CellGeometry",
    "MeshQualityReport",
    "compute_cell_geometry",
    "compute_quality",
    "generate_distorted_square_mesh",
    "generate_voronoi_mesh",
    "voronoi_mesh_from_seeds",
    "generate_concave_mesh",
    "refine_cells",
    "read_mesh",
    "write_mesh",
    "mesh_to_string",
    "mesh_from_string",
]


class MeshError(Exception):
    """Invalid mesh data or failed mesh generation."""


# ---------------------------------------------------------------------------
# geometry helpers
# ---------------------------------------------------------------------------


def signed_area(coords: np.ndarray) -> float:
    """Shoelace signed area of a polygon given as an (m, 2) array."""
    x, y = coords[:, 0], coords[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def area_centroid(coords: np.ndarray):
    """(signed area, area centroid) of a simple polygon."""
    x, y = coords[:, 0], coords[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    area = 0.5 * float(cross.sum())
    if abs(area) < 1e-300:
        raise MeshError("degenerate polygon: zero area")
    cx = float(((x + np.roll(x, -1)) * cross).sum() / (6.0 * area))
    cy = float(((y + np.roll(y, -1)) * cross).sum() / (6.0 * area))
    return area, np.array([cx, cy])


def polygon_diameter(coords: np.ndarray) -> float:
    """Maximum pairwise vertex distance."""
    diff = coords[:, None, :] - coords[None, :, :]
    return float(np.sqrt((diff**2).sum(axis=2)).max())


def _segments_cross(p1, p2, p3, p4) -> bool:
    """True if open segments (p1,p2) and (p3,p4) properly intersect."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


@dataclass(frozen=True)
class CellGeometry:
    """Derived geometric data of one cell.

    ``normals`` are outward unit normals per edge; edge i runs from local
    vertex i to i+1 (mod m).
    """

    vertex_ids: np.ndarray
    coords: np.ndarray
    area: float
    centroid: np.ndarray
    diameter: float
    edge_lengths: np.ndarray
    normals: np.ndarray


def _build_cell_geometry(vertex_ids: np.ndarray, coords: np.ndarray, cell_index: int) -> CellGeometry:
    area, centroid = area_centroid(coords)
    if area <= 1e-14:
        raise MeshError(f"cell {cell_index} is degenerate or not CCW (signed area {area:.3e})")
    tangents = np.roll(coords, -1, axis=0) - coords
    lengths = np.hypot(tangents[:, 0], tangents[:, 1])
    if lengths.min() <= 1e-14:
        raise MeshError(f"cell {cell_index} has a zero-length edge")
    # right-hand normal of the CCW travel direction points outward
    normals = np.column_stack([tangents[:, 1], -tangents[:, 0]]) / lengths[:, None]
    return CellGeometry(
        vertex_ids=vertex_ids,
        coords=coords,
        area=area,
        centroid=centroid,
        diameter=polygon_diameter(coords),
        edge_lengths=lengths,
        normals=normals,
    )


# ---------------------------------------------------------------------------
# mesh data model
# ---------------------------------------------------------------------------


class PolyMesh:
    """Conforming polygonal mesh: vertices plus CCW cell loops.

    Edge connectivity and boundary flags are derived during construction
    and every cell is validated (>= 3 distinct vertices, positive signed
    area, each edge used by at most two cells with opposite orientation).
    """

    def __init__(self, vertices, cells):
        self.vertices = np.ascontiguousarray(np.asarray(vertices, dtype=float))
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be an (n, 2) array")
        if not np.isfinite(self.vertices).all():
            raise MeshError("non-finite vertex coordinates")
        nv = len(self.vertices)
        self.cells = []
        for ci, loop in enumerate(cells):
            arr = np.asarray(loop, dtype=np.int64)
            if arr.ndim != 1 or len(arr) < 3:
                raise MeshError(f"cell {ci} needs at least 3 vertices")
            if arr.min() < 0 or arr.max() >= nv:
                raise MeshError(f"cell {ci} has a vertex index out of range")
            if len(np.unique(arr)) != len(arr):
                raise MeshError(f"cell {ci} repeats a vertex in its loop")
            self.cells.append(arr)

        edge_map: dict[tuple[int, int], list[int]] = {}
        orientations: dict[tuple[int, int], list[bool]] = {}
        for ci, loop in enumerate(self.cells):
            for a, b in zip(loop, np.roll(loop, -1)):
                key = (int(min(a, b)), int(max(a, b)))
                edge_map.setdefault(key, []).append(ci)
                orientations.setdefault(key, []).append(bool(a < b))
        for key, owners in edge_map.items():
            if len(owners) > 2:
                raise MeshError(f"edge {key} is shared by more than two cells")
            if len(owners) == 2 and orientations[key][0] == orientations[key][1]:
                raise MeshError(f"edge {key} traversed twice in the same direction (winding error)")

        keys = sorted(edge_map)
        self.edges = np.array(keys, dtype=np.int64).reshape(-1, 2)
        self._edge_index = {key: i for i, key in enumerate(keys)}
        self.edge_cells = np.full((len(keys), 2), -1, dtype=np.int64)
        for i, key in enumerate(keys):
            owners = edge_map[key]
            self.edge_cells[i, : len(owners)] = owners
        self.boundary_edges = self.edge_cells[:, 1] == -1
        self.boundary_vertices = np.zeros(nv, dtype=bool)
        for e in np.nonzero(self.boundary_edges)[0]:
            self.boundary_vertices[self.edges[e]] = True

        self._geometry = [
            _build_cell_geometry(loop, self.vertices[loop], ci)
            for ci, loop in enumerate(self.cells)
        ]

    # -- basic queries ------------------------------------------------------

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def h(self) -> float:
        return max(g.diameter for g in self._geometry)

    def cell_geometry(self, cell_index: int) -> CellGeometry:
        return self._geometry[cell_index]

    def edge_id(self, a: int, b: int) -> int:
        return self._edge_index[(int(min(a, b)), int(max(a, b)))]

    def cell_edge_ids(self, cell_index: int):
        """(edge ids, forward flags) along the CCW loop of one cell.

        forward means the loop traverses the edge from its lower to its
        higher vertex index (the canonical orientation).
        """
        loop = self.cells[cell_index]
        ids = np.empty(len(loop), dtype=np.int64)
        forward = np.empty(len(loop), dtype=bool)
        for i, (a, b) in enumerate(zip(loop, np.roll(loop, -1))):
            ids[i] = self.edge_id(int(a), int(b))
            forward[i] = a < b
        return ids, forward

    def total_area(self) -> float:
        return float(sum(g.area for g in self._geometry))


def compute_cell_geometry(mesh: PolyMesh, cell_index: int) -> CellGeometry:
    """Exact shoelace area/centroid, diameter, edge lengths and normals."""
    return mesh.cell_geometry(cell_index)


# ---------------------------------------------------------------------------
# mesh quality
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeshQualityReport:
    h: float
    min_edge_ratio: float
    min_kernel_ratio: float
    num_vertices: int
    num_cells: int

    def __str__(self) -> str:
        return (
            f"cells={self.num_cells} vertices={self.num_vertices} h={self.h:.6g} "
            f"min|e|/h_K={self.min_edge_ratio:.4g} kernel/h_K>={self.min_kernel_ratio:.4g}"
        )


def _kernel_radius(geom: CellGeometry) -> float:
    """Radius of the largest disk inside the cell's kernel.

    The kernel is the intersection of the inward half-planes of all edge
    lines; the largest inscribed disk solves the linear program
    max r s.t. n_i . p + r <= n_i . v_i  (n_i outward unit normals).
    Zero for cells that are not star-shaped.
    """
    from scipy.optimize import linprog

    coords, normals = geom.coords, geom.normals
    a_ub = np.column_stack([normals, np.ones(len(coords))])
    b_ub = (normals * coords).sum(axis=1)
    res = linprog(
        c=[0.0, 0.0, -1.0],
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=[(None, None), (None, None), (0.0, None)],
        method="highs",
    )
    return float(res.x[2]) if res.success else 0.0


def compute_quality(mesh: PolyMesh) -> MeshQualityReport:
    min_edge_ratio = np.inf
    min_kernel_ratio = np.inf
    for ci in range(mesh.num_cells):
        g = mesh.cell_geometry(ci)
        min_edge_ratio = min(min_edge_ratio, g.edge_lengths.min() / g.diameter)
        min_kernel_ratio = min(min_kernel_ratio, _kernel_radius(g) / g.diameter)
    return MeshQualityReport(
        h=mesh.h,
        min_edge_ratio=float(min_edge_ratio),
        min_kernel_ratio=float(min_kernel_ratio),
        num_vertices=mesh.num_vertices,
        num_cells=mesh.num_cells,
    )


# ---------------------------------------------------------------------------
# distorted square family
# ---------------------------------------------------------------------------


def _quad_is_valid(q: np.ndarray) -> bool:
    if signed_area(q) <= 1e-14:
        return False
    if _segments_cross(q[0], q[1], q[2], q[3]):
        return False
    if _segments_cross(q[1], q[2], q[3], q[0]):
        return False
    return True


def generate_distorted_square_mesh(n: int, distortion: float = 0.3, seed: int = 0) -> PolyMesh:
    """n x n quadrilateral mesh of [0,1]^2 with randomly perturbed vertices.

    Interior vertices move by uniform offsets in [-distortion/n, distortion/n]
    per coordinate; boundary vertices slide only along their boundary edge;
    corners stay fixed.  Deterministic for a fixed seed.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0.0 <= distortion < 0.5:
        raise ValueError("distortion must lie in [0, 0.5)")
    rng = np.random.default_rng(seed)
    side = np.linspace(0.0, 1.0, n + 1)
    gx, gy = np.meshgrid(side, side, indexing="xy")
    verts = np.column_stack([gx.ravel(), gy.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    move_x = np.zeros(len(verts), dtype=bool)
    move_y = np.zeros(len(verts), dtype=bool)
    for j in range(n + 1):
        for i in range(n + 1):
            v = vid(i, j)
            interior_i = 0 < i < n
            interior_j = 0 < j < n
            move_x[v] = interior_i
            move_y[v] = interior_j

    amp = distortion / n
    cells = [
        np.array([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])
        for j in range(n)
        for i in range(n)
    ]

    offsets = rng.uniform(-amp, amp, size=(len(verts), 2)) if amp > 0 else np.zeros((len(verts), 2))
    offsets[~move_x, 0] = 0.0
    offsets[~move_y, 1] = 0.0
    pos = verts + offsets

    vertex_cells: dict[int, list[int]] = {}
    for ci, c in enumerate(cells):
        for v in c:
            vertex_cells.setdefault(int(v), []).append(ci)

    for attempt in range(101):
        bad = [ci for ci, c in enumerate(cells) if not _quad_is_valid(pos[c])]
        if not bad:
            break
        if attempt == 100:
            raise MeshError("distortion produced a tangled cell; 100 retries exhausted")
        redraw = sorted({int(v) for ci in bad for v in cells[ci]})
        for v in redraw:
            off = rng.uniform(-amp, amp, size=2)
            pos[v, 0] = verts[v, 0] + (off[0] if move_x[v] else 0.0)
            pos[v, 1] = verts[v, 1] + (off[1] if move_y[v] else 0.0)

    return PolyMesh(pos, cells)


# ---------------------------------------------------------------------------
# Voronoi family
# ---------------------------------------------------------------------------


def _voronoi_cells_in_square(seeds: np.ndarray):
    """Voronoi cells of seeds in [0,1]^2, exactly clipped via mirroring.

    Reflecting the seeds across all four sides makes every original
    region bounded, with its boundary lying exactly on the square sides.
    Returns (global vertex coordinates, list of CCW index loops).
    """
    reflect = [
        seeds * [-1.0, 1.0],
        np.column_stack([2.0 - seeds[:, 0], seeds[:, 1]]),
        seeds * [1.0, -1.0],
        np.column_stack([seeds[:, 0], 2.0 - seeds[:, 1]]),
    ]
    vor = Voronoi(np.vstack([seeds] + reflect))
    loops = []
    for i in range(len(seeds)):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or len(region) < 3:
            raise MeshError("unbounded Voronoi region; seeds outside (0,1)^2?")
        loop = np.array(region, dtype=np.int64)
        if signed_area(vor.vertices[loop]) < 0:
            loop = loop[::-1]
        loops.append(loop)
    return vor.vertices.copy(), loops


_SNAP = 1e-9


def _compact_mesh(coords: np.ndarray, loops: list[np.ndarray]) -> PolyMesh:
    """Snap to the square, merge near-duplicate vertices, drop slivers."""
    coords = coords.copy()
    for axis in (0, 1):
        coords[np.abs(coords[:, axis]) < _SNAP, axis] = 0.0
        coords[np.abs(coords[:, axis] - 1.0) < _SNAP, axis] = 1.0
    canonical: dict[tuple[int, int], int] = {}
    alias = np.arange(len(coords))
    for v in sorted({int(i) for loop in loops for i in loop}):
        key = (int(round(coords[v, 0] / _SNAP)), int(round(coords[v, 1] / _SNAP)))
        if key in canonical:
            alias[v] = canonical[key]
        else:
            canonical[key] = v
    new_loops = []
    for loop in loops:
        mapped = alias[loop]
        # drop repeats created by the merge (sliver edges shorter than snap)
        keep = [v for i, v in enumerate(mapped) if v != mapped[(i + 1) % len(mapped)]]
        if len(keep) < 3:
            raise MeshError("cell collapsed while merging sliver edges")
        new_loops.append(np.array(keep, dtype=np.int64))
    used = sorted({int(v) for loop in new_loops for v in loop})
    remap = {v: i for i, v in enumerate(used)}
    verts = coords[used]
    cells = [np.array([remap[int(v)] for v in loop], dtype=np.int64) for loop in new_loops]
    return PolyMesh(verts, cells)


def voronoi_mesh_from_seeds(seeds: np.ndarray, lloyd_iterations: int = 0) -> PolyMesh:
    """Clipped Voronoi mesh of explicit seed points in (0,1)^2."""
    seeds = np.asarray(seeds, dtype=float).copy()
    if len(seeds) < 4:
        raise ValueError("need at least 4 seeds")
    if seeds.min() <= 0.0 or seeds.max() >= 1.0:
        raise MeshError("seeds must lie strictly inside (0,1)^2")
    for sweep in range(20):
        diff = seeds[:, None, :] - seeds[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        dup_rows = np.nonzero((dist < 1e-9).any(axis=1))[0]
        if len(dup_rows) == 0:
            break
        for r in dup_rows[1::2]:  # jitter the second of each coincident pair
            seeds[r] += 1e-9 * (r + 1)
    for _ in range(lloyd_iterations):
        coords, loops = _voronoi_cells_in_square(seeds)
        seeds = np.array([area_centroid(coords[loop])[1] for loop in loops])
    coords, loops = _voronoi_cells_in_square(seeds)
    return _compact_mesh(coords, loops)


def generate_voronoi_mesh(n_seeds: int, lloyd_iterations: int = 3, seed: int = 0,
                          jitter: float = 0.35) -> PolyMesh:
    """Voronoi mesh of [0,1]^2 from jittered hexagonal-row seeds,
    optionally Lloyd-relaxed.  All cells are convex.

    Seeds start on staggered rows (row count chosen so the spacing ratio
    approximates the 2/sqrt(3) of a hexagonal lattice), each perturbed by a
    uniform offset up to ``jitter`` times the local spacing.  Lloyd steps
    then pull the diagram toward a centroidal one, which is what published
    polygonal-mesh studies use.
    """
    if n_seeds < 4:
        raise ValueError("n_seeds must be >= 4")
    rng = np.random.default_rng(seed)
    rows = max(2, round(np.sqrt(n_seeds * 2.0 / np.sqrt(3.0))))
    base, extra = divmod(n_seeds, rows)
    chunks = []
    for r in range(rows):
        cols = base + (1 if r < extra else 0)
        phase = 0.25 if r % 2 else -0.25
        xs = (np.arange(cols) + 0.5 + phase) / cols
        row = np.column_stack([xs, np.full(cols, (r + 0.5) / rows)])
        row += rng.uniform(-jitter, jitter, size=row.shape) / (cols, rows)
        chunks.append(row)
    pts = np.clip(np.vstack(chunks), 0.005, 0.995)
    return voronoi_mesh_from_seeds(pts, lloyd_iterations)


# ---------------------------------------------------------------------------
# concave family
# ---------------------------------------------------------------------------

# zigzag interface through each square, symmetric under 180-degree rotation
# about the square center; both halves are congruent and have one reflex
# vertex.  Coordinates are fractions of the square side.  The +-1/8
# deviation keeps the cells mildly concave: published error magnitudes on
# comparable meshes sit close to square-mesh values, which rules out the
# strongly re-entrant variants of this construction.
_ZIG = [(0.5, 0.0), (0.625, 1.0 / 3.0), (0.375, 2.0 / 3.0), (0.5, 1.0)]


def generate_concave_mesh(n: int) -> PolyMesh:
    """n x n squares, each split into two congruent concave polygons.

    The interface is a fixed zigzag from the bottom-edge midpoint to the
    top-edge midpoint, so refining n -> 2n halves every diameter exactly.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    # exact rational coordinates on a 24n grid avoid float-key mismatches
    res = 24 * n
    index: dict[tuple[int, int], int] = {}
    verts: list[tuple[float, float]] = []

    def vid(fx: float, fy: float) -> int:
        key = (round(fx * 24), round(fy * 24))
        if key not in index:
            index[key] = len(verts)
            verts.append((key[0] / res, key[1] / res))
        return index[key]

    cells = []
    for j in range(n):
        for i in range(n):
            p0, q1, q2, p3 = [(i + fx, j + fy) for fx, fy in _ZIG]
            a, b, c, d = (i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)
            left = [a, p0, q1, q2, p3, d]
            right = [p0, b, c, p3, q2, q1]
            cells.append(np.array([vid(*p) for p in left], dtype=np.int64))
            cells.append(np.array([vid(*p) for p in right], dtype=np.int64))
    return PolyMesh(np.array(verts, dtype=float), cells)


# ---------------------------------------------------------------------------
# local refinement with hanging nodes
# ---------------------------------------------------------------------------


def _find_corners(coords: np.ndarray) -> list[int]:
    """Loop positions whose turn angle is not flat (within 1e-7 of sin)."""
    prev = coords - np.roll(coords, 1, axis=0)
    nxt = np.roll(coords, -1, axis=0) - coords
    cross = prev[:, 0] * nxt[:, 1] - prev[:, 1] * nxt[:, 0]
    norm = np.hypot(*prev.T) * np.hypot(*nxt.T)
    return [i for i in range(len(coords)) if abs(cross[i]) > 1e-7 * norm[i]]


def refine_cells(mesh: PolyMesh, marked) -> PolyMesh:
    """Split each marked quad-derived cell into 4 children at the edge
    midpoints and corner centroid.  Unmarked neighbors keep their polygon
    but gain the midpoint as an extra (hanging) vertex in their loop.
    """
    marked = sorted({int(c) for c in marked})
    if any(c < 0 or c >= mesh.num_cells for c in marked):
        raise MeshError("marked cell index out of range")
    if not marked:
        return PolyMesh(mesh.vertices, mesh.cells)

    verts = [tuple(v) for v in mesh.vertices]
    snap: dict[tuple[int, int], int] = {}
    for i, (x, y) in enumerate(verts):
        snap[(int(round(x / _SNAP)), int(round(y / _SNAP)))] = i

    def get_vertex(x: float, y: float) -> int:
        key = (int(round(x / _SNAP)), int(round(y / _SNAP)))
        if key not in snap:
            snap[key] = len(verts)
            verts.append((x, y))
        return snap[key]

    marked_set = set(marked)
    split_edges: dict[tuple[int, int], int] = {}
    children: dict[int, list[np.ndarray]] = {}

    for ci in marked:
        loop = mesh.cells[ci]
        coords = mesh.vertices[loop]
        corners = _find_corners(coords)
        if len(corners) != 4:
            raise MeshError(
                f"cell {ci} is not quad-derived ({len(corners)} corners); cannot refine"
            )
        cxy = coords[corners].mean(axis=0)
        center = get_vertex(cxy[0], cxy[1])
        m = len(loop)
        sides = []  # per side: ordered vertex ids corner..corner incl. midpoint
        mids = []
        for s in range(4):
            p0, p1 = corners[s], corners[(s + 1) % 4]
            chain = []
            pos = (p0 + 1) % m
            while pos != p1:
                chain.append(int(loop[pos]))
                pos = (pos + 1) % m
            A, B = coords[p0], coords[p1]
            mid_xy = 0.5 * (A + B)
            mid = get_vertex(mid_xy[0], mid_xy[1])
            nodes = [int(loop[p0])] + chain + [int(loop[p1])]
            if mid not in chain:
                # order chain nodes by parameter along the side, insert mid
                seg = B - A
                denom = float(seg @ seg)
                params = [0.0]
                params += [float((np.array(verts[v]) - A) @ seg) / denom for v in chain]
                params.append(1.0)
                at = next(idx for idx in range(len(nodes) - 1) if params[idx] < 0.5 <= params[idx + 1])
                u, v = nodes[at], nodes[at + 1]
                split_edges[(min(u, v), max(u, v))] = mid
                nodes = nodes[: at + 1] + [mid] + nodes[at + 1 :]
            sides.append(nodes)
            mids.append(mid)
        kids = []
        for q in range(4):
            this = sides[q]
            prev = sides[(q + 3) % 4]
            first = this[: this.index(mids[q]) + 1]
            tail = prev[prev.index(mids[(q + 3) % 4]) : -1]
            kids.append(np.array(first + [center] + tail, dtype=np.int64))
        children[ci] = kids

    new_cells: list[np.ndarray] = []
    for ci, loop in enumerate(mesh.cells):
        if ci in marked_set:
            new_cells.extend(children[ci])
            continue
        out = []
        for a, b in zip(loop, np.roll(loop, -1)):
            out.append(int(a))
            mid = split_edges.get((int(min(a, b)), int(max(a, b))))
            if mid is not None:
                out.append(mid)
        new_cells.append(np.array(out, dtype=np.int64))

    return PolyMesh(np.array(verts, dtype=float), new_cells)


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------


def mesh_to_string(mesh: PolyMesh) -> str:
    lines = ["polymesh 1", f"vertices {mesh.num_vertices}"]
    lines.extend(f"{float(x)!r} {float(y)!r}" for x, y in mesh.vertices)
    lines.append(f"cells {mesh.num_cells}")
    for loop in mesh.cells:
        lines.append(" ".join([str(len(loop))] + [str(int(v)) for v in loop]))
    return "\n".join(lines) + "\n"


def write_mesh(path, mesh: PolyMesh) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(mesh_to_string(mesh))


def mesh_from_string(text: str) -> PolyMesh:
    lines = text.splitlines()

    def parse_error(lineno, msg):
        return MeshError(f"line {lineno + 1}: {msg}")

    if not lines or lines[0].strip() != "polymesh 1":
        raise parse_error(0, "expected header 'polymesh 1'")
    ln = 1
    head = lines[ln].split() if ln < len(lines) else []
    if len(head) != 2 or head[0] != "vertices":
        raise parse_error(ln, "expected 'vertices <count>'")
    try:
        nv = int(head[1])
    except ValueError:
        raise parse_error(ln, "bad vertex count") from None
    ln += 1
    if ln + nv > len(lines):
        raise parse_error(len(lines) - 1, "unexpected end of file in vertex block")
    verts = np.empty((nv, 2))
    for i in range(nv):
        parts = lines[ln + i].split()
        if len(parts) != 2:
            raise parse_error(ln + i, "expected 'x y'")
        try:
            verts[i] = [float(parts[0]), float(parts[1])]
        except ValueError:
            raise parse_error(ln + i, "bad coordinate") from None
    ln += nv
    head = lines[ln].split() if ln < len(lines) else []
    if len(head) != 2 or head[0] != "cells":
        raise parse_error(min(ln, len(lines) - 1), "expected 'cells <count>'")
    try:
        nc = int(head[1])
    except ValueError:
        raise parse_error(ln, "bad cell count") from None
    ln += 1
    if ln + nc > len(lines):
        raise parse_error(len(lines) - 1, "unexpected end of file in cell block")
    cells = []
    for i in range(nc):
        parts = lines[ln + i].split()
        try:
            vals = [int(p) for p in parts]
        except ValueError:
            raise parse_error(ln + i, "bad cell line") from None
        if not vals or len(vals) != vals[0] + 1:
            raise parse_error(ln + i, "cell vertex count mismatch")
        cells.append(np.array(vals[1:], dtype=np.int64))
    try:
        return PolyMesh(verts, cells)
    except MeshError as exc:
        raise MeshError(f"invalid mesh in file: {exc}") from exc


def read_mesh(path) -> PolyMesh:
    with open(path, "r", encoding="ascii") as fh:
        return mesh_from_string(fh.read())
