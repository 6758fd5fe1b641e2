"""Triangulations: structured uniform grids and interface-adapted meshes.

Adapted meshes are built per region of the partition.  Region boundaries
are subdivided first (interface points are computed once and shared by both
neighbouring regions, so the interfaces are exactly tiled), then each convex
region is filled with a hexagonal seed lattice and refined Chew-style:
circumcenters of triangles with too large circumradius or too small angles
are inserted until every triangle has circumradius below the target.  The
circumradius bound makes the diameter contract hold by construction; the
angle bound is verified and the build retried at a finer target if needed.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .jump_field import Partition

__all__ = [
    "Mesh",
    "MeshQualityError",
    "triangulate_adapted",
    "triangulate_uniform",
    "check_conformity",
    "shape_regularity",
    "min_angle",
    "mesh_to_text",
    "mesh_from_text",
]

SQRT2 = math.sqrt(2.0)
MIN_ANGLE_DEG = 20.0


class MeshQualityError(RuntimeError):
    """Raised when the angle bound cannot be met within the refinement budget."""


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation of the unit square.

    ``region_of_triangle`` is present for adapted meshes (every triangle lies
    in exactly one partition region) and ``None`` for structured grids.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertex_flags: np.ndarray
    region_of_triangle: np.ndarray | None
    h: float
    theta: float
    min_angle_deg: float

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def areas(self) -> np.ndarray:
        p0, p1, p2 = (self.vertices[self.triangles[:, k]] for k in range(3))
        return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                      - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs."""
        t = self.triangles
        e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def interior_vertices(self) -> np.ndarray:
        return np.nonzero(~self.boundary_vertex_flags)[0]


def _finalize(vertices: np.ndarray, triangles: np.ndarray,
              region_of_triangle: np.ndarray | None) -> Mesh:
    p0, p1, p2 = (vertices[triangles[:, k]] for k in range(3))
    # enforce counter-clockwise orientation
    det = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
    flip = det < 0.0
    if np.any(flip):
        triangles = triangles.copy()
        triangles[flip, 1], triangles[flip, 2] = triangles[flip, 2], triangles[flip, 1].copy()
    x, y = vertices[:, 0], vertices[:, 1]
    flags = (x == 0.0) | (x == 1.0) | (y == 0.0) | (y == 1.0)
    h = float(np.sqrt(_sq_diameters(vertices, triangles).max()))
    theta = shape_regularity_arrays(vertices, triangles)
    ang = float(np.degrees(_tri_angles(vertices, triangles).min()))
    return Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_vertex_flags=flags,
        region_of_triangle=region_of_triangle,
        h=h,
        theta=theta,
        min_angle_deg=ang,
    )


def _sq_diameters(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    d01 = ((p[:, 0] - p[:, 1]) ** 2).sum(axis=1)
    d12 = ((p[:, 1] - p[:, 2]) ** 2).sum(axis=1)
    d20 = ((p[:, 2] - p[:, 0]) ** 2).sum(axis=1)
    return np.maximum(np.maximum(d01, d12), d20)


def _edge_lengths(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    return np.stack(
        [
            np.linalg.norm(p[:, 1] - p[:, 2], axis=1),
            np.linalg.norm(p[:, 2] - p[:, 0], axis=1),
            np.linalg.norm(p[:, 0] - p[:, 1], axis=1),
        ],
        axis=1,
    )


def _tri_angles(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """All interior angles in radians, shape (nt, 3)."""
    ell = _edge_lengths(vertices, triangles)
    a, b, c = ell[:, 0], ell[:, 1], ell[:, 2]
    angles = np.empty_like(ell)
    with np.errstate(invalid="ignore"):
        angles[:, 0] = np.arccos(np.clip((b**2 + c**2 - a**2) / (2 * b * c), -1.0, 1.0))
        angles[:, 1] = np.arccos(np.clip((a**2 + c**2 - b**2) / (2 * a * c), -1.0, 1.0))
    angles[:, 2] = np.pi - angles[:, 0] - angles[:, 1]
    return angles


def min_angle(mesh: Mesh) -> float:
    """Smallest interior angle of the mesh, in degrees."""
    return mesh.min_angle_deg


def shape_regularity_arrays(vertices: np.ndarray, triangles: np.ndarray) -> float:
    ell = _edge_lengths(vertices, triangles)
    perim = ell.sum(axis=1)
    p0, p1, p2 = (vertices[triangles[:, k]] for k in range(3))
    areas = 0.5 * np.abs((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                         - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))
    if np.any(areas <= 0.0) or np.any(areas < 1e-16 * ell.max() ** 2):
        raise ValueError("degenerate (zero-area) triangle")
    incircle_diam = 4.0 * areas / perim
    diam = ell.max(axis=1)
    return float((diam / incircle_diam).max())


def shape_regularity(mesh: Mesh) -> float:
    """Max over triangles of diameter / inscribed-circle diameter."""
    return shape_regularity_arrays(mesh.vertices, mesh.triangles)


def triangulate_uniform(h_max: float) -> Mesh:
    """Structured m x m grid of squares, each split by its LL-UR diagonal.

    ``m = ceil(sqrt(2) / h_max)`` so every triangle has diameter
    ``sqrt(2)/m <= h_max``.
    """
    if not (h_max > 0.0):
        raise ValueError("h_max must be positive")
    m = max(1, math.ceil(SQRT2 / h_max - 1e-12))
    ax = np.linspace(0.0, 1.0, m + 1)
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return i * (m + 1) + j

    ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    v00 = vid(ii, jj).ravel()
    v10 = vid(ii + 1, jj).ravel()
    v01 = vid(ii, jj + 1).ravel()
    v11 = vid(ii + 1, jj + 1).ravel()
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.vstack([lower, upper]).astype(np.intp)
    return _finalize(vertices, triangles, None)


# ---------------------------------------------------------------------------
# adapted meshing


_HEX_CACHE: dict[float, np.ndarray] = {}


def _hex_lattice(d: float) -> np.ndarray:
    """Hexagonal point lattice with spacing ``d`` covering the unit square."""
    pts = _HEX_CACHE.get(d)
    if pts is None:
        dy = d * math.sqrt(3.0) / 2.0
        rows = []
        k = 0
        y = 0.0
        while y <= 1.0 + dy:
            off = 0.5 * d if k % 2 else 0.0
            xs = np.arange(off, 1.0 + d, d)
            rows.append(np.column_stack([xs, np.full(xs.shape, y)]))
            k += 1
            y = k * dy
        pts = np.vstack(rows)
        _HEX_CACHE[d] = pts
    return pts


_PARAM_CACHE: dict[int, np.ndarray] = {}


def _params(n: int) -> np.ndarray:
    t = _PARAM_CACHE.get(n)
    if t is None:
        t = np.linspace(0.0, 1.0, n + 1)
        _PARAM_CACHE[n] = t
    return t


def _subdivide(p: np.ndarray, q: np.ndarray, spacing: float) -> np.ndarray:
    """Points on segment p->q, endpoints included, spacing close to ``spacing``."""
    length = math.hypot(q[0] - p[0], q[1] - p[1])
    n = max(1, round(length / spacing))
    t = _params(n)[:, None]
    return p[None, :] * (1.0 - t) + q[None, :] * t


def _bow_outward(edge_pts: np.ndarray, delta: float) -> np.ndarray:
    """Displace interior points of a collinear chain along the outward normal.

    Qhull merges facets of exactly collinear hull chains and can emit
    degenerate simplices; a strictly convex outward bow (parabolic sag
    ``delta``) makes every chain point a proper hull vertex with consecutive
    hull edges.  The bowed points only feed the Delaunay combinatorics; the
    exact collinear coordinates go into the mesh afterwards.
    """
    n = edge_pts.shape[0] - 1
    if n < 2:
        return edge_pts
    p, q = edge_pts[0], edge_pts[-1]
    e = q - p
    length = math.hypot(e[0], e[1])
    normal = np.array([e[1], -e[0]]) / length  # right of p->q = outward for CCW loops
    t = _params(n)
    sag = delta * 4.0 * t * (1.0 - t)
    return edge_pts + sag[:, None] * normal[None, :]


def _poly_interior_mask(poly: np.ndarray, pts: np.ndarray, margin: float) -> np.ndarray:
    """Points at signed distance >= margin from every edge of a convex CCW polygon."""
    mask = np.ones(pts.shape[0], dtype=bool)
    nv = poly.shape[0]
    for k in range(nv):
        a = poly[k]
        b = poly[(k + 1) % nv]
        e = b - a
        ln = np.linalg.norm(e)
        signed = (e[0] * (pts[:, 1] - a[1]) - e[1] * (pts[:, 0] - a[0])) / ln
        mask &= signed >= margin
    return mask


def _circumdata(pts: np.ndarray, tris: np.ndarray):
    a = pts[tris[:, 0]]
    b = pts[tris[:, 1]]
    c = pts[tris[:, 2]]
    d = 2.0 * (a[:, 0] * (b[:, 1] - c[:, 1]) + b[:, 0] * (c[:, 1] - a[:, 1]) + c[:, 0] * (a[:, 1] - b[:, 1]))
    asq = (a**2).sum(axis=1)
    bsq = (b**2).sum(axis=1)
    csq = (c**2).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ux = (asq * (b[:, 1] - c[:, 1]) + bsq * (c[:, 1] - a[:, 1]) + csq * (a[:, 1] - b[:, 1])) / d
        uy = (asq * (c[:, 0] - b[:, 0]) + bsq * (a[:, 0] - c[:, 0]) + csq * (b[:, 0] - a[:, 0])) / d
    cc = np.column_stack([ux, uy])
    rad = np.linalg.norm(cc - a, axis=1)
    return cc, rad


def _refine_polygon(poly: np.ndarray, boundary_pts: np.ndarray, d: float,
                    max_rounds: int = 40) -> np.ndarray:
    """Chew-style refinement of one convex region.

    ``boundary_pts`` is the closed subdivided boundary loop (its points are
    never moved, so interface points stay shared with the neighbour region).
    Returns the triangle array (indices into the returned point set stacked
    as boundary points first).
    """
    seeds = _hex_lattice(d)
    keep = _poly_interior_mask(poly, seeds, margin=0.72 * d)
    pts = np.vstack([boundary_pts, seeds[keep]])
    two_sin_floor = 2.0 * math.sin(math.radians(MIN_ANGLE_DEG + 0.5))
    for _ in range(max_rounds):
        dela = Delaunay(pts)
        tris = dela.simplices
        cc, rad = _circumdata(pts, tris)
        # smallest angle satisfies sin(alpha) = e_min / (2 R)
        p = pts[tris]
        e2 = np.stack([
            ((p[:, 1] - p[:, 2]) ** 2).sum(axis=1),
            ((p[:, 2] - p[:, 0]) ** 2).sum(axis=1),
            ((p[:, 0] - p[:, 1]) ** 2).sum(axis=1),
        ], axis=1)
        e_min = np.sqrt(e2.min(axis=1))
        bad = (rad > 1.0000001 * d) | (e_min < two_sin_floor * rad)
        if not np.any(bad):
            return pts, tris
        order = np.argsort(rad[bad])[::-1]
        cand = cc[bad][order]
        cand = cand[np.all(np.isfinite(cand), axis=1)]
        cand = cand[_poly_interior_mask(poly, cand, margin=0.55 * d)]
        if cand.shape[0] == 0:
            # circumcenters fell outside the protected zone; fall back to
            # longest-edge midpoints of the offending triangles
            pb = pts[tris[bad]]
            mids = np.stack([
                0.5 * (pb[:, 1] + pb[:, 2]),
                0.5 * (pb[:, 2] + pb[:, 0]),
                0.5 * (pb[:, 0] + pb[:, 1]),
            ], axis=1)
            eb = np.stack([
                ((pb[:, 1] - pb[:, 2]) ** 2).sum(axis=1),
                ((pb[:, 2] - pb[:, 0]) ** 2).sum(axis=1),
                ((pb[:, 0] - pb[:, 1]) ** 2).sum(axis=1),
            ], axis=1)
            cand = mids[np.arange(mids.shape[0]), eb.argmax(axis=1)]
            cand = cand[_poly_interior_mask(poly, cand, margin=0.4 * d)]
            if cand.shape[0] == 0:
                break
        tree = cKDTree(pts)
        dist, _ = tree.query(cand, k=1)
        cand = cand[dist >= 0.65 * d]
        accepted = []
        for c in cand:
            if all((c[0] - a[0]) ** 2 + (c[1] - a[1]) ** 2 >= (0.8 * d) ** 2 for a in accepted):
                accepted.append(c)
        if not accepted:
            break
        pts = np.vstack([pts, np.array(accepted)])
    return pts, Delaunay(pts).simplices


def triangulate_adapted(partition: Partition, h_max: float) -> Mesh:
    """Interface-conforming triangulation with diameter at most ``h_max``.

    Every interface segment of the partition is a union of triangle edges
    and every triangle lies in exactly one region.  Raises
    :class:`MeshQualityError` if the 20-degree angle bound cannot be met
    within the retry budget.
    """
    if not (h_max > 0.0):
        raise ValueError("h_max must be positive")
    d = min(0.5 * h_max, 0.125)
    last = None
    for _ in range(4):
        mesh = _build_adapted(partition, d)
        ang = min_angle(mesh)
        if mesh.h <= h_max * (1.0 + 1e-9) and ang >= MIN_ANGLE_DEG - 1e-9:
            return mesh
        last = (mesh.h, ang)
        d *= 0.75
    raise MeshQualityError(
        f"could not reach diameter {h_max} with min angle {MIN_ANGLE_DEG} deg "
        f"(best h={last[0]:.4g}, angle={last[1]:.2f})"
    )


def _build_adapted(partition: Partition, d: float) -> Mesh:
    # subdivide every skeleton edge once; interface (chord) points are shared
    # by both adjacent regions by construction
    spacing = 0.95 * d
    seg_points: dict[tuple, np.ndarray] = {}

    def edge_pts(p: np.ndarray, q: np.ndarray) -> np.ndarray:
        key = (p.tobytes(), q.tobytes())
        rkey = (q.tobytes(), p.tobytes())
        if key in seg_points:
            return seg_points[key]
        if rkey in seg_points:
            return seg_points[rkey][::-1]
        pts = _subdivide(p, q, spacing)
        seg_points[key] = pts
        return pts

    point_blocks: list[np.ndarray] = []
    tri_list: list[np.ndarray] = []
    region_ids: list[np.ndarray] = []
    offset = 0
    for ridx, poly in enumerate(partition.regions):
        loops = []
        bowed_loops = []
        nv = poly.shape[0]
        for k in range(nv):
            pts = edge_pts(poly[k], poly[(k + 1) % nv])
            loops.append(pts[:-1])
            bowed_loops.append(_bow_outward(pts, 1e-6 * d)[:-1])
        boundary = np.vstack(loops)
        bowed = np.vstack(bowed_loops)
        pts, tris = _refine_polygon(poly, bowed, d)
        pts = pts.copy()
        pts[: boundary.shape[0]] = boundary
        point_blocks.append(pts)
        tri_list.append(tris + offset)
        region_ids.append(np.full(tris.shape[0], ridx, dtype=np.intp))
        offset += pts.shape[0]

    all_pts = np.vstack(point_blocks)
    # merge shared interface/corner vertices: exact duplicates by construction
    vertices_arr, inverse = np.unique(all_pts, axis=0, return_inverse=True)
    triangles = inverse[np.vstack(tri_list)].astype(np.intp)
    regions = np.concatenate(region_ids)
    return _finalize(vertices_arr, triangles, regions)


# ---------------------------------------------------------------------------
# conformity checking


def check_conformity(mesh: Mesh, partition: Partition, tol: float = 1e-9) -> bool:
    """True iff every interface segment is exactly tiled by mesh edges and no
    triangle straddles an interface."""
    edge_set = {(int(i), int(j)) for i, j in mesh.edges()}
    verts = mesh.vertices
    for seg in partition.interface_segments:
        a, b = seg[0], seg[1]
        ab = b - a
        ln2 = float(ab @ ab)
        t = ((verts - a) @ ab) / ln2
        perp = np.abs((verts[:, 0] - a[0]) * ab[1] - (verts[:, 1] - a[1]) * ab[0]) / math.sqrt(ln2)
        on = (perp <= tol) & (t >= -tol) & (t <= 1.0 + tol)
        idx = np.nonzero(on)[0]
        if idx.size < 2:
            return False
        ts = t[idx]
        order = np.argsort(ts)
        idx = idx[order]
        ts = ts[order]
        if abs(ts[0]) > tol or abs(ts[-1] - 1.0) > tol:
            return False
        for k in range(len(idx) - 1):
            i, j = int(idx[k]), int(idx[k + 1])
            if (min(i, j), max(i, j)) not in edge_set:
                return False
        if not _no_straddle(mesh, a, b, tol):
            return False
    return True


def _no_straddle(mesh: Mesh, a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    """No triangle interior is crossed by the open segment (a, b)."""
    p = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
    ab = b - a
    lo = np.zeros(p.shape[0])
    hi = np.ones(p.shape[0])
    # clip the segment against the three CCW half-planes of each triangle
    for k in range(3):
        pk = p[:, k]
        pk1 = p[:, (k + 1) % 3]
        e = pk1 - pk
        # signed distance of segment endpoints to edge line (positive inside)
        fa = e[:, 0] * (a[1] - pk[:, 1]) - e[:, 1] * (a[0] - pk[:, 0])
        fb = e[:, 0] * (b[1] - pk[:, 1]) - e[:, 1] * (b[0] - pk[:, 0])
        df = fb - fa
        with np.errstate(divide="ignore", invalid="ignore"):
            tcross = -fa / df
        entering = df > 0.0
        leaving = df < 0.0
        lo = np.where(entering, np.maximum(lo, np.where(np.isfinite(tcross), tcross, lo)), lo)
        hi = np.where(leaving, np.minimum(hi, np.where(np.isfinite(tcross), tcross, hi)), hi)
        outside = (df == 0.0) & (fa < 0.0)
        hi = np.where(outside, -1.0, hi)
    seg_len = float(np.linalg.norm(ab))
    has_clip = (hi - lo) * seg_len > 10.0 * tol
    if not np.any(has_clip):
        return True
    # a clipped piece riding a triangle edge is fine; interior crossing is not
    mid_t = 0.5 * (lo + hi)
    mid = a[None, :] + mid_t[:, None] * ab[None, :]
    cand = np.nonzero(has_clip)[0]
    for t in cand:
        tri = p[t]
        bary_min = np.inf
        for k in range(3):
            e = tri[(k + 1) % 3] - tri[k]
            s = e[0] * (mid[t, 1] - tri[k][1]) - e[1] * (mid[t, 0] - tri[k][0])
            bary_min = min(bary_min, s / np.linalg.norm(e))
        if bary_min > 10.0 * tol:
            return False
    return True


# ---------------------------------------------------------------------------
# plain-text serialization (vertex table + triangle table)


def mesh_to_text(mesh: Mesh) -> str:
    buf = io.StringIO()
    buf.write(f"vertices {mesh.n_vertices}\n")
    for (x, y), bnd in zip(mesh.vertices, mesh.boundary_vertex_flags):
        buf.write(f"{float(x)!r} {float(y)!r} {int(bnd)}\n")
    buf.write(f"triangles {mesh.n_triangles}\n")
    has_regions = mesh.region_of_triangle is not None
    for k in range(mesh.n_triangles):
        i, j, l = mesh.triangles[k]
        if has_regions:
            buf.write(f"{i} {j} {l} {mesh.region_of_triangle[k]}\n")
        else:
            buf.write(f"{i} {j} {l}\n")
    return buf.getvalue()


def mesh_from_text(text: str) -> Mesh:
    lines = text.splitlines()
    pos = 0
    assert lines[pos].startswith("vertices")
    nv = int(lines[pos].split()[1])
    pos += 1
    verts = np.empty((nv, 2))
    for k in range(nv):
        parts = lines[pos + k].split()
        verts[k] = (float(parts[0]), float(parts[1]))
    pos += nv
    assert lines[pos].startswith("triangles")
    nt = int(lines[pos].split()[1])
    pos += 1
    tris = np.empty((nt, 3), dtype=np.intp)
    regions = None
    for k in range(nt):
        parts = lines[pos + k].split()
        tris[k] = [int(parts[0]), int(parts[1]), int(parts[2])]
        if len(parts) > 3:
            if regions is None:
                regions = np.empty(nt, dtype=np.intp)
            regions[k] = int(parts[3])
    return _finalize(verts, tris, regions)
