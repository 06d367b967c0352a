"""Triangulation of chart domains bounded by a closed curve.

Boundary vertices are placed on the curve at chord spacing at most ``h``.
Interior vertices start on a hexagonal lattice, the set is Delaunay
triangulated, boundary segments that are missing or encroached are split at
the curve midpoint until the boundary is conforming, and a few rounds of
spring relaxation even out edge lengths. A layer of near-equilateral
triangles erected on the boundary chords keeps the boundary layer regular.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from matplotlib.path import Path as MplPath
from scipy.spatial import Delaunay, cKDTree

from .boundary import BoundaryCurve
from .errors import DegenerateCurveError, ParameterError, ResolutionError

log = logging.getLogger(__name__)

MIN_BOUNDARY_VERTICES = 8
ANISOTROPY_WARNING = 1e3


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangle mesh.

    Attributes
    ----------
    vertices : ndarray, shape (n, 2)
    triangles : ndarray, shape (m, 3)
        Counter-clockwise vertex triples.
    boundary : ndarray
        Boundary vertex indices in counter-clockwise order.
    boundary_params : ndarray
        Curve parameter of each boundary vertex.
    h : float
        Target edge length.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    boundary_params: np.ndarray
    h: float

    @property
    def interior(self) -> np.ndarray:
        mask = np.ones(len(self.vertices), dtype=bool)
        mask[self.boundary] = False
        return np.flatnonzero(mask)

    def angles(self) -> np.ndarray:
        """Interior angles in degrees, shape (m, 3)."""
        p = self.vertices[self.triangles]
        out = np.empty(self.triangles.shape)
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cos = np.sum(a * b, 1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            out[:, k] = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
        return out

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edges(self) -> np.ndarray:
        e = np.vstack([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]],
                       self.triangles[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)


def _chord_positions(curve: BoundaryCurve, spacing: float):
    """Curve parameters at (approximately) equal chord spacing."""
    dense = curve.resample(max(len(curve), 4096)) if curve.evaluator is not None else curve
    closed = np.vstack([dense.p, dense.p[:1]])
    seg = np.hypot(*np.diff(closed, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    n = int(np.ceil(s[-1] / spacing))
    if n < MIN_BOUNDARY_VERTICES:
        raise ParameterError(
            f"h={spacing:g} is too large: only {n} boundary vertices (need {MIN_BOUNDARY_VERTICES})"
        )
    tt = np.append(dense.t, dense.t[0] + dense.period)
    return np.interp(s[-1] * np.arange(n) / n, s, tt)


def _hex_lattice(lo, hi, h):
    dy = h * np.sqrt(3.0) / 2.0
    ys = np.arange(lo[1], hi[1] + dy, dy)
    pts = []
    for j, y in enumerate(ys):
        xs = np.arange(lo[0] + (h / 2.0 if j % 2 else 0.0), hi[0] + h, h)
        pts.append(np.column_stack([xs, np.full_like(xs, y)]))
    return np.vstack(pts) if pts else np.empty((0, 2))


def _boundary_tree(bpts):
    nxt = np.roll(bpts, -1, axis=0)
    frac = np.linspace(0.0, 1.0, 8, endpoint=False)
    dense = (bpts[:, None, :] + frac[None, :, None] * (nxt - bpts)[:, None, :]).reshape(-1, 2)
    return cKDTree(dense)


def _offset_layer(bpts, polygon, tree):
    """Apexes of near-equilateral triangles erected inward on each boundary chord."""
    nxt = np.roll(bpts, -1, axis=0)
    chord = nxt - bpts
    length = np.hypot(chord[:, 0], chord[:, 1])
    inward = np.stack([-chord[:, 1], chord[:, 0]], -1) / length[:, None]
    apex = 0.5 * (bpts + nxt) + (np.sqrt(3.0) / 2.0) * length[:, None] * inward
    ok = polygon.contains_points(apex)
    ok[ok] = tree.query(apex[ok])[0] > 0.6 * length[ok]
    apex = apex[ok]
    # thin out apexes that crowd each other (concave stretches)
    keep = []
    for i, q in enumerate(apex):
        if not keep or np.hypot(*(q - apex[keep[-1]])) > 0.5 * length.mean():
            keep.append(i)
    if len(keep) > 1 and np.hypot(*(apex[keep[0]] - apex[keep[-1]])) <= 0.5 * length.mean():
        keep.pop()
    return apex[keep]


def _triangulate_points(points, polygon: MplPath):
    tri = Delaunay(points)
    simp = tri.simplices
    cent = points[simp].mean(axis=1)
    keep = polygon.contains_points(cent)
    simp = simp[keep]
    p = points[simp]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    simp = np.where((area < 0)[:, None], simp[:, [0, 2, 1]], simp)
    return simp[np.abs(area) > 0]


def _missing_or_encroached(simp, nb, points):
    """Indices ``k`` of boundary segments (k, k+1) to split."""
    edges = np.vstack([simp[:, [0, 1]], simp[:, [1, 2]], simp[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    have = set(map(tuple, edges.tolist()))
    seg = np.sort(np.column_stack([np.arange(nb), (np.arange(nb) + 1) % nb]), axis=1)
    bad = [k for k, e in enumerate(seg.tolist()) if tuple(e) not in have]
    # diametral-circle encroachment by any other vertex
    a = points[:nb]
    b = np.roll(a, -1, axis=0)
    mid = 0.5 * (a + b)
    rad = 0.5 * np.hypot(*(b - a).T)
    near = cKDTree(points).query_ball_point(mid, rad * (1 - 1e-9))
    for k, hits in enumerate(near):
        if any(j != k and j != (k + 1) % nb for j in hits):
            bad.append(k)
    return sorted(set(bad))


def triangulate(curve: BoundaryCurve, h: float, smoothing: int = 12, max_splits: int = 40) -> Mesh:
    """Mesh the region enclosed by ``curve`` with target edge length ``h``.

    Parameters
    ----------
    curve : BoundaryCurve
        Simple closed ccw chart curve.
    h : float
        Target edge length; boundary chords never exceed it.
    smoothing : int
        Rounds of spring relaxation of interior vertices, each followed by a
        fresh Delaunay triangulation.
    max_splits : int
        Cap on boundary refinement rounds.

    Returns
    -------
    Mesh
    """
    if not h > 0:
        raise ParameterError("mesh size h must be positive")
    if not curve.closed:
        raise DegenerateCurveError("can only mesh closed curves")
    tb = _chord_positions(curve, h)
    for _ in range(max_splits):
        bpts = curve.evaluate(tb)[0]
        polygon = MplPath(np.vstack([bpts, bpts[:1]]), closed=True)
        lo, hi = bpts.min(axis=0), bpts.max(axis=0)
        tree = _boundary_tree(bpts)
        layer = _offset_layer(bpts, polygon, tree)
        lat = _hex_lattice(lo, hi, h)
        lat = lat[polygon.contains_points(lat)]
        if len(lat):
            dist, _ = tree.query(lat)
            lat = lat[dist > 1.4 * h]
        if len(layer) and len(lat):
            dist, _ = cKDTree(layer).query(lat)
            lat = lat[dist > 0.7 * h]
        points = np.vstack([bpts, layer, lat])
        simp = _triangulate_points(points, polygon)
        split = _missing_or_encroached(simp, len(bpts), points)
        if not split:
            break
        t_next = np.append(tb[1:], tb[0] + curve.period)
        tb = np.sort(np.concatenate([tb, 0.5 * (tb[split] + t_next[split])]))
    else:
        raise ResolutionError("boundary recovery did not converge; try a smaller h")

    nb = len(bpts)
    for _ in range(smoothing):
        moved = _relax(points, simp, nb, h, polygon, tree)
        new_simp = _triangulate_points(moved, polygon)
        if _missing_or_encroached(new_simp, nb, moved):
            break
        points, simp = moved, new_simp

    span = hi - lo
    aspect = float(span.max() / max(span.min(), 1e-300))
    if aspect > ANISOTROPY_WARNING:
        log.warning("domain aspect ratio %.3g exceeds %.0e; mesh is strongly anisotropic",
                    aspect, ANISOTROPY_WARNING)
    used = np.zeros(len(points), dtype=bool)
    used[simp.ravel()] = True
    if not np.all(used[:nb]):
        raise ResolutionError("boundary vertex dropped from the triangulation")
    remap = np.cumsum(used) - 1
    points, simp = points[used], remap[simp]
    return Mesh(points, simp.astype(np.int64), np.arange(nb), np.mod(tb - curve.t[0], curve.period)
                + curve.t[0], float(h))


def _relax(points, simp, nb, h, polygon, tree, steps=4, dt=0.2):
    """Spring relaxation of interior vertices towards edge length ``h``.

    Edges shorter than the (area-normalized) rest length push their ends
    apart; boundary vertices stay fixed, and a vertex is not moved if the
    move would bring it closer than ``h / 3`` to the boundary.
    """
    e = np.vstack([simp[:, [0, 1]], simp[:, [1, 2]], simp[:, [2, 0]]])
    e = np.unique(np.sort(e, axis=1), axis=0)
    p = points.copy()
    for _ in range(steps):
        vec = p[e[:, 1]] - p[e[:, 0]]
        length = np.hypot(vec[:, 0], vec[:, 1])
        rest = 1.2 * np.sqrt(np.sum(length**2) / len(length))
        force = np.maximum(rest - length, 0.0) / length
        fv = force[:, None] * vec
        total = np.zeros_like(p)
        np.add.at(total, e[:, 0], -fv)
        np.add.at(total, e[:, 1], fv)
        total[:nb] = 0.0
        trial = p + dt * total
        ok = polygon.contains_points(trial[nb:])
        ok[ok] = tree.query(trial[nb:][ok])[0] > h / 3.0
        p[nb:][ok] = trial[nb:][ok]
    return p


def _min_angle(points, simp) -> float:
    p = points[simp]
    best = 180.0
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        cos = np.sum(a * b, 1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        best = min(best, float(np.degrees(np.arccos(np.clip(cos, -1, 1))).min()))
    return best


def boundary_loop(triangles: np.ndarray) -> np.ndarray:
    """Ordered boundary vertex loop of a simply connected triangulation.

    Boundary edges are those used by a single triangle; their orientation
    inside ccw triangles makes the loop counter-clockwise.
    """
    e = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    key = np.sort(e, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    bedges = e[counts[inv.ravel()] == 1]
    if len(bedges) < 3:
        raise DegenerateCurveError("triangulation has no boundary")
    nxt = dict(zip(bedges[:, 0].tolist(), bedges[:, 1].tolist()))
    if len(nxt) != len(bedges):
        raise DegenerateCurveError("boundary is not a single simple loop")
    start = int(bedges[0, 0])
    loop = [start]
    while True:
        v = nxt[loop[-1]]
        if v == start:
            break
        loop.append(v)
        if len(loop) > len(bedges):
            raise DegenerateCurveError("boundary is not a single simple loop")
    if len(loop) != len(bedges):
        raise DegenerateCurveError("boundary has more than one component")
    return np.asarray(loop, dtype=np.int64)


def write_mesh(mesh: Mesh, directory, values=None) -> None:
    """Write ``vertices.csv`` (``x,y``), ``triangles.csv`` (``i,j,k``) and,
    with ``values``, ``field.csv`` (``x,y,u``)."""
    from pathlib import Path

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    np.savetxt(d / "vertices.csv", mesh.vertices, fmt="%.17g", delimiter=",", header="x,y",
               comments="")
    np.savetxt(d / "triangles.csv", mesh.triangles, fmt="%d", delimiter=",", header="i,j,k",
               comments="")
    if values is not None:
        np.savetxt(d / "field.csv", np.column_stack([mesh.vertices, values]), fmt="%.17g",
                   delimiter=",", header="x,y,u", comments="")


def read_mesh(directory):
    """Read a mesh (and field if present) written by :func:`write_mesh`.

    Returns
    -------
    mesh : Mesh
        ``h`` is taken as the longest boundary edge.
    values : ndarray or None
    """
    from pathlib import Path

    d = Path(directory)
    try:
        tri = np.loadtxt(d / "triangles.csv", delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
        field_file = d / "field.csv"
        if field_file.exists():
            data = np.loadtxt(field_file, delimiter=",", skiprows=1, ndmin=2)
            verts, values = data[:, :2], data[:, 2]
        else:
            verts = np.loadtxt(d / "vertices.csv", delimiter=",", skiprows=1, ndmin=2)
            values = None
    except (OSError, ValueError) as exc:
        raise ParameterError(f"cannot read mesh from {d}: {exc}") from exc
    if tri.min() < 0 or tri.max() >= len(verts):
        raise ParameterError("triangle indices out of range")
    loop = boundary_loop(tri)
    bp = verts[loop]
    h = float(np.max(np.hypot(*(np.roll(bp, -1, axis=0) - bp).T)))
    return Mesh(verts, tri, loop, np.arange(len(loop), dtype=float), h), values
