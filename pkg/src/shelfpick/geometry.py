"""Planar geometry for shelf picking.

Everything lives in the vertical shelf plane. A point is a length-2 float
array ``(y, z)``: y runs across the shelf opening, z runs up. Contours are
simple polygons stored as (M, 2) vertex arrays in counterclockwise order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, QhullError, cKDTree

CLOUD_LABELS = ("target", "adjacent", "shelf")


class EmptyCloud(ValueError):
    """Operation requires at least one point."""


class DegenerateInput(ValueError):
    """Point set has no 2D extent (fewer than 3 points, or all collinear)."""


class NoBoundary(ValueError):
    """Alpha too small: no triangle survives the filter.

    ``min_alpha`` is the smallest alpha that would keep at least one triangle.
    """

    def __init__(self, min_alpha: float):
        super().__init__(f"no triangle has circumradius <= alpha; smallest workable alpha is {min_alpha:.6g}")
        self.min_alpha = float(min_alpha)


class NoIntersection(ValueError):
    """Chord does not cross the contour."""


class TangentChord(ValueError):
    """Chord grazes the contour: contact separation below the minimum."""


def cross2(a, b):
    """Scalar cross product of (y, z) vectors; broadcasts over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass
class Aabb2:
    """Axis-aligned box in the shelf plane, corners ``lo`` <= ``hi``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float).reshape(2)
        self.hi = np.asarray(self.hi, dtype=float).reshape(2)
        if not np.all(self.lo <= self.hi):
            raise ValueError(f"Aabb2 lo {self.lo} exceeds hi {self.hi}")

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def half_extent(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    @property
    def width(self) -> float:
        return float(self.hi[0] - self.lo[0])

    @property
    def height(self) -> float:
        return float(self.hi[1] - self.lo[1])

    def contains(self, p, tol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))

    def overlaps(self, other: "Aabb2", tol: float = 0.0) -> bool:
        """True when the boxes overlap with penetration greater than tol."""
        return bool(
            np.all(self.lo + tol < other.hi) and np.all(other.lo + tol < self.hi)
        )


@dataclass
class PointCloud2:
    """Labeled planar point cloud; label partitions the scene observation."""

    points: np.ndarray
    label: str

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"points must be (N, 2), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if self.label not in CLOUD_LABELS:
            raise ValueError(f"label must be one of {CLOUD_LABELS}, got {self.label!r}")
        self.points = pts

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass
class Contour:
    """Simple polygon, counterclockwise vertex order."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError(f"contour needs at least 3 (y, z) vertices, got shape {v.shape}")
        self.vertices = v

    @property
    def area(self) -> float:
        """Signed shoelace area (positive for counterclockwise order)."""
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        return float(0.5 * np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))

    @property
    def aabb(self) -> Aabb2:
        return Aabb2(self.vertices.min(axis=0), self.vertices.max(axis=0))

    def contains_point(self, p) -> bool:
        """Even-odd crossing test; boundary points count as inside."""
        p = np.asarray(p, dtype=float)
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        dy = w - v
        # boundary check: distance to the nearest edge
        if self.distance_to_point(p) <= 1e-12:
            return True
        cond = (v[:, 1] > p[1]) != (w[:, 1] > p[1])
        with np.errstate(divide="ignore", invalid="ignore"):
            x_int = v[:, 0] + (p[1] - v[:, 1]) * dy[:, 0] / dy[:, 1]
        hits = cond & (x_int > p[0])
        return bool(np.count_nonzero(hits) % 2 == 1)

    def distance_to_point(self, p) -> float:
        """Distance from p to the polygon boundary."""
        p = np.asarray(p, dtype=float)
        a = self.vertices
        b = np.roll(a, -1, axis=0)
        ab = b - a
        ap = p[None, :] - a
        denom = np.einsum("ij,ij->i", ab, ab)
        t = np.clip(np.divide(np.einsum("ij,ij->i", ap, ab), denom,
                              out=np.zeros_like(denom), where=denom > 0), 0.0, 1.0)
        proj = a + t[:, None] * ab
        return float(np.min(np.linalg.norm(proj - p[None, :], axis=1)))


@dataclass
class ContactPair:
    """Antipodal planar contact pair on an item contour.

    ``c_l``/``c_r`` are the left and right contact points (c_l[0] < c_r[0]);
    ``n_l``/``n_r`` are unit normals pointing into the item.
    """

    c_l: np.ndarray
    c_r: np.ndarray
    n_l: np.ndarray
    n_r: np.ndarray

    def __post_init__(self):
        for name in ("c_l", "c_r", "n_l", "n_r"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).reshape(2))
        for name in ("n_l", "n_r"):
            n = getattr(self, name)
            norm = np.linalg.norm(n)
            if norm < 1e-12:
                raise ValueError(f"{name} has zero length")
            setattr(self, name, n / norm)
        if not self.c_l[0] < self.c_r[0]:
            raise ValueError("left contact must have strictly smaller y than right contact")

    def scaled(self, center, scale: float) -> "ContactPair":
        """Pair with contacts recentered on ``center`` and divided by ``scale``."""
        center = np.asarray(center, dtype=float)
        return ContactPair(
            (self.c_l - center) / scale,
            (self.c_r - center) / scale,
            self.n_l.copy(),
            self.n_r.copy(),
        )


def compute_aabb(points) -> Aabb2:
    """Tightest axis-aligned box around a point set.

    Raises EmptyCloud on an empty input.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise EmptyCloud("cannot bound an empty point set")
    pts = pts.reshape(-1, 2)
    return Aabb2(pts.min(axis=0), pts.max(axis=0))


def default_alpha(points) -> float:
    """Heuristic alpha: 3x the median nearest-neighbor spacing."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] < 2:
        raise DegenerateInput("need at least 2 points for a spacing estimate")
    dists, _ = cKDTree(pts).query(pts, k=2)
    spacing = float(np.median(dists[:, 1]))
    if spacing <= 0.0:
        raise DegenerateInput("coincident points give zero nearest-neighbor spacing")
    return 3.0 * spacing


def _circumradii(pts: np.ndarray, simplices: np.ndarray) -> np.ndarray:
    a = pts[simplices[:, 0]]
    b = pts[simplices[:, 1]]
    c = pts[simplices[:, 2]]
    la = np.linalg.norm(b - c, axis=1)
    lb = np.linalg.norm(a - c, axis=1)
    lc = np.linalg.norm(a - b, axis=1)
    area2 = np.abs(cross2(b - a, c - a))  # twice the triangle area
    with np.errstate(divide="ignore", invalid="ignore"):
        r = la * lb * lc / (2.0 * area2)
    r[area2 <= 0.0] = np.inf
    return r


def _walk_loops(directed_edges: list[tuple[int, int]], pts: np.ndarray) -> list[list[int]]:
    """Assemble closed loops from directed boundary edges (interior on the left)."""
    out_map: dict[int, list[int]] = {}
    for idx, (u, v) in enumerate(directed_edges):
        out_map.setdefault(u, []).append(idx)
    used = [False] * len(directed_edges)
    loops = []
    for start_idx in range(len(directed_edges)):
        if used[start_idx]:
            continue
        loop = []
        idx = start_idx
        while not used[idx]:
            used[idx] = True
            u, v = directed_edges[idx]
            loop.append(u)
            candidates = [j for j in out_map.get(v, []) if not used[j]]
            if not candidates:
                break
            if len(candidates) == 1:
                idx = candidates[0]
            else:
                # pinch vertex: take the leftmost turn to stay on this face
                d_in = pts[v] - pts[u]
                best, best_angle = candidates[0], -np.inf
                for j in candidates:
                    d_out = pts[directed_edges[j][1]] - pts[v]
                    ang = np.arctan2(cross2(d_in, d_out), np.dot(d_in, d_out))
                    if ang > best_angle:
                        best, best_angle = j, ang
                idx = best
        if len(loop) >= 3 and directed_edges[start_idx][0] == directed_edges[idx][1]:
            loops.append(loop)
    return loops


def alpha_shape(points, alpha: float) -> Contour:
    """Fit a concave contour to a planar point cloud.

    Delaunay triangles with circumradius <= alpha form the alpha complex;
    edges used by exactly one kept triangle form its boundary. The loop with
    the largest enclosed area is returned counterclockwise. Contour vertices
    are a subset of the input points.

    Raises DegenerateInput for point sets without 2D extent and NoBoundary
    (carrying the smallest workable alpha) when the filter keeps nothing.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] < 3:
        raise DegenerateInput(f"alpha shape needs >= 3 points, got {pts.shape[0]}")
    if alpha <= 0.0 or not np.isfinite(alpha):
        raise ValueError(f"alpha must be positive and finite, got {alpha}")
    try:
        tri = Delaunay(pts)
    except QhullError as exc:
        raise DegenerateInput(f"degenerate point set: {exc}") from exc
    simplices = tri.simplices
    # orient every triangle counterclockwise so boundary edges keep the
    # interior on their left
    flip = cross2(pts[simplices[:, 1]] - pts[simplices[:, 0]],
                  pts[simplices[:, 2]] - pts[simplices[:, 0]]) < 0
    simplices = simplices.copy()
    simplices[flip] = simplices[flip][:, [0, 2, 1]]

    radii = _circumradii(pts, simplices)
    kept = simplices[radii <= alpha]
    if kept.shape[0] == 0:
        raise NoBoundary(float(np.min(radii)))

    edge_count: dict[tuple[int, int], int] = {}
    for s in kept:
        for u, v in ((s[0], s[1]), (s[1], s[2]), (s[2], s[0])):
            key = (u, v) if u < v else (v, u)
            edge_count[key] = edge_count.get(key, 0) + 1
    directed = []
    for s in kept:
        for u, v in ((s[0], s[1]), (s[1], s[2]), (s[2], s[0])):
            key = (u, v) if u < v else (v, u)
            if edge_count[key] == 1:
                directed.append((int(u), int(v)))
    loops = _walk_loops(directed, pts)
    if not loops:
        raise NoBoundary(float(np.min(radii)))

    best, best_area = None, -1.0
    for loop in loops:
        v = pts[loop]
        w = np.roll(v, -1, axis=0)
        area = 0.5 * np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1])
        if abs(area) > best_area:
            best, best_area = (loop, area), abs(area)
    loop, area = best
    verts = pts[loop]
    if area < 0:
        verts = verts[::-1]
    return Contour(verts)


def contact_from_chord(contour: Contour, p_l, p_r, min_separation: float = 0.005) -> ContactPair:
    """Intersect the chord p_l -> p_r with the contour and build a contact pair.

    p_l must lie at or left of the contour's bounding box, p_r at or right of
    it. The first intersection along the chord becomes the left contact, the
    last the right contact; normals are the inward normals of the crossed
    edges. Raises NoIntersection when the chord misses the contour and
    TangentChord when the contacts are closer than ``min_separation``.
    """
    p_l = np.asarray(p_l, dtype=float).reshape(2)
    p_r = np.asarray(p_r, dtype=float).reshape(2)
    box = contour.aabb
    if p_l[0] > box.lo[0] + 1e-12 or p_r[0] < box.hi[0] - 1e-12:
        raise ValueError("chord endpoints must flank the contour's bounding box")

    v0 = contour.vertices
    v1 = np.roll(v0, -1, axis=0)
    r = p_r - p_l
    s = v1 - v0
    denom = cross2(np.broadcast_to(r, s.shape), s)
    qp = v0 - p_l[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross2(qp, s) / denom          # parameter along the chord
        u = cross2(qp, np.broadcast_to(r, s.shape)) / denom  # along the edge
    ok = (np.abs(denom) > 1e-14) & (t >= -1e-12) & (t <= 1.0 + 1e-12)
    # half-open edge interval so shared vertices are counted once
    ok &= (u >= -1e-12) & (u < 1.0 - 1e-12)
    if not np.any(ok):
        raise NoIntersection("chord does not cross the contour")

    t_hits = t[ok]
    edge_idx = np.nonzero(ok)[0]
    order = np.argsort(t_hits, kind="stable")
    t_hits = t_hits[order]
    edge_idx = edge_idx[order]
    # dedupe hits that coincide along the chord (vertex crossings)
    chord_len = float(np.linalg.norm(r))
    keep = np.ones(t_hits.shape[0], dtype=bool)
    keep[1:] = np.diff(t_hits) * chord_len > 1e-12
    t_hits = t_hits[keep]
    edge_idx = edge_idx[keep]

    c_l = p_l + t_hits[0] * r
    c_r = p_l + t_hits[-1] * r
    if float(np.linalg.norm(c_r - c_l)) < min_separation:
        raise TangentChord(
            f"contact separation {np.linalg.norm(c_r - c_l):.6g} below minimum {min_separation:.6g}"
        )

    def inward_normal(i: int) -> np.ndarray:
        e = s[i]
        n = np.array([-e[1], e[0]]) / np.linalg.norm(e)
        return n

    return ContactPair(c_l, c_r, inward_normal(edge_idx[0]), inward_normal(edge_idx[-1]))
