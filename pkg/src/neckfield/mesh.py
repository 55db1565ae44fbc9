"""Conforming triangulation of the two-inclusion domain (dimension 2).

The neck strip |x| <= R0 is a structured grid: graded stations along x,
``layers`` rows across the gap placed at fixed fractions of the local gap
width, quads split into triangles.  The far field is meshed by Delaunay
refinement (repeated scipy Delaunay builds with circumcenter insertion and
encroachment-driven boundary splits) on the half domain x >= 0 and then
mirrored, so the final mesh is exactly symmetric under x -> -x.  The strip
and the far field share the vertical fiber of vertices at x = R0, so the
glued mesh is vertex-conforming.

Boundary edge tags: OUTER, INCLUSION1 (upper), INCLUSION2 (lower).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, QhullError, cKDTree

from .geometry import InclusionPair

__all__ = [
    "MeshError",
    "MeshParams",
    "Mesh",
    "MeshAudit",
    "INTERIOR",
    "OUTER",
    "INCLUSION1",
    "INCLUSION2",
    "TAG_NAMES",
    "generate",
    "generate_touching",
    "refine_quadrisect",
    "audit",
    "mesh_convex_polygon",
    "write_mesh_text",
]

INTERIOR = 0
OUTER = 1
INCLUSION1 = 2
INCLUSION2 = 3
TAG_NAMES = {OUTER: "outer", INCLUSION1: "inclusion1", INCLUSION2: "inclusion2"}

_MIN_ANGLE_DEG = 20.0
_SIZE_SLACK = 1.35
_BATCH_LIMIT = 400


class MeshError(RuntimeError):
    """Mesh generation failed or produced an inconsistent triangulation."""


@dataclass(frozen=True)
class MeshParams:
    """Resolution knobs.

    ``layers`` rows span the gap (>= 4).  The neck station spacing is
    ``neck_step_factor * (gap / curvature_scale) ** grading_exponent`` so
    element anisotropy follows the gap; ``refinement`` scales both that
    factor and ``h_far`` by 2**(-refinement/2) per level.
    """

    layers: int = 6
    h_far: float = 0.2
    grading_exponent: float = 0.5
    neck_step_factor: float = 0.25
    refinement: int = 0

    def __post_init__(self) -> None:
        if self.layers < 4:
            raise MeshError(f"need at least 4 layers across the gap, got {self.layers}")
        if self.h_far <= 0.0:
            raise MeshError(f"far-field edge length must be positive, got {self.h_far}")
        if not (0.0 < self.grading_exponent <= 1.0):
            raise MeshError(f"grading exponent must lie in (0, 1], got {self.grading_exponent}")
        if self.neck_step_factor <= 0.0:
            raise MeshError("neck step factor must be positive")
        if self.refinement < 0:
            raise MeshError("refinement level must be nonnegative")

    def scaled(self) -> tuple[float, float]:
        """(effective neck factor, effective far size) after refinement."""
        shrink = 2.0 ** (-0.5 * self.refinement)
        return self.neck_step_factor * shrink, self.h_far * shrink


@dataclass
class Mesh:
    """Immutable triangulation with tagged boundary and neck bookkeeping."""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    vertex_tags: np.ndarray
    neck: np.ndarray
    neck_column_x: np.ndarray
    stations: np.ndarray
    layers: int

    def __post_init__(self) -> None:
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)
        self.boundary_edges.setflags(write=False)
        self.boundary_tags.setflags(write=False)
        self.vertex_tags.setflags(write=False)
        self.neck.setflags(write=False)
        self.neck_column_x.setflags(write=False)
        self.stations.setflags(write=False)

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_index(self) -> dict[tuple[int, int], int]:
        """Edge -> number of incident triangles."""
        counts: dict[tuple[int, int], int] = {}
        for tri in self.triangles:
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (int(min(a, b)), int(max(a, b)))
                counts[key] = counts.get(key, 0) + 1
        return counts


# ---------------------------------------------------------------------------
# neck strip


def _neck_stations(pair: InclusionPair, params: MeshParams, x_start: float) -> np.ndarray:
    factor, _ = params.scaled()
    g = params.grading_exponent
    r0 = pair.neck_radius
    gap0 = pair.gap_radial(x_start)
    if gap0 <= 0.0:
        raise MeshError("strip must start at positive gap width")
    xs = [x_start]
    x = x_start
    while True:
        delta = pair.gap_radial(x)
        scale = pair.profile.curvature_scale(x, gap0)
        step = factor * (delta / scale) ** g * r0 ** (1.0 - 2.0 * g)
        if step <= 1e-13 * max(1.0, r0):
            raise MeshError(f"neck step degenerated to {step:g}; geometry too thin for this grading")
        nxt = x + step
        if nxt >= r0 - 0.5 * step:
            xs.append(r0)
            break
        xs.append(nxt)
        x = nxt
    return np.asarray(xs)


@dataclass
class _Piece:
    vertices: np.ndarray
    triangles: np.ndarray
    segments: list[tuple[int, int, int]] = field(default_factory=list)
    neck: np.ndarray | None = None
    column_x: np.ndarray | None = None


def _strip_piece(pair: InclusionPair, params: MeshParams, x_start: float, bridge: bool) -> tuple[_Piece, np.ndarray, np.ndarray]:
    """Structured strip for x in [x_start, R0].

    Returns the piece, the station array and the coordinates of the end
    fiber at x = R0 (bottom to top).  With ``bridge`` the start fiber at
    x = x_start is a tagged boundary (touching-limit excision); otherwise
    it is left untagged (interior seam at x = 0).
    """
    if pair.eps > 0.0 and pair.eps / params.layers < 1e-13:
        raise MeshError(f"gap {pair.eps:g} too thin for {params.layers} layers at machine precision")
    xs = _neck_stations(pair, params, x_start)
    ns, nl = len(xs), params.layers
    rows = nl + 1
    verts = np.empty((ns * rows, 2))
    for s, x in enumerate(xs):
        h1, h2 = pair.profile.heights([x])
        top = pair.eps + h1
        delta = pair.eps + pair.profile.relative([x])
        base = s * rows
        for j in range(rows):
            y = top if j == nl else h2 + (j / nl) * delta
            verts[base + j] = (x, y)
    tris = []
    col_x = []
    for s in range(ns - 1):
        b0 = s * rows
        b1 = (s + 1) * rows
        mid = 0.5 * (xs[s] + xs[s + 1])
        for j in range(nl):
            v00, v01 = b0 + j, b0 + j + 1
            v10, v11 = b1 + j, b1 + j + 1
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
            col_x.extend((mid, mid))
    segments: list[tuple[int, int, int]] = []
    for s in range(ns - 1):
        segments.append((s * rows, (s + 1) * rows, INCLUSION2))
        segments.append((s * rows + nl, (s + 1) * rows + nl, INCLUSION1))
    if bridge:
        h1, h2 = pair.profile.heights([x_start])
        mid_curve = 0.5 * (pair.eps + h1 + h2)
        for j in range(nl):
            ymid = 0.5 * (verts[j, 1] + verts[j + 1, 1])
            tag = INCLUSION1 if ymid > mid_curve else INCLUSION2
            segments.append((j, j + 1, tag))
    tri_arr = np.asarray(tris, dtype=np.int64)
    piece = _Piece(
        vertices=verts,
        triangles=tri_arr,
        segments=segments,
        neck=np.ones(len(tri_arr), dtype=bool),
        column_x=np.asarray(col_x),
    )
    end_fiber = verts[(ns - 1) * rows : ns * rows].copy()
    return piece, xs, end_fiber


# ---------------------------------------------------------------------------
# far-field half domain


@dataclass
class _Chain:
    points: list[np.ndarray]
    tag: int | None
    protected: bool = False
    projector: object | None = None


def _graded_positions(length: float, s_start: float, s_end: float) -> np.ndarray:
    """Positions in [0, 1] splitting a curve of the given length with local
    sizes grading geometrically from the small end toward the large one."""
    if s_end < s_start:
        return 1.0 - _graded_positions(length, s_end, s_start)[::-1]
    steps = []
    pos = 0.0
    size = s_start
    while pos < length:
        steps.append(size)
        pos += size
        size = min(s_end, size * 1.3)
    total = sum(steps)
    return np.concatenate([[0.0], np.cumsum(steps) / total])


def _arc_chain(
    center: np.ndarray,
    radius: float,
    th0: float,
    th1: float,
    sizes: tuple[float, float],
    tag: int | None,
    p_start: np.ndarray,
    p_end: np.ndarray,
) -> _Chain:
    # Endpoints are snapped to the shared corner coordinates so consecutive
    # chains meet bitwise exactly.
    length = abs(th1 - th0) * radius
    positions = _graded_positions(length, sizes[0], sizes[1])
    thetas = th0 + (th1 - th0) * positions
    pts = [center + radius * np.array([math.cos(t), math.sin(t)]) for t in thetas]
    pts[0] = np.asarray(p_start, dtype=float)
    pts[-1] = np.asarray(p_end, dtype=float)

    def project(p: np.ndarray) -> np.ndarray:
        d = p - center
        return center + radius * d / math.hypot(d[0], d[1])

    return _Chain(points=pts, tag=tag, projector=project)


def _segment_chain(a: np.ndarray, b: np.ndarray, size: float, tag: int | None) -> _Chain:
    length = math.hypot(*(b - a))
    count = max(1, int(math.ceil(length / size)))
    pts = [a + (b - a) * (k / count) for k in range(count + 1)]
    pts[0] = np.asarray(a, dtype=float)
    pts[-1] = np.asarray(b, dtype=float)
    return _Chain(points=pts, tag=tag)


def _fiber_chain(fiber: np.ndarray) -> _Chain:
    # Bottom-to-top fiber shared verbatim with the strip; never split.
    return _Chain(points=[fiber[j].copy() for j in range(fiber.shape[0])], tag=None, protected=True)


def _polygon_points(chains: list[_Chain]) -> np.ndarray:
    pts = []
    for chain in chains:
        pts.extend(chain.points[:-1])
    return np.asarray(pts)


def _points_inside(poly: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Even-odd rule, vectorized over query points."""
    x, y = query[:, 0], query[:, 1]
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    inside = np.zeros(len(query), dtype=bool)
    for i in range(len(poly)):
        cond = (y0[i] > y) != (y1[i] > y)
        if not cond.any():
            continue
        t = (y[cond] - y0[i]) / (y1[i] - y0[i])
        xc = x0[i] + t * (x1[i] - x0[i])
        flip = x[cond] < xc
        idx = np.flatnonzero(cond)[flip]
        inside[idx] = ~inside[idx]
    return inside


def _tri_min_angles(p: np.ndarray) -> np.ndarray:
    """Min interior angle (radians) per triangle, p of shape (T,3,2)."""
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    angles = np.empty((len(p), 3))
    for k, (opp, s1, s2) in enumerate(((a, b, c), (b, a, c), (c, a, b))):
        cosv = (s1**2 + s2**2 - opp**2) / np.maximum(2.0 * s1 * s2, 1e-300)
        angles[:, k] = np.arccos(np.clip(cosv, -1.0, 1.0))
    return angles.min(axis=1)


def _circumcenters(p: np.ndarray) -> np.ndarray:
    ax, ay = p[:, 0, 0], p[:, 0, 1]
    bx, by = p[:, 1, 0], p[:, 1, 1]
    cx, cy = p[:, 2, 0], p[:, 2, 1]
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    d = np.where(np.abs(d) < 1e-300, 1e-300, d)
    a2 = ax**2 + ay**2
    b2 = bx**2 + by**2
    c2 = cx**2 + cy**2
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    return np.column_stack([ux, uy])


def _refine_polygon(chains: list[_Chain], size_fn, max_iter: int = 60, max_points: int = 200_000) -> _Piece:
    """Delaunay refinement of the region bounded by the chain loop."""
    # Global vertex store; chains index into it.
    coords: list[np.ndarray] = []
    index: dict[tuple[float, float], int] = {}

    def intern(p: np.ndarray) -> int:
        key = (float(p[0]), float(p[1]))
        got = index.get(key)
        if got is None:
            got = len(coords)
            index[key] = got
            coords.append(np.asarray(p, dtype=float))
        return got

    chain_ids: list[list[int]] = [[intern(p) for p in ch.points] for ch in chains]
    free: list[np.ndarray] = []

    for iteration in range(max_iter):
        pts = np.asarray(coords + free)
        if len(pts) > max_points:
            raise MeshError(f"refinement exceeded {max_points} points")
        try:
            tri = Delaunay(pts)
        except QhullError as exc:  # pragma: no cover - defensive
            raise MeshError(f"Delaunay triangulation failed: {exc}") from exc
        poly = _polygon_points_current(chains, chain_ids, coords)
        cells = tri.simplices
        cent = pts[cells].mean(axis=1)
        keep = _points_inside(poly, cent)
        cells = cells[keep]
        edges = set()
        for t in cells:
            for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                edges.add((min(int(a), int(b)), max(int(a), int(b))))

        # Conformity: every chain segment must be a triangulation edge.
        missing: list[tuple[int, int]] = []
        for ci, ids in enumerate(chain_ids):
            for k in range(len(ids) - 1):
                a, b = ids[k], ids[k + 1]
                if (min(a, b), max(a, b)) not in edges:
                    missing.append((ci, k))
        if missing:
            for ci, k in reversed(missing):
                if chains[ci].protected:
                    raise MeshError("protected interface segment lost Delaunay conformity")
                _split_chain_segment(chains[ci], chain_ids[ci], k, coords, index)
            continue

        pcoords = pts[cells]
        min_ang = _tri_min_angles(pcoords)
        lengths = np.stack(
            [
                np.linalg.norm(pcoords[:, 0] - pcoords[:, 1], axis=1),
                np.linalg.norm(pcoords[:, 1] - pcoords[:, 2], axis=1),
                np.linalg.norm(pcoords[:, 2] - pcoords[:, 0], axis=1),
            ],
            axis=1,
        )
        longest = lengths.max(axis=1)
        cent = pts[cells].mean(axis=1)
        target = size_fn(cent)
        too_big = longest > _SIZE_SLACK * target
        too_thin = min_ang < math.radians(_MIN_ANGLE_DEG)
        bad = np.flatnonzero(too_big | too_thin)
        if len(bad) == 0:
            break

        ratio = longest[bad] / target[bad]
        order = np.lexsort((bad, -ratio))
        bad = bad[order][:_BATCH_LIMIT]
        cands = _circumcenters(pcoords[bad])
        inside = _points_inside(poly, cands)

        seg_a, seg_b, seg_prot, seg_ci, seg_k = _segment_arrays(chains, chain_ids)
        mid = 0.5 * (np.asarray([coords[i] for i in seg_a]) + np.asarray([coords[i] for i in seg_b]))
        rad2 = np.sum((np.asarray([coords[i] for i in seg_a]) - mid) ** 2, axis=1)

        tree = cKDTree(pts)
        accepted: list[np.ndarray] = []
        split_requests: set[tuple[int, int]] = set()
        for ci_cand in range(len(cands)):
            cand = cands[ci_cand]
            if not inside[ci_cand]:
                # Circumcenter escaped the domain: treat the triangle's
                # nearest boundary segment as encroached instead.
                owner = _nearest_segment(cand, mid)
                if not seg_prot[owner]:
                    split_requests.add((seg_ci[owner], seg_k[owner]))
                continue
            d2 = np.sum((mid - cand) ** 2, axis=1)
            enc = d2 < rad2 * (1.0 - 1e-12)
            if enc.any():
                hit = np.flatnonzero(enc)
                if seg_prot[hit].any():
                    continue
                for h in hit:
                    split_requests.add((seg_ci[h], seg_k[h]))
                continue
            local = float(size_fn(cand[None, :])[0])
            if tree.query(cand)[0] < 0.45 * local:
                continue
            if any(np.hypot(*(cand - q)) < 0.45 * local for q in accepted):
                continue
            accepted.append(cand)

        if split_requests:
            for ci, k in sorted(split_requests, reverse=True):
                _split_chain_segment(chains[ci], chain_ids[ci], k, coords, index)
        free.extend(accepted)
        if not accepted and not split_requests:
            break
    else:
        raise MeshError("far-field refinement did not settle within the iteration budget")

    pts = np.asarray(coords + free)
    tri = Delaunay(pts)
    poly = _polygon_points_current(chains, chain_ids, coords)
    cells = tri.simplices
    keep = _points_inside(poly, pts[cells].mean(axis=1))
    cells = cells[keep]
    segments: list[tuple[int, int, int]] = []
    for ch, ids in zip(chains, chain_ids):
        if ch.tag is None:
            continue
        for k in range(len(ids) - 1):
            segments.append((ids[k], ids[k + 1], ch.tag))
    return _Piece(vertices=pts, triangles=np.asarray(cells, dtype=np.int64), segments=segments)


def _polygon_points_current(chains, chain_ids, coords) -> np.ndarray:
    pts = []
    for ids in chain_ids:
        pts.extend(coords[i] for i in ids[:-1])
    return np.asarray(pts)


def _segment_arrays(chains, chain_ids):
    a, b, prot, ci_list, k_list = [], [], [], [], []
    for ci, ids in enumerate(chain_ids):
        for k in range(len(ids) - 1):
            a.append(ids[k])
            b.append(ids[k + 1])
            prot.append(chains[ci].protected)
            ci_list.append(ci)
            k_list.append(k)
    return (
        np.asarray(a),
        np.asarray(b),
        np.asarray(prot, dtype=bool),
        np.asarray(ci_list),
        np.asarray(k_list),
    )


def _nearest_segment(p: np.ndarray, midpoints: np.ndarray) -> int:
    return int(np.argmin(np.sum((midpoints - p) ** 2, axis=1)))


def _split_chain_segment(chain: _Chain, ids: list[int], k: int, coords, index) -> None:
    if chain.protected:
        raise MeshError("attempted to split a protected interface segment")
    a = coords[ids[k]]
    b = coords[ids[k + 1]]
    mid = 0.5 * (a + b)
    if chain.projector is not None:
        mid = chain.projector(mid)
    key = (float(mid[0]), float(mid[1]))
    if key in index:
        raise MeshError("boundary split produced a duplicate vertex")
    new_id = len(coords)
    index[key] = new_id
    coords.append(np.asarray(mid, dtype=float))
    chain.points.insert(k + 1, mid)
    ids.insert(k + 1, new_id)


# ---------------------------------------------------------------------------
# assembly of the full mesh


def _far_half_piece(pair: InclusionPair, params: MeshParams, end_fiber: np.ndarray, last_dx: float) -> _Piece:
    _, h_far = params.scaled()
    cap1, cap2 = pair.caps()
    r0 = pair.neck_radius
    rd = pair.outer_radius
    c1 = np.array([0.0, cap1.center_height])
    c2 = np.array([0.0, cap2.center_height])
    top1 = np.array([0.0, cap1.center_height + cap1.radius])
    bot2 = np.array([0.0, cap2.center_height - cap2.radius])
    jun1 = end_fiber[-1]
    jun2 = end_fiber[0]
    fiber_dy = float(np.diff(end_fiber[:, 1]).max())
    s_jun = min(h_far, max(fiber_dy, 0.6 * last_dx))

    theta1 = math.atan2(jun1[1] - c1[1], jun1[0] - c1[0])
    theta2 = math.atan2(jun2[1] - c2[1], jun2[0] - c2[0])
    top_rd = np.array([0.0, rd])
    bot_rd = np.array([0.0, -rd])

    chains = [
        _segment_chain(top_rd, top1, h_far, tag=None),
        _arc_chain(c1, cap1.radius, math.pi / 2.0, theta1, (h_far, s_jun), INCLUSION1, top1, jun1),
        _fiber_chain(end_fiber[::-1]),
        _arc_chain(c2, cap2.radius, theta2, -math.pi / 2.0, (s_jun, h_far), INCLUSION2, jun2, bot2),
        _segment_chain(bot2, bot_rd, h_far, tag=None),
        _arc_chain(np.zeros(2), rd, -math.pi / 2.0, math.pi / 2.0, (h_far, h_far), OUTER, bot_rd, top_rd),
    ]
    # The loop above runs clockwise in angle on the caps but the overall
    # traversal keeps the interior on the left; fix orientation by area.
    poly = _polygon_points(chains)
    area2 = np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1])
    if area2 < 0.0:
        chains = [
            _Chain(points=list(reversed(ch.points)), tag=ch.tag, protected=ch.protected, projector=ch.projector)
            for ch in reversed(chains)
        ]

    junctions = np.stack([jun1, jun2])

    def size_fn(pts: np.ndarray) -> np.ndarray:
        d = np.sqrt(np.min(np.sum((pts[:, None, :] - junctions[None, :, :]) ** 2, axis=2), axis=1))
        return np.minimum(h_far, s_jun + 0.45 * d)

    return _refine_polygon(chains, size_fn)


def _mirror_piece(piece: _Piece) -> _Piece:
    verts = piece.vertices.copy()
    verts[:, 0] = -verts[:, 0] + 0.0
    tris = piece.triangles[:, ::-1].copy()
    col = None if piece.column_x is None else -piece.column_x + 0.0
    return _Piece(
        vertices=verts,
        triangles=tris,
        segments=list(piece.segments),
        neck=None if piece.neck is None else piece.neck.copy(),
        column_x=col,
    )


def _merge_pieces(pieces: list[_Piece]) -> tuple[np.ndarray, np.ndarray, list[tuple[int, int, int]], np.ndarray, np.ndarray]:
    key2id: dict[tuple[float, float], int] = {}
    verts: list[tuple[float, float]] = []
    tris = []
    segs: list[tuple[int, int, int]] = []
    neck_flags = []
    col_x = []
    for piece in pieces:
        local = np.empty(len(piece.vertices), dtype=np.int64)
        for i, (x, y) in enumerate(piece.vertices):
            key = (float(x), float(y))
            got = key2id.get(key)
            if got is None:
                got = len(verts)
                key2id[key] = got
                verts.append(key)
            local[i] = got
        tris.append(local[piece.triangles])
        for a, b, tag in piece.segments:
            segs.append((int(local[a]), int(local[b]), tag))
        count = len(piece.triangles)
        if piece.neck is None:
            neck_flags.append(np.zeros(count, dtype=bool))
            col_x.append(np.full(count, np.nan))
        else:
            neck_flags.append(piece.neck)
            col_x.append(piece.column_x)
    v = np.asarray(verts)
    t = np.vstack(tris)
    return v, t, segs, np.concatenate(neck_flags), np.concatenate(col_x)


def _finalize(pair_stations: np.ndarray, layers: int, merged) -> Mesh:
    verts, tris, segs, neck, col_x = merged
    p = verts[tris]
    area2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (
        p[:, 2, 0] - p[:, 0, 0]
    )
    if np.any(area2 == 0.0):
        raise MeshError("degenerate triangle produced during merge")
    flip = area2 < 0.0
    tris = tris.copy()
    tris[flip] = tris[flip][:, ::-1]

    edges = np.sort(
        np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=0), axis=1
    )
    declared = {}
    for a, b, tag in segs:
        key = (min(a, b), max(a, b))
        if key in declared and declared[key] != tag:
            raise MeshError(f"conflicting tags on boundary edge {key}")
        declared[key] = tag
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    boundary = uniq[counts == 1]
    bset = {(int(a), int(b)) for a, b in boundary}
    if bset != set(declared):
        missing = set(declared) - bset
        extra = bset - set(declared)
        raise MeshError(
            f"boundary mismatch: {len(missing)} declared edges interior, {len(extra)} untagged boundary edges"
        )
    b_edges = np.asarray(sorted(bset), dtype=np.int64)
    b_tags = np.asarray([declared[(int(a), int(b))] for a, b in b_edges], dtype=np.int64)

    vtags = np.full(len(verts), INTERIOR, dtype=np.int64)
    for (a, b), tag in zip(b_edges, b_tags):
        for v in (int(a), int(b)):
            if vtags[v] == INTERIOR:
                vtags[v] = tag
            elif vtags[v] != tag:
                # The two inclusion tags meet mid-bridge on touching-limit
                # meshes; the merged conductor makes the choice immaterial.
                pair_tags = {vtags[v], tag}
                if pair_tags == {INCLUSION1, INCLUSION2}:
                    vtags[v] = INCLUSION1
                else:
                    raise MeshError("boundary vertex carries edges of incompatible tags")

    return Mesh(
        vertices=verts,
        triangles=tris,
        boundary_edges=b_edges,
        boundary_tags=b_tags,
        vertex_tags=vtags,
        neck=neck,
        neck_column_x=col_x,
        stations=pair_stations,
        layers=layers,
    )


def generate(pair: InclusionPair, params: MeshParams) -> Mesh:
    """Mesh the full domain for a positive gap."""
    if pair.dimension != 2:
        raise MeshError("meshing is implemented for dimension 2 only")
    if pair.eps <= 0.0:
        raise MeshError("generate needs a positive gap; use generate_touching for eps = 0")
    strip_r, xs, end_fiber = _strip_piece(pair, params, 0.0, bridge=False)
    last_dx = float(xs[-1] - xs[-2])
    far_r = _far_half_piece(pair, params, end_fiber, last_dx)
    strip_l = _mirror_piece(strip_r)
    far_l = _mirror_piece(far_r)
    stations = np.concatenate([(-xs[::-1])[:-1] + 0.0, xs])
    merged = _merge_pieces([strip_r, strip_l, far_r, far_l])
    return _finalize(stations, params.layers, merged)


def generate_touching(pair: InclusionPair, r_cut: float, params: MeshParams) -> Mesh:
    """Mesh the touching-limit domain with |x| < r_cut excised and the
    excision fibers tagged as (merged) inclusion boundary."""
    if pair.dimension != 2:
        raise MeshError("meshing is implemented for dimension 2 only")
    if pair.eps != 0.0:
        raise MeshError("touching mesh needs eps = 0")
    if not (0.0 < r_cut < pair.neck_radius / 2.0):
        raise MeshError(f"cut radius must lie in (0, R0/2), got {r_cut}")
    strip_r, xs, end_fiber = _strip_piece(pair, params, r_cut, bridge=True)
    last_dx = float(xs[-1] - xs[-2])
    far_r = _far_half_piece(pair, params, end_fiber, last_dx)
    strip_l = _mirror_piece(strip_r)
    far_l = _mirror_piece(far_r)
    stations = np.concatenate([(-xs[::-1]) + 0.0, xs])
    merged = _merge_pieces([strip_r, strip_l, far_r, far_l])
    return _finalize(stations, params.layers, merged)


# ---------------------------------------------------------------------------
# audit and export


@dataclass(frozen=True)
class MeshAudit:
    vertex_count: int
    edge_count: int
    triangle_count: int
    boundary_loop_count: int
    euler_characteristic: int
    neck_triangle_count: int
    min_area: float
    far_min_angle_deg: float
    far_max_aspect: float
    failures: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failures


def audit(mesh: Mesh) -> MeshAudit:
    """Invariant replay: watertightness, orientation, Euler count, quality."""
    failures: list[str] = []
    areas = mesh.areas()
    if np.any(areas <= 0.0):
        failures.append(f"{int(np.sum(areas <= 0.0))} non-positively oriented triangles")
    counts = mesh.edge_index()
    n_edges = len(counts)
    over = [e for e, c in counts.items() if c > 2]
    if over:
        failures.append(f"{len(over)} edges shared by more than two triangles")
    boundary = {e for e, c in counts.items() if c == 1}
    declared = {(int(min(a, b)), int(max(a, b))) for a, b in mesh.boundary_edges}
    if boundary != declared:
        failures.append("boundary edges do not match declared tagged edges")

    adjacency: dict[int, list[int]] = {}
    for a, b in boundary:
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)
    non_manifold = [v for v, nb in adjacency.items() if len(nb) != 2]
    loops = 0
    if non_manifold:
        failures.append(f"{len(non_manifold)} non-manifold boundary vertices")
    else:
        seen: set[int] = set()
        for start in sorted(adjacency):
            if start in seen:
                continue
            loops += 1
            prev, cur = None, start
            while True:
                seen.add(cur)
                nxt = [w for w in adjacency[cur] if w != prev]
                prev, cur = cur, nxt[0]
                if cur == start:
                    break

    euler = mesh.vertex_count - n_edges + mesh.triangle_count
    if loops and euler != 2 - loops:
        failures.append(f"Euler characteristic {euler} inconsistent with {loops} boundary loops")

    far = ~mesh.neck
    if far.any():
        p = mesh.vertices[mesh.triangles[far]]
        min_angle = math.degrees(float(_tri_min_angles(p).min()))
        lengths = np.stack(
            [
                np.linalg.norm(p[:, 0] - p[:, 1], axis=1),
                np.linalg.norm(p[:, 1] - p[:, 2], axis=1),
                np.linalg.norm(p[:, 2] - p[:, 0], axis=1),
            ],
            axis=1,
        )
        longest = lengths.max(axis=1)
        aspect = float((longest**2 / (2.0 * np.abs(areas[far]))).max())
    else:
        min_angle = float("nan")
        aspect = float("nan")

    return MeshAudit(
        vertex_count=mesh.vertex_count,
        edge_count=n_edges,
        triangle_count=mesh.triangle_count,
        boundary_loop_count=loops,
        euler_characteristic=euler,
        neck_triangle_count=int(mesh.neck.sum()),
        min_area=float(areas.min()),
        far_min_angle_deg=min_angle,
        far_max_aspect=aspect,
        failures=tuple(failures),
    )


def refine_quadrisect(mesh: Mesh, pair: InclusionPair) -> Mesh:
    """Split every triangle into four via edge midpoints.

    Midpoints of boundary edges are projected back onto the exact boundary
    curve (outer circle, cap circles, or profile graph), so repeated
    refinement converges to the true domain while successive meshes stay
    nested up to that projection.  This gives monotone self-convergence
    for mesh studies, independent of the unstructured generator.
    """
    cap1, cap2 = pair.caps()
    r0 = pair.neck_radius

    btag: dict[tuple[int, int], int] = {}
    for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        btag[(int(min(a, b)), int(max(a, b)))] = int(tag)

    verts = [tuple(v) for v in mesh.vertices]
    vtags = list(mesh.vertex_tags)
    midpoint: dict[tuple[int, int], int] = {}

    def _on_profile(i: int, upper: bool) -> bool:
        x, y = mesh.vertices[i]
        if abs(x) > r0 + 1e-12:
            return False
        h1, h2 = pair.profile.heights([x])
        ref = pair.eps + h1 if upper else h2
        return abs(y - ref) <= 1e-9 * max(1.0, abs(ref))

    def _project(a: int, b: int, tag: int, mid: np.ndarray) -> np.ndarray:
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        if tag == OUTER:
            return mid * (pair.outer_radius / math.hypot(mid[0], mid[1]))
        if abs(pa[0] - pb[0]) <= 1e-14:
            return mid  # vertical excision fiber, straight
        upper = tag == INCLUSION1
        if _on_profile(a, upper) and _on_profile(b, upper):
            h1, h2 = pair.profile.heights([mid[0]])
            y = pair.eps + h1 if upper else h2
            return np.array([mid[0], y])
        cap = cap1 if upper else cap2
        center = np.array([0.0, cap.center_height])
        d = mid - center
        return center + d * (cap.radius / math.hypot(d[0], d[1]))

    def mid_id(a: int, b: int) -> int:
        key = (min(a, b), max(a, b))
        got = midpoint.get(key)
        if got is not None:
            return got
        mid = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
        tag = btag.get(key, INTERIOR)
        if tag != INTERIOR:
            mid = _project(a, b, tag, mid)
        got = len(verts)
        verts.append((float(mid[0]), float(mid[1])))
        vtags.append(tag)
        midpoint[key] = got
        return got

    tris = []
    neck = []
    col_x = []
    for t, (v0, v1, v2) in enumerate(mesh.triangles):
        m01 = mid_id(int(v0), int(v1))
        m12 = mid_id(int(v1), int(v2))
        m20 = mid_id(int(v2), int(v0))
        tris.extend([(v0, m01, m20), (v1, m12, m01), (v2, m20, m12), (m01, m12, m20)])
        neck.extend([mesh.neck[t]] * 4)
        col_x.extend([mesh.neck_column_x[t]] * 4)

    b_edges = []
    b_tags = []
    for (a, b), tag in btag.items():
        m = midpoint[(a, b)]
        for e in ((a, m), (m, b)):
            b_edges.append((min(e), max(e)))
            b_tags.append(tag)
    order = np.lexsort((np.asarray(b_edges)[:, 1], np.asarray(b_edges)[:, 0]))

    return Mesh(
        vertices=np.asarray(verts),
        triangles=np.asarray(tris, dtype=np.int64),
        boundary_edges=np.asarray(b_edges, dtype=np.int64)[order],
        boundary_tags=np.asarray(b_tags, dtype=np.int64)[order],
        vertex_tags=np.asarray(vtags, dtype=np.int64),
        neck=np.asarray(neck, dtype=bool),
        neck_column_x=np.asarray(col_x),
        stations=mesh.stations,
        layers=2 * mesh.layers,
    )


def mesh_convex_polygon(corners: np.ndarray, h: float) -> Mesh:
    """Uniform refinement of a convex polygon; single OUTER boundary tag.

    Small helper for solver verification on hole-free domains.
    """
    corners = np.asarray(corners, dtype=float)
    chains = []
    for k in range(len(corners)):
        a, b = corners[k], corners[(k + 1) % len(corners)]
        chains.append(_segment_chain(a, b, h, tag=OUTER))

    def size_fn(pts: np.ndarray) -> np.ndarray:
        return np.full(len(pts), h)

    piece = _refine_polygon(chains, size_fn)
    count = len(piece.triangles)
    piece.neck = np.zeros(count, dtype=bool)
    piece.column_x = np.full(count, np.nan)
    merged = _merge_pieces([piece])
    return _finalize(np.asarray([]), 4, merged)


def write_mesh_text(mesh: Mesh) -> str:
    """Plain-text encoding: header 'V E T', vertices, triangles, tagged
    boundary edges, whitespace separated."""
    counts = mesh.edge_index()
    lines = [f"{mesh.vertex_count} {len(counts)} {mesh.triangle_count}"]
    for x, y in mesh.vertices:
        lines.append(f"{float(x)!r} {float(y)!r}")
    for i, j, k in mesh.triangles:
        lines.append(f"{i} {j} {k}")
    for (i, j), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        lines.append(f"{i} {j} {TAG_NAMES[int(tag)]}")
    return "\n".join(lines) + "\n"
