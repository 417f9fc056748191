"""Embedded planar graphs, grid domains, lattice generators and geometric queries."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class GraphError(ValueError):
    pass


class DomainError(ValueError):
    pass


ROW_SUM_TOL = 1e-12


# ---------------------------------------------------------------------------
# exact planar predicates

def _orient(ax, ay, bx, by, cx, cy) -> int:
    """Sign of the cross product (b-a) x (c-a), exact over rationals."""
    ax, ay, bx, by, cx, cy = (Fraction(v) for v in (ax, ay, bx, by, cx, cy))
    d = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (d > 0) - (d < 0)


def _on_segment(px, py, ax, ay, bx, by) -> bool:
    """p lies on the closed segment [a, b] (collinearity assumed checked)."""
    return (min(ax, bx) <= px <= max(ax, bx)) and (min(ay, by) <= py <= max(ay, by))


def segments_conflict(a0, a1, b0, b1) -> bool:
    """True when two segments (complex endpoints) meet anywhere except a
    single shared endpoint.  Exact rational arithmetic, so lattice inputs
    never produce false crossings."""
    pa = (a0.real, a0.imag, a1.real, a1.imag)
    pb = (b0.real, b0.imag, b1.real, b1.imag)
    ea = {(pa[0], pa[1]), (pa[2], pa[3])}
    eb = {(pb[0], pb[1]), (pb[2], pb[3])}
    shared = ea & eb
    if len(shared) == 2:
        return False  # same segment (e.g. both directions of one edge)
    if len(shared) == 1:
        (sx, sy), = shared
        (ox, oy), = ea - shared
        (qx, qy), = eb - shared
        if _orient(sx, sy, ox, oy, qx, qy) != 0:
            return False
        # collinear through the shared endpoint: conflict iff both run the same way
        dot = Fraction(ox - sx) * Fraction(qx - sx) + Fraction(oy - sy) * Fraction(qy - sy)
        return dot > 0
    d1 = _orient(pb[0], pb[1], pb[2], pb[3], pa[0], pa[1])
    d2 = _orient(pb[0], pb[1], pb[2], pb[3], pa[2], pa[3])
    d3 = _orient(pa[0], pa[1], pa[2], pa[3], pb[0], pb[1])
    d4 = _orient(pa[0], pa[1], pa[2], pa[3], pb[2], pb[3])
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True
    for (px, py), (e0, e1) in (
        ((pa[0], pa[1]), (b0, b1)), ((pa[2], pa[3]), (b0, b1)),
        ((pb[0], pb[1]), (a0, a1)), ((pb[2], pb[3]), (a0, a1)),
    ):
        if _orient(e0.real, e0.imag, e1.real, e1.imag, px, py) == 0 and \
                _on_segment(px, py, e0.real, e0.imag, e1.real, e1.imag):
            return True
    return False


def point_segment_distance(z, a, b) -> float:
    """Euclidean distance from point z to segment [a, b]."""
    ab = b - a
    den = (ab * ab.conjugate()).real
    if den == 0.0:
        return abs(z - a)
    t = ((z - a) * ab.conjugate()).real / den
    t = min(1.0, max(0.0, t))
    return abs(z - (a + t * ab))


# ---------------------------------------------------------------------------
# planar graph

class PlanarGraph:
    """Embedded directed weighted graph; the walk's state space.

    Vertices are complex plane points.  Outgoing edges of each vertex are
    stored in counterclockwise angular order, which doubles as the rotation
    system.  Every row of the transition kernel must sum to 1 within 1e-12.
    Instances are immutable after construction and safe to share across
    concurrent workers.
    """

    def __init__(self, points, edges):
        self.points = np.asarray(points, dtype=np.complex128)
        if self.points.ndim != 1 or len(self.points) == 0:
            raise GraphError("vertex array must be a nonempty 1-d sequence of plane points")
        if not np.all(np.isfinite(self.points.view(np.float64))):
            raise GraphError("vertex coordinates must be finite")
        n = len(self.points)
        by_src: list[list[tuple[float, int, float]]] = [[] for _ in range(n)]
        seen = set()
        for u, v, w in edges:
            u, v, w = int(u), int(v), float(w)
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u},{v}) references unknown vertex")
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            if not (0.0 < w <= 1.0):
                raise GraphError(f"edge ({u},{v}) weight {w} outside (0,1]")
            if (u, v) in seen:
                raise GraphError(f"duplicate edge ({u},{v})")
            seen.add((u, v))
            ang = math.atan2((self.points[v] - self.points[u]).imag,
                             (self.points[v] - self.points[u]).real)
            by_src[u].append((ang, v, w))
        indptr = np.zeros(n + 1, dtype=np.int64)
        targets, weights = [], []
        for u in range(n):
            by_src[u].sort()
            indptr[u + 1] = indptr[u] + len(by_src[u])
            for _, v, w in by_src[u]:
                targets.append(v)
                weights.append(w)
        self.indptr = indptr
        self.targets = np.asarray(targets, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=np.float64)
        sums = np.add.reduceat(self.weights, self.indptr[:-1]) if len(self.weights) else np.zeros(n)
        sums = np.where(np.diff(self.indptr) > 0, sums, np.nan)
        bad = np.where(np.abs(sums - 1.0) > ROW_SUM_TOL)[0]
        if len(bad):
            raise GraphError(f"outgoing weights at vertex {bad[0]} sum to {sums[bad[0]]!r}, not 1")
        self._edge_slot = {(int(u), int(self.targets[k])): k
                           for u in range(n) for k in range(indptr[u], indptr[u + 1])}
        cdf = np.copy(self.weights)
        for u in range(n):
            s, e = indptr[u], indptr[u + 1]
            if e > s:
                cdf[s:e] = np.cumsum(cdf[s:e])
                cdf[e - 1] = 1.0 + 1e-15  # guard against roundoff at the top
        self.cdf = cdf
        self._pos_index = {self._pos_key(z): i for i, z in enumerate(self.points)}

    @staticmethod
    def _pos_key(z) -> tuple[int, int]:
        return (round(z.real * 1e9), round(z.imag * 1e9))

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    @property
    def n_edges(self) -> int:
        return len(self.targets)

    def out_edges(self, u: int):
        """(targets, weights) of vertex u in rotation (CCW) order."""
        s, e = self.indptr[u], self.indptr[u + 1]
        return self.targets[s:e], self.weights[s:e]

    def p(self, u: int, v: int) -> float:
        k = self._edge_slot.get((int(u), int(v)))
        return 0.0 if k is None else float(self.weights[k])

    def has_segment(self, u: int, v: int) -> bool:
        return (u, v) in self._edge_slot or (v, u) in self._edge_slot

    def find_vertex(self, z, tol: float = 1e-9) -> int:
        i = self._pos_index.get(self._pos_key(z))
        if i is not None and abs(self.points[i] - z) <= tol:
            return i
        d = np.abs(self.points - z)
        i = int(np.argmin(d))
        if d[i] > tol:
            raise GraphError(f"no vertex within {tol} of {z}")
        return i

    def undirected_segments(self):
        """Canonical (u, v) pairs with u < v, one per geometric segment."""
        segs = set()
        for u in range(self.n_vertices):
            for v in self.out_edges(u)[0]:
                segs.add((min(u, int(v)), max(u, int(v))))
        return sorted(segs)


@dataclass
class PlanarityReport:
    ok: bool
    crossings: list

    def __bool__(self) -> bool:
        return self.ok


def validate_planarity(g: PlanarGraph) -> PlanarityReport:
    """Check that no two edge segments meet except at shared endpoints.

    Candidate pairs come from a uniform spatial hash; each candidate is
    decided with exact rational orientation predicates.
    """
    segs = g.undirected_segments()
    if not segs:
        return PlanarityReport(True, [])
    pts = g.points
    lengths = [abs(pts[a] - pts[b]) for a, b in segs]
    cell = max(max(lengths), 1e-9)
    buckets: dict[tuple[int, int], list[int]] = {}
    for k, (a, b) in enumerate(segs):
        x0, x1 = sorted((pts[a].real, pts[b].real))
        y0, y1 = sorted((pts[a].imag, pts[b].imag))
        for ix in range(int(math.floor(x0 / cell)), int(math.floor(x1 / cell)) + 1):
            for iy in range(int(math.floor(y0 / cell)), int(math.floor(y1 / cell)) + 1):
                buckets.setdefault((ix, iy), []).append(k)
    checked = set()
    crossings = []
    for group in buckets.values():
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                pair = (min(group[i], group[j]), max(group[i], group[j]))
                if pair in checked:
                    continue
                checked.add(pair)
                (a0, a1), (b0, b1) = segs[pair[0]], segs[pair[1]]
                if segments_conflict(pts[a0], pts[a1], pts[b0], pts[b1]):
                    crossings.append(((a0, a1), (b0, b1)))
    return PlanarityReport(len(crossings) == 0, crossings)


def build_square_lattice(spacing: float, bbox) -> PlanarGraph:
    """Square lattice restricted to an axis-aligned box.

    bbox is (xmin, ymin, xmax, ymax).  Vertices sit at integer multiples of
    `spacing`.  Full-degree vertices get four outgoing edges of weight 1/4;
    vertices on the box rim get weight 1/deg so rows stay stochastic (rim
    vertices are meant to be absorbing, never walked from).
    """
    if spacing <= 0:
        raise GraphError("spacing must be positive")
    xmin, ymin, xmax, ymax = (float(v) for v in bbox)
    if not (xmin < xmax and ymin < ymax):
        raise GraphError("degenerate region")
    eps = 1e-9 * spacing
    i0, i1 = math.ceil((xmin - eps) / spacing), math.floor((xmax + eps) / spacing)
    j0, j1 = math.ceil((ymin - eps) / spacing), math.floor((ymax + eps) / spacing)
    if i0 > i1 or j0 > j1:
        raise GraphError("degenerate region")
    index = {}
    points = []
    for j in range(j0, j1 + 1):
        for i in range(i0, i1 + 1):
            index[(i, j)] = len(points)
            points.append(complex(i * spacing, j * spacing))
    edges = []
    for (i, j), u in index.items():
        nbrs = [index[k] for k in ((i + 1, j), (i, j + 1), (i - 1, j), (i, j - 1)) if k in index]
        w = 0.25 if len(nbrs) == 4 else 1.0 / len(nbrs)
        for v in nbrs:
            edges.append((u, v, w))
    return PlanarGraph(points, edges)


# ---------------------------------------------------------------------------
# faces of the embedding (used by grid_hull)

class _HalfEdges:
    """Undirected half-edge structure with faces traced interior-on-left."""

    def __init__(self, g: PlanarGraph):
        self.g = g
        segs = g.undirected_segments()
        self.origin = np.empty(2 * len(segs), dtype=np.int64)
        self.target = np.empty(2 * len(segs), dtype=np.int64)
        for k, (a, b) in enumerate(segs):
            self.origin[2 * k], self.target[2 * k] = a, b
            self.origin[2 * k + 1], self.target[2 * k + 1] = b, a
        self.twin = np.arange(2 * len(segs)) ^ 1
        # rotation order at each vertex: CCW by angle
        order: dict[int, list[int]] = {}
        for h in range(len(self.origin)):
            order.setdefault(int(self.origin[h]), []).append(h)
        pts = g.points
        self._rot_pos = {}
        self._rot = {}
        for v, hs in order.items():
            hs.sort(key=lambda h: math.atan2((pts[self.target[h]] - pts[v]).imag,
                                             (pts[self.target[h]] - pts[v]).real))
            self._rot[v] = hs
            for pos, h in enumerate(hs):
                self._rot_pos[h] = pos
        self.next = np.empty_like(self.twin)
        for h in range(len(self.origin)):
            t = self.twin[h]
            v = int(self.origin[t])
            hs = self._rot[v]
            self.next[h] = hs[(self._rot_pos[t] - 1) % len(hs)]  # CW successor of reversed edge
        self.face = np.full(len(self.origin), -1, dtype=np.int64)
        self.face_cycles = []
        for h in range(len(self.origin)):
            if self.face[h] >= 0:
                continue
            fid = len(self.face_cycles)
            cyc = []
            k = h
            while self.face[k] < 0:
                self.face[k] = fid
                cyc.append(k)
                k = int(self.next[k])
            self.face_cycles.append(cyc)
        self.face_area = np.zeros(len(self.face_cycles))
        for fid, cyc in enumerate(self.face_cycles):
            a = 0.0
            for h in cyc:
                p, q = g.points[self.origin[h]], g.points[self.target[h]]
                a += p.real * q.imag - q.real * p.imag
            self.face_area[fid] = 0.5 * a
        self.outer_faces = set(np.where(self.face_area <= 0)[0])

    def faces_at_vertex(self, v: int):
        return {int(self.face[h]) for h in self._rot[v]}


def grid_hull(g: PlanarGraph, reachable, o_hat, v0=None, ve=None) -> "GridDomain":
    """Smallest grid domain whose interior contains every reachable vertex.

    The hull is a union of faces of the embedding incident to the reachable
    set, with enclosed holes filled so the result is simply connected; its
    boundary is traced through the rotation system.
    """
    reachable = sorted({int(v) for v in reachable})
    if not reachable:
        raise DomainError("reachable set is empty")
    rs = set(reachable)
    # connectivity in the underlying undirected graph
    adj: dict[int, set[int]] = {v: set() for v in reachable}
    for a, b in g.undirected_segments():
        if a in rs and b in rs:
            adj[a].add(b)
            adj[b].add(a)
    stack, seen = [reachable[0]], {reachable[0]}
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if seen != rs:
        raise DomainError("reachable set is not connected in the graph")

    he = _HalfEdges(g)
    selected = set()
    for v in reachable:
        fs = he.faces_at_vertex(v)
        if fs & he.outer_faces:
            raise DomainError("multiply connected hull: reachable vertex on the unbounded face")
        selected |= fs

    for _round in range(g.n_vertices):
        # fill holes: faces not reachable from the outer face through unselected faces
        unsel_reach = set(he.outer_faces)
        stack = list(he.outer_faces)
        while stack:
            f = stack.pop()
            for h in he.face_cycles[f]:
                nf = int(he.face[he.twin[h]])
                if nf not in selected and nf not in unsel_reach:
                    unsel_reach.add(nf)
                    stack.append(nf)
        selected |= {f for f in range(len(he.face_cycles))
                     if f not in selected and f not in unsel_reach}
        boundary_vertices = {int(he.origin[h]) for h in range(len(he.origin))
                             if he.face[h] in selected and he.face[he.twin[h]] not in selected}
        grow = rs & boundary_vertices
        if not grow:
            break
        for v in grow:
            fs = he.faces_at_vertex(v)
            if fs & he.outer_faces:
                raise DomainError("multiply connected hull: reachable vertex on the unbounded face")
            selected |= fs
    # trace boundary half-edges (selected face on the left)
    bhe = [h for h in range(len(he.origin))
           if he.face[h] in selected and he.face[he.twin[h]] not in selected]
    if not bhe:
        raise DomainError("hull has no boundary")
    nxt = {}
    by_origin: dict[int, list[int]] = {}
    for h in bhe:
        by_origin.setdefault(int(he.origin[h]), []).append(h)
    for h in bhe:
        v = int(he.target[h])
        outs = by_origin.get(v, [])
        if len(outs) == 1:
            nxt[h] = outs[0]
        else:
            # at a pinch vertex pick the boundary edge closest in CW rotation
            hs = he._rot[v]
            pos = he._rot_pos[int(he.twin[h])]
            for step in range(1, len(hs) + 1):
                cand = hs[(pos - step) % len(hs)]
                if cand in outs:
                    nxt[h] = cand
                    break
    start = bhe[0]
    cycle, k = [], start
    while True:
        cycle.append(int(he.origin[k]))
        k = nxt[k]
        if k == start:
            break
    if len(cycle) != len(bhe):
        raise DomainError("multiply connected hull")
    return GridDomain(g, cycle, o_hat, v0=v0, ve=ve)


# ---------------------------------------------------------------------------
# grid domain

class GridDomain:
    """Bounded simply connected domain whose boundary consists of graph edges.

    The boundary cycle is stored with the interior on the left (CCW); a
    vertex visited twice by the cycle is a slit vertex and owns one sector
    per visit.  Sectors are identified by their index in the cycle.
    """

    def __init__(self, graph: PlanarGraph, boundary_cycle, o_hat, v0=None, ve=None):
        self.graph = graph
        cycle = [int(v) for v in boundary_cycle]
        if len(cycle) >= 2 and cycle[0] == cycle[-1]:
            cycle = cycle[:-1]
        if len(cycle) < 3:
            raise DomainError("boundary cycle must contain at least 3 vertices")
        pts = graph.points
        for k in range(len(cycle)):
            a, b = cycle[k], cycle[(k + 1) % len(cycle)]
            if a == b:
                raise DomainError(f"boundary: repeated consecutive vertex {a}")
            if not graph.has_segment(a, b):
                raise DomainError(f"boundary: ({a},{b}) is not a graph edge")
        area = 0.0
        for k in range(len(cycle)):
            p, q = pts[cycle[k]], pts[cycle[(k + 1) % len(cycle)]]
            area += p.real * q.imag - q.real * p.imag
        if area < 0:
            cycle = cycle[::-1]
        self.boundary_cycle = cycle
        self.boundary_vertices = sorted(set(cycle))
        self._on_boundary = np.zeros(graph.n_vertices, dtype=bool)
        self._on_boundary[self.boundary_vertices] = True

        self.o_hat = complex(o_hat)
        if not self.contains_point(self.o_hat):
            raise DomainError("o_hat: reference point is not inside the domain")
        self.rho = self._min_boundary_distance(self.o_hat)
        if self.rho <= 0:
            raise DomainError("o_hat: reference point lies on the boundary")

        inside = self._winding_mask(pts)
        self.interior_mask = inside & ~self._on_boundary
        self.interior_vertices = np.where(self.interior_mask)[0]
        if len(self.interior_vertices) == 0:
            raise DomainError("domain has no interior vertices")

        self.v0_sector = None if v0 is None else self.resolve_sector(v0)
        self.ve_sector = None if ve is None else self.resolve_sector(ve)
        if self.v0_sector is not None and self.v0_sector == self.ve_sector:
            raise DomainError("v0 and ve must be distinct boundary sectors")
        self._sector_cache: dict[int, tuple] = {}

    # -- geometry ----------------------------------------------------------

    def boundary_points(self) -> np.ndarray:
        """Closed boundary polyline (first point repeated at the end)."""
        pts = self.graph.points[self.boundary_cycle]
        return np.append(pts, pts[0])

    def _winding_mask(self, zs) -> np.ndarray:
        poly = self.boundary_points()
        x, y = np.real(zs), np.imag(zs)
        inside = np.zeros(len(zs), dtype=bool)
        x0, y0 = poly[:-1].real, poly[:-1].imag
        x1, y1 = poly[1:].real, poly[1:].imag
        for k in range(len(x0)):
            cond = (y0[k] > y) != (y1[k] > y)
            if not cond.any():
                continue
            xin = x0[k] + (y - y0[k]) / (y1[k] - y0[k]) * (x1[k] - x0[k])
            inside ^= cond & (x < xin)
        return inside

    def contains_point(self, z) -> bool:
        return bool(self._winding_mask(np.array([complex(z)]))[0])

    def _min_boundary_distance(self, z) -> float:
        poly = self.boundary_points()
        return min(point_segment_distance(complex(z), poly[k], poly[k + 1])
                   for k in range(len(poly) - 1))

    def first_boundary_hit(self, z0, z1):
        """Smallest t in (0,1] with z0+t(z1-z0) on the boundary, or None."""
        poly = self.boundary_points()
        d = complex(z1) - complex(z0)
        best = None
        for k in range(len(poly) - 1):
            a, b = poly[k], poly[k + 1]
            e = b - a
            den = d.real * (-e.imag) - d.imag * (-e.real)
            if den == 0.0:
                continue
            rhs = a - complex(z0)
            t = (rhs.real * (-e.imag) - rhs.imag * (-e.real)) / den
            s = (d.real * rhs.imag - d.imag * rhs.real) / den
            if -1e-12 <= s <= 1 + 1e-12 and 1e-12 < t <= 1 + 1e-12:
                best = t if best is None else min(best, t)
        return best

    @property
    def in_radius(self) -> float:
        return self.rho

    @property
    def confinement_ratio(self) -> float:
        """max |z - o_hat| / rho over the boundary; the domain sits inside
        this multiple of rho around the reference point."""
        return float(np.max(np.abs(self.boundary_points() - self.o_hat)) / self.rho)

    # -- sectors (prime ends) ----------------------------------------------

    def resolve_sector(self, v) -> int:
        """Map a vertex id (or existing sector index given as ('sector', k))
        to its unique boundary-cycle index."""
        if isinstance(v, tuple) and len(v) == 2 and v[0] == "sector":
            k = int(v[1])
            if not 0 <= k < len(self.boundary_cycle):
                raise DomainError(f"sector index {k} out of range")
            return k
        v = int(v)
        hits = [k for k, u in enumerate(self.boundary_cycle) if u == v]
        if not hits:
            raise DomainError(f"vertex {v} is not on the boundary")
        if len(hits) > 1:
            raise DomainError(f"vertex {v} is a slit vertex; pass ('sector', k) explicitly")
        return hits[0]

    def sector_vertex(self, sector: int) -> int:
        return self.boundary_cycle[sector]

    def sector_interval(self, sector: int):
        """(theta_start, width): the open angular interval of directions at
        the sector's vertex that point into the domain, CCW from the
        outgoing boundary edge to the incoming one."""
        cyc = self.boundary_cycle
        L = len(cyc)
        v = cyc[sector]
        nxt = cyc[(sector + 1) % L]
        prv = cyc[(sector - 1) % L]
        pv = self.graph.points[v]
        th_next = math.atan2((self.graph.points[nxt] - pv).imag, (self.graph.points[nxt] - pv).real)
        th_prev = math.atan2((self.graph.points[prv] - pv).imag, (self.graph.points[prv] - pv).real)
        width = (th_prev - th_next) % (2 * math.pi)
        if width == 0.0:
            width = 2 * math.pi  # slit tip: prev and next coincide
        return th_next, width

    def sector_neighbors(self, sector: int) -> np.ndarray:
        """Interior out-neighbors of the sector's vertex whose edge
        direction lies strictly inside the sector (the walk's legal first
        steps from this prime end).  Ties with a boundary edge direction
        count as exits and are excluded."""
        cached = self._sector_cache.get(sector)
        if cached is not None:
            return cached
        v = self.sector_vertex(sector)
        th0, width = self.sector_interval(sector)
        out, _ = self.graph.out_edges(v)
        keep = []
        for y in out:
            y = int(y)
            if not self.interior_mask[y]:
                continue
            th = math.atan2((self.graph.points[y] - self.graph.points[v]).imag,
                            (self.graph.points[y] - self.graph.points[v]).real)
            rel = (th - th0) % (2 * math.pi)
            if 1e-12 < rel < width - 1e-12:
                keep.append(y)
        res = np.asarray(keep, dtype=np.int64)
        self._sector_cache[sector] = res
        return res

    def exit_sector(self, from_vertex: int, exit_vertex: int) -> int:
        """Sector of `exit_vertex` hit by the step from `from_vertex`.

        The incoming edge approaches the prime end whose angular interval
        contains the reversed direction."""
        hits = [k for k, u in enumerate(self.boundary_cycle) if u == exit_vertex]
        if not hits:
            raise DomainError(f"vertex {exit_vertex} is not on the boundary")
        if len(hits) == 1:
            return hits[0]
        back = math.atan2((self.graph.points[from_vertex] - self.graph.points[exit_vertex]).imag,
                          (self.graph.points[from_vertex] - self.graph.points[exit_vertex]).real)
        for k in hits:
            th0, width = self.sector_interval(k)
            rel = (back - th0) % (2 * math.pi)
            if 0.0 <= rel <= width:
                return k
        return hits[0]

    def exit_sector_table(self) -> np.ndarray:
        """Lookup D[slot] -> sector index for every directed graph edge that
        lands on the boundary (-1 elsewhere); slot is the CSR edge slot."""
        g = self.graph
        table = np.full(g.n_edges, -1, dtype=np.int64)
        for u in range(g.n_vertices):
            s, e = g.indptr[u], g.indptr[u + 1]
            for k in range(s, e):
                v = int(g.targets[k])
                if self._on_boundary[v]:
                    table[k] = self.exit_sector(u, v)
        return table

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        g = self.graph
        return {
            "vertices": [[z.real, z.imag] for z in g.points],
            "edges": [[int(u), int(g.targets[k]), float(g.weights[k])]
                      for u in range(g.n_vertices)
                      for k in range(g.indptr[u], g.indptr[u + 1])],
            "boundary": list(map(int, self.boundary_cycle)),
            "o_hat": [self.o_hat.real, self.o_hat.imag],
            "v0": int(self.sector_vertex(self.v0_sector)) if self.v0_sector is not None else None,
            "ve": int(self.sector_vertex(self.ve_sector)) if self.ve_sector is not None else None,
        }

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f)
            f.write("\n")


def load_domain(path_or_dict) -> GridDomain:
    """Load a domain file, validating every invariant; the first violation
    raises with the offending field in the message."""
    if isinstance(path_or_dict, dict):
        data = path_or_dict
    else:
        with open(path_or_dict) as f:
            data = json.load(f)
    for field in ("vertices", "edges", "boundary", "o_hat"):
        if field not in data:
            raise DomainError(f"domain file: missing field '{field}'")
    try:
        points = [complex(x, y) for x, y in data["vertices"]]
    except (TypeError, ValueError) as e:
        raise DomainError(f"domain file: field 'vertices': {e}") from None
    try:
        g = PlanarGraph(points, [(u, v, w) for u, v, w in data["edges"]])
    except GraphError as e:
        raise DomainError(f"domain file: field 'edges': {e}") from None
    rep = validate_planarity(g)
    if not rep.ok:
        raise DomainError(f"domain file: field 'edges': crossing segments {rep.crossings[0]}")
    try:
        ox, oy = data["o_hat"]
    except (TypeError, ValueError):
        raise DomainError("domain file: field 'o_hat' must be [x, y]") from None
    try:
        return GridDomain(g, data["boundary"], complex(ox, oy),
                          v0=data.get("v0"), ve=data.get("ve"))
    except DomainError as e:
        raise DomainError(f"domain file: {e}") from None


# ---------------------------------------------------------------------------
# queries

def in_radius(d: GridDomain) -> float:
    """Distance from the reference point to the boundary, exact for polylines."""
    return d._min_boundary_distance(d.o_hat)


def fineness_report(g: PlanarGraph, r: float):
    """(max edge length, max vertex gap) within the disc of radius r at 0.

    The gap is the largest empty-circle radius with center in the disc,
    computed from the Voronoi diagram of the covered vertices.
    """
    if r <= 0:
        raise GraphError("r must be positive")
    pts = g.points
    max_edge = 0.0
    for a, b in g.undirected_segments():
        if abs(pts[a]) <= r and abs(pts[b]) <= r:
            max_edge = max(max_edge, abs(pts[a] - pts[b]))
    from scipy.spatial import Voronoi, cKDTree

    near = pts[np.abs(pts) <= r + max(max_edge, 1.0)]
    xy = np.column_stack([near.real, near.imag])
    tree = cKDTree(xy)

    def gap_at(candidates):
        if len(candidates) == 0:
            return 0.0
        dd, _ = tree.query(candidates)
        return float(np.max(dd))

    best = 0.0
    if len(xy) >= 4:
        vor = Voronoi(xy)
        vv = vor.vertices
        inside = np.hypot(vv[:, 0], vv[:, 1]) <= r
        best = max(best, gap_at(vv[inside]))
        # circle boundary candidates: per-site antipodal points on |z| = r
        ang = np.arctan2(xy[:, 1], xy[:, 0])
        cand = np.column_stack([r * np.cos(ang + np.pi), r * np.sin(ang + np.pi)])
        best = max(best, gap_at(cand))
        th = np.linspace(0, 2 * np.pi, 720, endpoint=False)
        best = max(best, gap_at(np.column_stack([r * np.cos(th), r * np.sin(th)])))
    return max_edge, best


def lattice_disc_domain(radius: float, spacing: float = 1.0, center=0j,
                        v0_angle: float = 0.0, ve_angle: float = math.pi) -> GridDomain:
    """Grid domain hulling the lattice points of an open disc.

    Marked boundary vertices are the cycle vertices nearest the two given
    angles.  The resulting in-radius is within one spacing of `radius`.
    """
    c = complex(center)
    pad = 3 * spacing
    g = build_square_lattice(spacing, (c.real - radius - pad, c.imag - radius - pad,
                                       c.real + radius + pad, c.imag + radius + pad))
    reachable = np.where(np.abs(g.points - c) < radius)[0]
    d = grid_hull(g, reachable, c)
    d.v0_sector = _nearest_sector(d, c + radius * complex(math.cos(v0_angle), math.sin(v0_angle)))
    d.ve_sector = _nearest_sector(d, c + radius * complex(math.cos(ve_angle), math.sin(ve_angle)))
    if d.v0_sector == d.ve_sector:
        raise DomainError("v0 and ve collapsed to the same sector; enlarge the disc")
    return d


def _nearest_sector(d: GridDomain, z) -> int:
    pts = d.graph.points[d.boundary_cycle]
    return int(np.argmin(np.abs(pts - complex(z))))
