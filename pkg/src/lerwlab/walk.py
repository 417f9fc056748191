"""Random walks in grid domains: exit sampling, hitting distributions,
Doob h-transform, conditioned excursions, encompassing detection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels, rng as _rng
from .graph import DomainError, GridDomain, point_segment_distance

DIRECT_SOLVE_LIMIT = 200_000
_MAX_STEPS = 1 << 40


class WalkError(ValueError):
    pass


@dataclass
class WalkPath:
    """A sampled walk with its exit data.

    vertices[0] is the start; vertices[exit_index] is the first vertex whose
    incoming edge met the complement of the domain.
    """
    vertices: np.ndarray
    exit_index: int
    exit_crossing: complex | None = None
    start_sector: int | None = None
    exit_sector: int | None = None

    def points(self, graph) -> np.ndarray:
        return graph.points[self.vertices]


def verify_path(d: GridDomain, path: WalkPath) -> bool:
    """Re-check the WalkPath invariants against the domain: consecutive
    entries are edges, interior vertices stay interior, and exit_index is
    the first segment meeting the complement."""
    v = path.vertices
    if len(v) < 2 or path.exit_index != len(v) - 1 or path.exit_index < 1:
        return False
    g = d.graph
    for k in range(len(v) - 1):
        if g.p(int(v[k]), int(v[k + 1])) <= 0:
            return False
    for k in range(1, len(v) - 1):
        if not d.interior_mask[v[k]]:
            return False
    return not d.interior_mask[v[-1]]


# ---------------------------------------------------------------------------
# absorbing-chain fixture (duck-types the GridDomain surface walks need)

class AbsorbingFixture:
    """Absorbing chain on an arbitrary planar graph, for oracle tests that
    have no 2-d grid domain (e.g. gambler's-ruin corridors).  Sectors are
    identified with absorbing vertex ids."""

    def __init__(self, graph, interior_vertices, v0=None, ve=None):
        self.graph = graph
        self.interior_mask = np.zeros(graph.n_vertices, dtype=bool)
        self.interior_mask[list(map(int, interior_vertices))] = True
        self._on_boundary = ~self.interior_mask
        self.boundary_cycle = [int(v) for v in np.where(self._on_boundary)[0]]
        self.v0_sector = None if v0 is None else self.resolve_sector(v0)
        self.ve_sector = None if ve is None else self.resolve_sector(ve)

    def resolve_sector(self, v) -> int:
        if isinstance(v, tuple):
            v = v[1]
        v = int(v)
        if self.interior_mask[v]:
            raise DomainError(f"vertex {v} is not absorbing")
        return v

    def sector_vertex(self, sector: int) -> int:
        return int(sector)

    def sector_neighbors(self, sector: int) -> np.ndarray:
        out, _ = self.graph.out_edges(int(sector))
        return np.asarray([int(y) for y in out if self.interior_mask[y]], dtype=np.int64)

    def exit_sector(self, from_vertex: int, exit_vertex: int) -> int:
        return int(exit_vertex)

    def exit_sector_table(self) -> np.ndarray:
        g = self.graph
        table = np.full(g.n_edges, -1, dtype=np.int64)
        for u in range(g.n_vertices):
            for k in range(g.indptr[u], g.indptr[u + 1]):
                if self._on_boundary[g.targets[k]]:
                    table[k] = g.targets[k]
        return table


def corridor_fixture(n: int):
    """Path graph 0..n with symmetric 1/2 steps, absorbing at both ends;
    the gambler's-ruin oracle H(k, n) = k/n applies exactly."""
    from .graph import PlanarGraph

    pts = [complex(k, 0.0) for k in range(n + 1)]
    edges = [(0, 1, 1.0), (n, n - 1, 1.0)]
    for k in range(1, n):
        edges += [(k, k - 1, 0.5), (k, k + 1, 0.5)]
    g = PlanarGraph(pts, edges)
    return AbsorbingFixture(g, range(1, n), v0=0, ve=n)


# ---------------------------------------------------------------------------
# exact linear algebra on the absorbing chain

class AbsorbingSystem:
    """Walk killed on leaving a grid domain, optionally with extra blocked
    vertices (a growing slit path).  Wraps the (I - Q) system over the
    transient states; the factorization is cached and reused across
    right-hand sides."""

    def __init__(self, d: GridDomain, blocked=()):
        self.domain = d
        g = d.graph
        mask = d.interior_mask.copy()
        for b in blocked:
            mask[int(b)] = False
        self.transient_mask = mask
        self.transient = np.where(mask)[0]
        self.index = np.full(g.n_vertices, -1, dtype=np.int64)
        self.index[self.transient] = np.arange(len(self.transient))
        rows, cols, vals = [], [], []
        for u in self.transient:
            s, e = g.indptr[u], g.indptr[u + 1]
            for k in range(s, e):
                v = int(g.targets[k])
                if mask[v]:
                    rows.append(self.index[u])
                    cols.append(self.index[v])
                    vals.append(g.weights[k])
        n = len(self.transient)
        self.Q = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        self._lu = None
        self._lu_T = None

    def _solve(self, A_is_transpose: bool, rhs: np.ndarray) -> np.ndarray:
        n = self.Q.shape[0]
        A = (sp.identity(n, format="csc") - (self.Q.T if A_is_transpose else self.Q)).tocsc()
        if n <= DIRECT_SOLVE_LIMIT:
            if A_is_transpose:
                if self._lu_T is None:
                    self._lu_T = spla.splu(A)
                return self._lu_T.solve(rhs)
            if self._lu is None:
                self._lu = spla.splu(A)
            return self._lu.solve(rhs)
        x, info = spla.lgmres(A, rhs, rtol=1e-12, atol=1e-14, maxiter=10_000)
        if info != 0:
            raise WalkError("iterative solve did not converge")
        return x

    def start_weights(self, start) -> tuple[np.ndarray, np.ndarray]:
        """(vertices, weights) of the first step.  Interior vertex: itself
        with weight 1.  Boundary sector: its legal neighbor sites with the
        one-step probabilities (a sub-distribution; immediate exits carry
        no weight, matching the prime-end convention)."""
        d = self.domain
        if isinstance(start, (int, np.integer)) and d.interior_mask[int(start)]:
            return np.array([int(start)]), np.array([1.0])
        sector = d.resolve_sector(start)
        v = d.sector_vertex(sector)
        nbd = d.sector_neighbors(sector)
        nbd = nbd[self.transient_mask[nbd]]
        w = np.array([d.graph.p(v, int(y)) for y in nbd])
        return nbd, w

    def hit_probability(self, target_vertex: int) -> np.ndarray:
        """H(x, target) for every vertex x: probability of being absorbed
        exactly at target_vertex.  Entries are 0 off the transient set."""
        g = self.domain.graph
        n = len(self.transient)
        rhs = np.zeros(n)
        tv = int(target_vertex)
        for u in self.transient:
            s, e = g.indptr[u], g.indptr[u + 1]
            for k in range(s, e):
                if int(g.targets[k]) == tv and not self.transient_mask[tv]:
                    rhs[self.index[u]] += g.weights[k]
        h = self._solve(False, rhs)
        out = np.zeros(g.n_vertices)
        out[self.transient] = h
        return out

    def green_from(self, start) -> np.ndarray:
        """Expected visit counts before absorption, from an interior vertex
        or a boundary sector (sub-probability start over its neighbor
        sites)."""
        n = len(self.transient)
        rhs = np.zeros(n)
        verts, w = self.start_weights(start)
        for v, ww in zip(verts, w):
            rhs[self.index[int(v)]] += ww
        y = self._solve(True, rhs)
        out = np.zeros(self.domain.graph.n_vertices)
        out[self.transient] = y
        return out

    def absorption_distribution(self, start) -> dict[int, float]:
        """Map absorbing vertex -> probability, from `start` (interior
        vertex or boundary sector)."""
        g = self.domain.graph
        green = self.green_from(start)
        dist: dict[int, float] = {}
        for u in self.transient:
            gu = green[u]
            if gu == 0.0:
                continue
            s, e = g.indptr[u], g.indptr[u + 1]
            for k in range(s, e):
                v = int(g.targets[k])
                if not self.transient_mask[v]:
                    dist[v] = dist.get(v, 0.0) + gu * g.weights[k]
        return dist


def exact_hitting_distribution(d: GridDomain, u) -> dict[int, float]:
    """H_D(u, .) over boundary sectors by solving the absorbing chain.

    u may be an interior vertex id or a boundary sector spec.  Values sum
    to 1 within 1e-10 for interior starts (boundary-sector starts may leave
    deficit mass on the immediate exits, which are excluded by convention).
    """
    sysm = AbsorbingSystem(d)
    g = d.graph
    green = sysm.green_from(u)
    table = d.exit_sector_table()
    dist: dict[int, float] = {}
    for x in sysm.transient:
        gx = green[x]
        if gx == 0.0:
            continue
        s, e = g.indptr[x], g.indptr[x + 1]
        for k in range(s, e):
            if table[k] >= 0:
                dist[int(table[k])] = dist.get(int(table[k]), 0.0) + gx * g.weights[k]
            elif not sysm.transient_mask[int(g.targets[k])]:
                raise WalkError("walk can leave the domain outside its boundary sectors")
    total = sum(dist.values())
    if isinstance(u, (int, np.integer)) and d.interior_mask[int(u)] and abs(total - 1.0) > 1e-10:
        raise WalkError(f"hitting distribution sums to {total!r}; singular system")
    return dist


def hitting_distribution_to_json(dist: dict[int, float]) -> dict:
    return {str(k): v for k, v in sorted(dist.items())}


# ---------------------------------------------------------------------------
# h-transform and conditioned excursions

@dataclass
class ConditionedKernel:
    """Walk conditioned to exit the domain at the marked sector ve.

    h is the harmonic function x -> P[exit at ve]; the conditioned kernel is
    p(u,v) h(v)/h(u) on {h > 0}.  Sampling starts from v0's neighbor sites
    weighted by p(v0, y) h(y)."""
    domain: GridDomain
    ve_sector: int
    h: np.ndarray
    cdf: np.ndarray          # per-CSR-slot cumulative conditioned weights
    weights: np.ndarray      # conditioned weights per CSR slot
    absorbing: np.ndarray    # bool per vertex

    def start_distribution(self, v0) -> tuple[np.ndarray, np.ndarray]:
        d = self.domain
        sector = d.resolve_sector(v0)
        v = d.sector_vertex(sector)
        nbd = d.sector_neighbors(sector)
        w = np.array([d.graph.p(v, int(y)) * self.h[int(y)] for y in nbd])
        total = w.sum()
        if total <= 0.0:
            raise WalkError("unreachable target: h vanishes on the start's neighbor sites")
        return nbd, w / total


def h_transform(d: GridDomain, ve=None) -> ConditionedKernel:
    """Doob h-transform toward exiting at the sector ve."""
    ve_sector = d.ve_sector if ve is None else d.resolve_sector(ve)
    if ve_sector is None:
        raise DomainError("domain has no marked exit vertex ve")
    g = d.graph
    sysm = AbsorbingSystem(d)
    table = d.exit_sector_table()
    n = len(sysm.transient)
    rhs = np.zeros(n)
    for u in sysm.transient:
        s, e = g.indptr[u], g.indptr[u + 1]
        for k in range(s, e):
            if table[k] == ve_sector:
                rhs[sysm.index[u]] += g.weights[k]
    hvec = sysm._solve(False, rhs)
    h = np.zeros(g.n_vertices)
    h[sysm.transient] = hvec
    ve_vertex = d.sector_vertex(ve_sector)

    weights = np.zeros_like(g.weights)
    for u in sysm.transient:
        hu = h[u]
        if hu <= 0.0:
            continue
        s, e = g.indptr[u], g.indptr[u + 1]
        for k in range(s, e):
            v = int(g.targets[k])
            if sysm.transient_mask[v] and h[v] > 0.0:
                weights[k] = g.weights[k] * h[v] / hu
            elif table[k] == ve_sector:
                weights[k] = g.weights[k] / hu
        rs = weights[s:e].sum()
        if abs(rs - 1.0) > 1e-10:
            raise WalkError(f"conditioned row at vertex {u} sums to {rs!r}")
    cdf = weights.copy()
    for u in sysm.transient:
        s, e = g.indptr[u], g.indptr[u + 1]
        if h[u] > 0.0:
            cdf[s:e] = np.cumsum(cdf[s:e])
            cdf[e - 1] = 1.0 + 1e-15
    absorbing = np.zeros(g.n_vertices, dtype=bool)
    absorbing[ve_vertex] = True
    h[ve_vertex] = 1.0
    return ConditionedKernel(d, ve_sector, h, cdf, weights, absorbing)


def _conditioned(d: GridDomain, ve=None) -> ConditionedKernel:
    key = d.ve_sector if ve is None else d.resolve_sector(ve)
    cache = getattr(d, "_cond_cache", None)
    if cache is None:
        cache = {}
        d._cond_cache = cache
    if key not in cache:
        cache[key] = h_transform(d, ("sector", key))
    return cache[key]


def sample_excursion(d: GridDomain, rng=0, v0=None, ve=None) -> WalkPath:
    """Excursion from the boundary sector v0 conditioned to exit at ve;
    interior strictly inside the domain, terminal vertex always ve."""
    ck = _conditioned(d, ve)
    v0_sector = d.v0_sector if v0 is None else d.resolve_sector(v0)
    if v0_sector is None:
        raise DomainError("domain has no marked entry vertex v0")
    gen = _rng.generator(rng)
    nbd, w = ck.start_distribution(("sector", v0_sector))
    first = int(gen.choice(nbd, p=w))
    seed = int(gen.integers(0, 2**32 - 1))
    g = d.graph
    size = 1 << 12
    while True:
        buf = np.empty(size, dtype=np.int64)
        m = _kernels.sample_path(g.indptr, g.targets, ck.cdf, ck.absorbing, first, seed, buf)
        if m > 0:
            break
        size *= 4
    verts = np.concatenate([[d.sector_vertex(v0_sector)], buf[:m]])
    return WalkPath(verts, len(verts) - 1,
                    exit_crossing=complex(g.points[verts[-1]]),
                    start_sector=v0_sector, exit_sector=ck.ve_sector)


# ---------------------------------------------------------------------------
# sampling to exit

def run_to_exit(d: GridDomain, start, rng=0) -> WalkPath:
    """Walk under the ambient kernel until the traversed edge meets the
    complement of the domain.  For boundary-sector starts the exit time is
    1 unless the first step enters the sector's neighbor sites."""
    g = d.graph
    gen = _rng.generator(rng)
    absorbing = ~d.interior_mask
    if isinstance(start, (int, np.integer)) and d.interior_mask[int(start)]:
        first = int(start)
        prefix = [first]
    else:
        sector = d.resolve_sector(start)
        v = d.sector_vertex(sector)
        targets, weights = g.out_edges(v)
        k = int(gen.choice(len(targets), p=weights))
        s1 = int(targets[k])
        nbd = set(int(y) for y in d.sector_neighbors(sector))
        if s1 not in nbd:
            return WalkPath(np.array([v, s1]), 1,
                            exit_crossing=complex(g.points[v]), start_sector=sector,
                            exit_sector=d.exit_sector(v, s1) if d._on_boundary[s1] else None)
        first = s1
        prefix = [v, first]
    seed = int(gen.integers(0, 2**32 - 1))
    size = 1 << 12
    while True:
        buf = np.empty(size, dtype=np.int64)
        m = _kernels.sample_path(g.indptr, g.targets, g.cdf, absorbing, first, seed, buf)
        if m > 0:
            break
        size *= 4
    verts = np.concatenate([prefix[:-1], buf[:m]]).astype(np.int64)
    exit_v = int(verts[-1])
    return WalkPath(verts, len(verts) - 1,
                    exit_crossing=complex(g.points[exit_v]),
                    start_sector=prefix[0] if len(prefix) > 1 else None,
                    exit_sector=d.exit_sector(int(verts[-2]), exit_v))


def batch_exit_slots(d: GridDomain, starts: np.ndarray, seed: int,
                     workers: int = 1) -> np.ndarray:
    """CSR slot of the absorbing step for a batch of interior starts,
    deterministic in (starts, seed, workers)."""
    g = d.graph
    absorbing = ~d.interior_mask
    edge_absorbing = np.zeros(g.n_edges, dtype=bool)
    parts = np.array_split(np.arange(len(starts)), max(1, workers))
    seeds = _rng.substream_seeds(seed, len(parts))
    out = np.empty(len(starts), dtype=np.int64)
    for part, s in zip(parts, seeds):
        if len(part) == 0:
            continue
        slots, _ = _kernels.absorb_batch(g.indptr, g.targets, g.cdf, absorbing,
                                         edge_absorbing, starts[part], s, _MAX_STEPS)
        out[part] = slots
    if (out < 0).any():
        raise WalkError("walk exceeded the step budget")
    return out


def mc_hit_probability(d: GridDomain, start, K, N: int, rng=0,
                       workers: int = 1) -> tuple[float, float]:
    """Monte Carlo estimate of P[exit through K] with binomial standard
    error.  K is a set of boundary sectors (or boundary vertex ids)."""
    if N < 1:
        raise WalkError("N must be >= 1")
    sectors = set()
    for k in K:
        if isinstance(k, tuple):
            sectors.add(d.resolve_sector(k))
        else:
            hits = [i for i, u in enumerate(d.boundary_cycle) if u == int(k)]
            sectors.update(hits if hits else [d.resolve_sector(k)])
    gen = _rng.generator(rng)
    g = d.graph
    if isinstance(start, (int, np.integer)) and d.interior_mask[int(start)]:
        starts = np.full(N, int(start), dtype=np.int64)
        prefix_hits = 0
        n_eff = N
    else:
        sector = d.resolve_sector(start)
        v = d.sector_vertex(sector)
        targets, weights = g.out_edges(v)
        firsts = gen.choice(len(targets), size=N, p=weights)
        nbd = set(int(y) for y in d.sector_neighbors(sector))
        starts_list, prefix_hits = [], 0
        for kk in firsts:
            s1 = int(targets[kk])
            if s1 in nbd:
                starts_list.append(s1)
            elif d._on_boundary[s1] and d.exit_sector(v, s1) in sectors:
                prefix_hits += 1
        starts = np.asarray(starts_list, dtype=np.int64)
        n_eff = N
    hits = prefix_hits
    if len(starts):
        slots = batch_exit_slots(d, starts, int(gen.integers(0, 2**32 - 1)), workers)
        table = d.exit_sector_table()
        hit_sectors = table[slots]
        hits += int(sum(1 for s in hit_sectors if int(s) in sectors))
    p = hits / n_eff
    se = math.sqrt(max(p * (1.0 - p), 0.0) / n_eff)
    return p, se


# ---------------------------------------------------------------------------
# encompassing detection

def _segment_in_region(region, z0, z1) -> bool:
    if region is None:
        return True
    for t in (0.0, 0.5, 1.0):
        if not region.contains_point(z0 + t * (z1 - z0)):
            return False
    return True


def detect_encompass(path, a, r: float, region=None) -> bool:
    """Does the curve encompass the disc of radius r at a inside `region`?

    True iff some subloop gamma[s,s'] with gamma(s) = gamma(s') stays in the
    region, keeps distance >= r from a, the whole prefix gamma[0,s'] stays
    in the region, and the argument of gamma(t)-a sweeps exactly +-2pi.
    """
    if r <= 0:
        raise WalkError("r must be positive")
    a = complex(a)
    if isinstance(path, WalkPath):
        raise WalkError("pass plane points: WalkPath.points(graph)")
    pts = np.asarray(path, dtype=np.complex128)
    if len(pts) < 3:
        return False
    nseg = len(pts) - 1
    prefix_in = np.empty(nseg + 1, dtype=bool)
    prefix_in[0] = region is None or region.contains_point(pts[0])
    for k in range(nseg):
        prefix_in[k + 1] = prefix_in[k] and _segment_in_region(region, pts[k], pts[k + 1])
    away = np.array([point_segment_distance(a, pts[k], pts[k + 1]) >= r for k in range(nseg)])
    bad_count = np.concatenate([[0], np.cumsum(~away)])
    rel = pts - a
    inc = np.zeros(nseg)
    nz = (rel[:-1] != 0) & (rel[1:] != 0)
    inc[nz] = np.angle(rel[1:][nz] / rel[:-1][nz])
    prefix_angle = np.concatenate([[0.0], np.cumsum(inc)])

    anchors: dict[complex, list[int]] = {}
    for idx, z in enumerate(pts):
        anchors.setdefault(complex(z), []).append(idx)
    two_pi = 2 * math.pi
    for occ in anchors.values():
        if len(occ) < 2:
            continue
        for ii in range(len(occ)):
            for jj in range(ii + 1, len(occ)):
                i, j = occ[ii], occ[jj]
                if not prefix_in[j]:
                    continue
                if bad_count[j] - bad_count[i] > 0:
                    continue
                if abs(pts[i] - a) < r:
                    continue
                w = prefix_angle[j] - prefix_angle[i]
                if abs(abs(w) - two_pi) < 1e-6:
                    return True
    return False


# ---------------------------------------------------------------------------
# CSV dump

def path_to_csv(path: WalkPath, graph, fname) -> None:
    pts = path.points(graph)
    with open(fname, "w") as f:
        f.write("step,vertex_x,vertex_y\n")
        for k, z in enumerate(pts):
            f.write(f"{k},{z.real:.17g},{z.imag:.17g}\n")
