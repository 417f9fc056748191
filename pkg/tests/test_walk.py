import heapq
import math

import numpy as np
import pytest
from scipy.stats import chi2

from lerwlab.graph import GridDomain, build_square_lattice, grid_hull
from lerwlab.walk import (
    AbsorbingSystem, WalkError, corridor_fixture, detect_encompass,
    exact_hitting_distribution, h_transform, mc_hit_probability, run_to_exit,
    sample_excursion, verify_path,
)


def square_domain(half, spacing=1.0):
    g = build_square_lattice(spacing, (-half - 2, -half - 2, half + 2, half + 2))
    reach = [i for i, z in enumerate(g.points)
             if abs(z.real) < half and abs(z.imag) < half]
    return grid_hull(g, reach, 0j,
                     v0=g.find_vertex(complex(half, 0)),
                     ve=g.find_vertex(complex(-half, 0)))


# ---------------------------------------------------------------------------
# exact hitting distributions

def test_corridor_gamblers_ruin_exact():
    n = 9
    d = corridor_fixture(n)
    for k in range(1, n):
        dist = exact_hitting_distribution(d, k)
        assert abs(dist[n] - k / n) <= 1e-10
        assert abs(dist[0] - (1 - k / n)) <= 1e-10
        assert abs(sum(dist.values()) - 1.0) <= 1e-10


def test_hitting_distribution_sums_to_one():
    d = square_domain(4)
    u = d.graph.find_vertex(1 + 1j)
    dist = exact_hitting_distribution(d, u)
    assert abs(sum(dist.values()) - 1.0) <= 1e-10


def test_hitting_reflection_symmetry():
    d = square_domain(3)
    u = d.graph.find_vertex(1 + 0j)  # on the mirror axis y -> -y
    dist = exact_hitting_distribution(d, u)
    pts = d.graph.points
    by_pos = {}
    for sector, p in dist.items():
        z = pts[d.sector_vertex(sector)]
        by_pos[(round(z.real, 9), round(z.imag, 9))] = p
    for (x, y), p in by_pos.items():
        assert abs(p - by_pos[(x, -y)]) <= 1e-10


# ---------------------------------------------------------------------------
# h-transform

def test_h_transform_corridor():
    d = corridor_fixture(2)
    ck = h_transform(d, 2)
    g = d.graph
    assert abs(ck.h[1] - 0.5) <= 1e-12
    # conditioned row at the single interior vertex
    s, e = g.indptr[1], g.indptr[1 + 1]
    row = {int(g.targets[k]): ck.weights[k] for k in range(s, e)}
    assert abs(row[2] - 1.0) <= 1e-12
    assert row[0] == 0.0


def test_h_transform_corridor_formula():
    n = 7
    d = corridor_fixture(n)
    ck = h_transform(d, n)
    g = d.graph
    for k in range(1, n):
        assert abs(ck.h[k] - k / n) <= 1e-12
    for k in range(2, n - 1):
        s, e = g.indptr[k], g.indptr[k + 1]
        row = {int(g.targets[j]): ck.weights[j] for j in range(s, e)}
        assert abs(row[k + 1] - (k + 1) / (2 * k)) <= 1e-12
        assert abs(row[k - 1] - (k - 1) / (2 * k)) <= 1e-12


def test_h_transform_rows_and_harmonicity():
    d = square_domain(3)
    ck = h_transform(d)
    g = d.graph
    for u in d.interior_vertices:
        s, e = g.indptr[u], g.indptr[u + 1]
        assert abs(ck.weights[s:e].sum() - 1.0) <= 1e-10
        targets = g.targets[s:e]
        acc = sum(g.weights[s + j] * ck.h[int(t)] for j, t in enumerate(targets))
        assert abs(acc - ck.h[u]) <= 1e-10


def test_h_transform_reflection_invariant():
    d = square_domain(3)
    ck = h_transform(d)
    g = d.graph
    idx = {(round(z.real, 9), round(z.imag, 9)): i for i, z in enumerate(g.points)}
    for u in d.interior_vertices:
        z = g.points[u]
        v = idx[(round(z.real, 9), round(-z.imag, 9))]
        assert abs(ck.h[u] - ck.h[v]) <= 1e-10


def test_h_transform_unreachable():
    # a lattice-square corner has no interior neighbors, so conditioning on
    # exiting there leaves h identically zero
    d = square_domain(3)
    corner = d.graph.find_vertex(3 + 3j)
    ck = h_transform(d, corner)
    assert np.all(ck.h[d.interior_vertices] == 0.0)
    with pytest.raises(WalkError, match="unreachable"):
        ck.start_distribution(("sector", d.v0_sector))


# ---------------------------------------------------------------------------
# excursions

def test_excursion_endpoints_and_interior():
    d = square_domain(3)
    ve_vertex = d.sector_vertex(d.ve_sector)
    v0_vertex = d.sector_vertex(d.v0_sector)
    for seed in range(200):
        p = sample_excursion(d, seed)
        assert p.vertices[0] == v0_vertex
        assert p.vertices[-1] == ve_vertex
        assert all(d.interior_mask[v] for v in p.vertices[1:-1])
        assert verify_path(d, p)


def _enumerate_conditioned_paths(d, mass_tol=1e-6):
    """Exhaustive enumeration of conditioned-excursion paths by largest
    remaining mass until the residual is below mass_tol."""
    ck = h_transform(d)
    g = d.graph
    v0 = d.sector_vertex(d.v0_sector)
    ve = d.sector_vertex(d.ve_sector)
    nbd, w = ck.start_distribution(("sector", d.v0_sector))
    heap = []
    for y, pw in zip(nbd, w):
        heapq.heappush(heap, (-pw, (v0, int(y))))
    done = {}
    residual = 1.0
    while heap and residual > mass_tol:
        neg, path = heapq.heappop(heap)
        prob = -neg
        u = path[-1]
        if u == ve:
            done[path] = done.get(path, 0.0) + prob
            residual -= prob
            continue
        s, e = g.indptr[u], g.indptr[u + 1]
        for k in range(s, e):
            if ck.weights[k] > 0:
                heapq.heappush(heap, (-prob * ck.weights[k], path + (int(g.targets[k]),)))
    return done


def test_excursion_law_matches_enumeration():
    d = square_domain(2)  # 3x3 interior block
    law = _enumerate_conditioned_paths(d, 1e-6)
    n = 20000
    counts = {}
    for seed in range(n):
        p = sample_excursion(d, seed)
        key = tuple(map(int, p.vertices))
        counts[key] = counts.get(key, 0) + 1
    # chi-square against the enumerated law, pooling small cells
    cells = []
    other_p, other_o = 0.0, 0
    for key, prob in law.items():
        o = counts.pop(key, 0)
        if prob * n < 10:
            other_p += prob
            other_o += o
        else:
            cells.append((prob, o))
    other_o += sum(counts.values())
    other_p += max(1.0 - sum(p for p, _ in cells) - other_p, 0.0)
    cells.append((other_p, other_o))
    stat = sum((o - p * n) ** 2 / (p * n) for p, o in cells if p > 0)
    pval = chi2.sf(stat, len(cells) - 1)
    assert pval > 0.01


# ---------------------------------------------------------------------------
# run_to_exit

def test_run_to_exit_immediate():
    d = corridor_fixture(2)
    for seed in range(20):
        p = run_to_exit(d, 1, seed)
        assert p.exit_index == 1
        assert len(p.vertices) == 2


def test_run_to_exit_plus_symmetry():
    d = square_domain(3)
    center = d.graph.find_vertex(0j)
    n = 20000
    sides = {"E": 0, "N": 0, "W": 0, "S": 0}
    for seed in range(n):
        p = run_to_exit(d, center, seed)
        z = d.graph.points[p.vertices[-1]]
        ang = math.atan2(z.imag, z.real)
        if -math.pi / 4 < ang <= math.pi / 4:
            sides["E"] += 1
        elif math.pi / 4 < ang <= 3 * math.pi / 4:
            sides["N"] += 1
        elif -3 * math.pi / 4 < ang <= -math.pi / 4:
            sides["S"] += 1
        else:
            sides["W"] += 1
    stat = sum((c - n / 4) ** 2 / (n / 4) for c in sides.values())
    assert chi2.sf(stat, 3) > 0.01


def test_run_to_exit_gamblers_ruin_mc():
    n = 8
    d = corridor_fixture(n)
    k = 3
    p, se = mc_hit_probability(d, k, {n}, 20000, rng=5)
    assert abs(p - k / n) <= 3 * max(se, 1e-9)


# ---------------------------------------------------------------------------
# mc_hit_probability

def test_mc_whole_boundary():
    d = square_domain(2)
    K = set(range(len(d.boundary_cycle)))
    p, se = mc_hit_probability(d, d.graph.find_vertex(0j), {("sector", k) for k in K}, 500, rng=1)
    assert p == 1.0 and se == 0.0


def test_mc_matches_exact_random_domains():
    rng = np.random.default_rng(3)
    g = build_square_lattice(1.0, (-6, -6, 6, 6))
    for trial in range(5):
        # connected random blob: trace a short lattice walk
        z = complex(rng.integers(-2, 3), rng.integers(-2, 3))
        blob = {g.find_vertex(z)}
        for _ in range(12):
            z += [1, -1, 1j, -1j][rng.integers(0, 4)]
            z = complex(min(max(z.real, -3), 3), min(max(z.imag, -3), 3))
            blob.add(g.find_vertex(z))
        d = grid_hull(g, blob, complex(g.points[min(blob)]) + 0.5 + 0.5j)
        u = int(d.interior_vertices[0])
        dist = exact_hitting_distribution(d, u)
        sectors = sorted(dist)[: max(1, len(dist) // 3)]
        target = {("sector", s) for s in sectors}
        exact_p = sum(dist[s] for s in sectors)
        p, se = mc_hit_probability(d, u, target, 20000, rng=100 + trial)
        assert abs(p - exact_p) <= 4 * max(se, 1e-4)


# ---------------------------------------------------------------------------
# encompassing

class DiscRegion:
    def __init__(self, center, r):
        self.center, self.r = complex(center), float(r)

    def contains_point(self, z) -> bool:
        return abs(complex(z) - self.center) < self.r


def _octagon(center, radius):
    th = np.linspace(0, 2 * np.pi, 9)
    return center + radius * np.exp(1j * th)


def test_encompass_octagon():
    U = DiscRegion(0j, 10.0)
    loop = _octagon(0j, 2.0)
    assert detect_encompass(loop, 0j, 1.0, U)


def test_encompass_out_and_back():
    U = DiscRegion(0j, 10.0)
    path = np.array([3 + 0j, 5 + 0j, 3 + 0j])
    assert not detect_encompass(path, 0j, 1.0, U)


def test_encompass_corner_dip():
    # square loop around a, one corner pulled inside the r-disc
    U = DiscRegion(0j, 50.0)
    sq = np.array([2 + 2j, -2 + 2j, -2 - 2j, 0.5 - 0.5j, 2 - 2j, 2 + 2j])
    assert not detect_encompass(sq, 0j, 1.0, U)
    sq_ok = np.array([2 + 2j, -2 + 2j, -2 - 2j, 2 - 2j, 2 + 2j])
    assert detect_encompass(sq_ok, 0j, 1.0, U)


def test_encompass_needs_region_containment():
    U = DiscRegion(0j, 1.5)  # loop of radius 2 leaves U
    loop = _octagon(0j, 2.0)
    assert not detect_encompass(loop, 0j, 1.0, U)


def _winding_by_ray_crossings(pts, a):
    """Independent oracle: signed crossings of the ray {x > Re a, y = Im a}."""
    w = 0
    for z0, z1 in zip(pts[:-1], pts[1:]):
        y0, y1 = z0.imag - a.imag, z1.imag - a.imag
        if (y0 <= 0) == (y1 <= 0):
            continue
        t = y0 / (y0 - y1)
        x = z0.real + t * (z1.real - z0.real)
        if x > a.real:
            w += 1 if y1 > y0 else -1
    return w


def test_encompass_agrees_with_ray_oracle():
    from lerwlab.graph import point_segment_distance

    rng = np.random.default_rng(7)
    U = DiscRegion(0j, 100.0)
    for trial in range(300):
        n = int(rng.integers(4, 12))
        th = np.sort(rng.uniform(0, 2 * np.pi, n))
        rad = rng.uniform(1.2, 4.0, n)
        loop = np.append(rad * np.exp(1j * th), rad[0] * np.exp(1j * th[0]))
        if rng.random() < 0.5:
            loop = loop[::-1]
        got = detect_encompass(loop, 0j, 1.0, U)
        seg_min = min(point_segment_distance(0j, loop[k], loop[k + 1])
                      for k in range(len(loop) - 1))
        want = seg_min >= 1.0 and \
            abs(_winding_by_ray_crossings(loop, 0j)) == 1
        assert got == want, (trial, got, want)
