import json

import numpy as np
import pytest

from lerwlab.graph import (
    DomainError, GraphError, GridDomain, PlanarGraph, build_square_lattice,
    fineness_report, grid_hull, in_radius, lattice_disc_domain, load_domain,
    point_segment_distance, validate_planarity,
)


def test_lattice_counts():
    g = build_square_lattice(1.0, (-2, -2, 2, 2))
    assert g.n_vertices == 25
    center = g.find_vertex(0j)
    targets, weights = g.out_edges(center)
    assert len(targets) == 4
    assert np.allclose(weights, 0.25)
    assert abs(weights.sum() - 1.0) < 1e-12


def test_lattice_row_stochastic_everywhere():
    g = build_square_lattice(0.5, (-1, -1, 2, 3))
    for u in range(g.n_vertices):
        _, w = g.out_edges(u)
        assert abs(w.sum() - 1.0) <= 1e-12


def test_degenerate_bbox():
    with pytest.raises(GraphError, match="degenerate region"):
        build_square_lattice(1.0, (0, 0, 0, 1))


def test_lattice_planar():
    g = build_square_lattice(1.0, (-3, -3, 3, 3))
    assert validate_planarity(g).ok


def test_crossing_detected():
    # segments [0, 1+i] and [1, i] cross at (1/2, 1/2)
    pts = [0j, 1 + 1j, 1 + 0j, 1j]
    edges = [(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0)]
    g = PlanarGraph(pts, edges)
    rep = validate_planarity(g)
    assert not rep.ok
    assert len(rep.crossings) == 1


def test_triangle_fan_shared_endpoint_ok():
    pts = [0j, 1 + 0j, 1 + 1j, 1j, -1 + 1j]
    edges = []
    for k in range(1, 5):
        edges.append((0, k, 0.25))
        edges.append((k, 0, 1.0))
    g = PlanarGraph(pts, edges)
    assert validate_planarity(g).ok


def test_collinear_overlap_flagged():
    # [0,2] overlaps [1,3] along the x axis
    pts = [0j, 2 + 0j, 1 + 0j, 3 + 0j]
    edges = [(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0)]
    g = PlanarGraph(pts, edges)
    assert not validate_planarity(g).ok


def test_randomized_crossing_injection():
    rng = np.random.default_rng(11)
    base = build_square_lattice(1.0, (0, 0, 6, 6))
    pts = list(base.points)
    for trial in range(20):
        # a random long chord crossing lattice edges transversally
        a = complex(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7))
        b = a + complex(rng.uniform(2.1, 3.6), rng.uniform(1.2, 2.9))
        edges = [(u, int(base.targets[k]), base.weights[k])
                 for u in range(base.n_vertices)
                 for k in range(base.indptr[u], base.indptr[u + 1])]
        n0 = len(pts)
        g = PlanarGraph(pts + [a, b], edges + [(n0, n0 + 1, 1.0), (n0 + 1, n0, 1.0)])
        assert not validate_planarity(g).ok


def test_grid_hull_disc():
    d = lattice_disc_domain(5.0)
    assert 4.0 <= d.rho <= 5.0
    # oracle: exact min over boundary segments of point-to-segment distance
    poly = d.boundary_points()
    oracle = min(point_segment_distance(0j, poly[k], poly[k + 1])
                 for k in range(len(poly) - 1))
    assert abs(in_radius(d) - oracle) <= 1e-9
    reach = np.where(np.abs(d.graph.points) < 5.0)[0]
    assert set(reach) <= set(d.interior_vertices)


def test_grid_hull_single_vertex():
    g = build_square_lattice(1.0, (-2, -2, 2, 2))
    c = g.find_vertex(0j)
    d = grid_hull(g, [c], 0j)
    assert list(d.interior_vertices) == [c]
    assert len(d.boundary_cycle) == 8  # perimeter of the 2x2 cell block
    assert d.rho == 1.0


def test_grid_hull_disconnected():
    g = build_square_lattice(1.0, (-4, -4, 4, 4))
    a = g.find_vertex(-3 - 3j)
    b = g.find_vertex(3 + 3j)
    with pytest.raises(DomainError):
        grid_hull(g, [a, b], 0j)


def test_in_radius_square():
    g = build_square_lattice(0.5, (-1.5, -1.5, 1.5, 1.5))
    cyc = [g.find_vertex(complex(x, y)) for x, y in
           [(0.5, 0.5), (0, 0.5), (-0.5, 0.5), (-0.5, 0), (-0.5, -0.5),
            (0, -0.5), (0.5, -0.5), (0.5, 0)]]
    d = GridDomain(g, cyc, 0j)
    assert abs(d.rho - 0.5) < 1e-12
    d2 = GridDomain(g, cyc, 0.4 + 0j)
    assert abs(d2.rho - 0.1) < 1e-12


def test_in_radius_disc_10():
    d = lattice_disc_domain(10.0)
    assert 9.0 <= in_radius(d) <= 10.0
    # brute force over densely sampled boundary points
    poly = d.boundary_points()
    samples = []
    for k in range(len(poly) - 1):
        for t in np.linspace(0, 1, 64):
            samples.append(poly[k] + t * (poly[k + 1] - poly[k]))
    brute = np.min(np.abs(np.asarray(samples)))
    assert in_radius(d) <= brute + 1e-12
    assert in_radius(d) >= brute - 1e-3


def test_fineness_lattice():
    g = build_square_lattice(1.0, (-20, -20, 20, 20))
    max_edge, gap = fineness_report(g, 15.0)
    assert max_edge == 1.0
    assert gap <= np.sqrt(2) / 2 + 1e-9
    g2 = build_square_lattice(0.25, (-4, -4, 4, 4))
    max_edge2, _ = fineness_report(g2, 3.0)
    assert abs(max_edge2 - 0.25) < 1e-12


def test_confinement_ratio_reported():
    d = lattice_disc_domain(6.0)
    assert 1.0 <= d.confinement_ratio <= 1.6


def test_json_roundtrip(tmp_path):
    d = lattice_disc_domain(4.0)
    p = tmp_path / "dom.json"
    d.save(p)
    d2 = load_domain(p)
    assert d2.boundary_cycle == d.boundary_cycle
    assert np.array_equal(d2.interior_vertices, d.interior_vertices)
    assert d2.rho == d.rho
    assert d2.v0_sector == d.v0_sector and d2.ve_sector == d.ve_sector


def test_loader_rejects_bad_fields(tmp_path):
    d = lattice_disc_domain(4.0)
    data = d.to_json()
    bad = dict(data)
    bad["o_hat"] = [100.0, 100.0]
    with pytest.raises(DomainError, match="o_hat"):
        load_domain(bad)
    bad = dict(data)
    bad["edges"] = [[0, 1, 2.0]] + data["edges"][1:]
    with pytest.raises(DomainError, match="edges"):
        load_domain(bad)
    bad = dict(data)
    del bad["boundary"]
    with pytest.raises(DomainError, match="boundary"):
        load_domain(bad)


def test_sector_neighbors_interior_only():
    d = lattice_disc_domain(5.0)
    for sector in (d.v0_sector, d.ve_sector):
        for y in d.sector_neighbors(sector):
            assert d.interior_mask[y]


def test_slit_cycle_sectors():
    # square with an inward slit: the shared vertex carries two sectors
    g = build_square_lattice(1.0, (-3, -3, 3, 3))
    ids = {(x, y): g.find_vertex(complex(x, y)) for x in range(-2, 3) for y in range(-2, 3)}
    ring = [(2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (-1, 2), (-2, 2), (-2, 1),
            (-2, 0), (-2, -1), (-2, -2), (-1, -2), (0, -2), (1, -2), (2, -2), (2, -1)]
    cyc = [ids[p] for p in ring]
    # insert slit from (2,0) to (1,0) and back
    k = ring.index((2, 0))
    cyc = cyc[:k + 1] + [ids[(1, 0)]] + [ids[(2, 0)]] + cyc[k + 1:]
    d = GridDomain(g, cyc, -1 + 0j)
    occurrences = [i for i, v in enumerate(d.boundary_cycle) if v == ids[(2, 0)]]
    assert len(occurrences) == 2
    with pytest.raises(DomainError, match="slit"):
        d.resolve_sector(ids[(2, 0)])
    tip = d.resolve_sector(ids[(1, 0)])
    th0, width = d.sector_interval(tip)
    assert abs(width - 2 * np.pi) < 1e-12
    nbrs = set(map(int, d.sector_neighbors(tip)))
    assert nbrs == {ids[(1, 1)], ids[(0, 0)], ids[(1, -1)]}
