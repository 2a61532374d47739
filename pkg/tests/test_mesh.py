import numpy as np
import pytest

from curladapt.mesh import (Mesh, bisect_refine, build_structured_unit_square,
                            edge_geometry, load_mesh, red_refine, save_mesh,
                            tag_regions)


def check_invariants(mesh):
    """Conformity, orientation, Euler characteristic and edge-sign
    consistency; used after every mesh operation."""
    assert (mesh.areas > 0).all()
    assert mesh.euler_characteristic() == 1
    counts = np.bincount(mesh.tri_edges.ravel(), minlength=mesh.num_edges)
    assert set(np.unique(counts)) <= {1, 2}
    interior = ~mesh.is_boundary_edge
    s0 = mesh.tri_edge_signs[mesh.edge_tris[interior, 0], mesh.edge_tri_local[interior, 0]]
    s1 = mesh.tri_edge_signs[mesh.edge_tris[interior, 1], mesh.edge_tri_local[interior, 1]]
    assert (s0 + s1 == 0).all()
    norms = np.linalg.norm(mesh.edge_normals, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-14)
    tangents = mesh.vertices[mesh.edges[:, 1]] - mesh.vertices[mesh.edges[:, 0]]
    assert np.abs((mesh.edge_normals * tangents).sum(1)).max() < 1e-12


def test_structured_counts_n4():
    mesh = build_structured_unit_square(4)
    assert mesh.num_triangles == 32
    assert mesh.num_vertices == 25
    assert mesh.num_edges == 56
    assert mesh.num_interior_edges == 40
    check_invariants(mesh)


def test_structured_counts_n1():
    mesh = build_structured_unit_square(1)
    assert (mesh.num_vertices, mesh.num_edges, mesh.num_triangles) == (4, 5, 2)
    assert mesh.euler_characteristic() == 1


def test_structured_rejects_zero():
    with pytest.raises(ValueError):
        build_structured_unit_square(0)


def test_structured_diagonal_direction():
    # each cell is split along the lower-left to upper-right diagonal
    mesh = build_structured_unit_square(2)
    diagonals = [tuple(mesh.vertices[v] for v in mesh.edges[e])
                 for e in range(mesh.num_edges)
                 if not np.isclose(mesh.edge_lengths[e], 0.5)]
    for a, b in diagonals:
        d = b - a
        assert d[0] * d[1] > 0  # slope +1, never -1


def test_constructor_rejects_bad_input():
    with pytest.raises(ValueError):
        Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 1]])  # repeated vertex
    with pytest.raises(ValueError):
        Mesh([[0, 0], [1, 0], [0, 1]], [[0, 2, 1]])  # clockwise
    with pytest.raises(ValueError):
        Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 3]])  # id out of range


def test_red_refine_counts_and_similarity():
    mesh = build_structured_unit_square(4)
    fine = red_refine(mesh)
    assert fine.num_triangles == 128
    check_invariants(fine)
    assert fine.diameters.max() == pytest.approx(np.sqrt(2) / 8, rel=0, abs=0)
    # every child has exactly half the parent diameter
    parent_diam = mesh.diameters[fine.parent_ids]
    assert np.array_equal(fine.diameters * 2, parent_diam)

    two = build_structured_unit_square(1)
    eight = red_refine(two)
    assert eight.num_triangles == 8
    assert np.array_equal(eight.diameters * 2, two.diameters[eight.parent_ids])


def test_red_refine_region_inheritance():
    mesh = build_structured_unit_square(4)
    mesh = tag_regions(mesh, lambda c: 1 if c[0] < 0.5 else 2)
    fine = red_refine(mesh)
    assert np.array_equal(fine.regions, mesh.regions[fine.parent_ids])
    assert (fine.regions == 1).sum() == 4 * (mesh.regions == 1).sum()


def test_bisect_empty_marking_is_identity():
    mesh = build_structured_unit_square(2)
    assert bisect_refine(mesh, set()) is mesh


def test_bisect_single_marked_on_two_triangle_square():
    mesh = build_structured_unit_square(1)
    fine = bisect_refine(mesh, {0})
    # both triangles share the diagonal refinement edge, so the closure
    # bisects both: four children
    assert fine.num_triangles in (3, 4)
    assert fine.num_triangles == 4
    check_invariants(fine)
    assert set(fine.parent_ids) == {0, 1}


def test_bisect_mark_all():
    mesh = build_structured_unit_square(2)
    fine = bisect_refine(mesh, set(range(mesh.num_triangles)))
    assert fine.num_triangles >= 2 * mesh.num_triangles
    check_invariants(fine)


def test_bisect_marked_elements_are_subdivided():
    mesh = build_structured_unit_square(4)
    marked = {0, 7, 21}
    fine = bisect_refine(mesh, marked)
    check_invariants(fine)
    for t in marked:
        assert (fine.parent_ids == t).sum() >= 2


def test_bisect_region_inheritance():
    mesh = tag_regions(build_structured_unit_square(4),
                       lambda c: 1 if c[0] < 0.5 else 2)
    fine = bisect_refine(mesh, {3, 11, 30})
    assert np.array_equal(fine.regions, mesh.regions[fine.parent_ids])


def test_bisect_rejects_bad_ids():
    mesh = build_structured_unit_square(2)
    with pytest.raises(ValueError):
        bisect_refine(mesh, {99})


def test_bisect_closure_depth_guard():
    mesh = build_structured_unit_square(4)
    with pytest.raises(RuntimeError):
        bisect_refine(mesh, {0}, max_closure_passes=0)


def test_bisect_chain_keeps_invariants():
    rng = np.random.default_rng(7)
    mesh = build_structured_unit_square(2)
    for _ in range(6):
        marked = set(rng.choice(mesh.num_triangles,
                                size=max(1, mesh.num_triangles // 4), replace=False))
        mesh = bisect_refine(mesh, marked)
        check_invariants(mesh)


def test_tag_regions():
    mesh = build_structured_unit_square(4)
    tagged = tag_regions(mesh, lambda c: 1)
    assert (tagged.regions == 1).all()
    split = tag_regions(mesh, lambda c: 1 if c[0] < 0.5 else 2)
    assert (split.regions == 1).sum() == 16
    assert (split.regions == 2).sum() == 16


def test_edge_geometry_lengths():
    mesh = build_structured_unit_square(4)
    lengths = sorted(set(np.round(mesh.edge_lengths, 12)))
    assert lengths == [0.25, pytest.approx(0.25 * np.sqrt(2))]
    axis_edge = int(np.nonzero(np.isclose(mesh.edge_lengths, 0.25))[0][0])
    h, n, t_plus, t_minus = edge_geometry(mesh, axis_edge)
    assert h == pytest.approx(0.25)


def test_edge_geometry_normal_convention():
    mesh = build_structured_unit_square(4)
    for edge_id in np.nonzero(~mesh.is_boundary_edge)[0][:10]:
        h, n, t_plus, t_minus = edge_geometry(mesh, int(edge_id))
        assert t_plus < t_minus
        direction = mesh.centroids[t_minus] - mesh.centroids[t_plus]
        assert n @ direction > 0  # points from T+ into T-
        tangent = mesh.vertices[mesh.edges[edge_id, 1]] - mesh.vertices[mesh.edges[edge_id, 0]]
        assert abs(n @ tangent) < 1e-14
        assert np.linalg.norm(n) == pytest.approx(1.0)


def test_edge_geometry_boundary():
    mesh = build_structured_unit_square(2)
    boundary = int(np.nonzero(mesh.is_boundary_edge)[0][0])
    h, n, t_plus, t_minus = edge_geometry(mesh, boundary)
    assert t_minus is None
    with pytest.raises(ValueError):
        edge_geometry(mesh, mesh.num_edges)


def test_refinement_edge_initialization_longest_edge():
    mesh = build_structured_unit_square(4)
    # all elements are right isosceles: the refinement edge is the diagonal
    ref_edge = mesh.tri_edges[np.arange(mesh.num_triangles), mesh.refinement_edges]
    assert np.allclose(mesh.edge_lengths[ref_edge], 0.25 * np.sqrt(2))


def test_mesh_views():
    mesh = build_structured_unit_square(2)
    tri = mesh.triangle(0)
    assert tri.id == 0 and len(tri.vertex_ids) == 3
    edge = mesh.edge(0)
    assert edge.id == 0 and len(edge.adjacent_triangles) in (1, 2)
    vert = mesh.vertex(3)
    assert vert.id == 3 and vert.x.shape == (2,)


def test_mesh_immutable():
    mesh = build_structured_unit_square(2)
    with pytest.raises(ValueError):
        mesh.vertices[0, 0] = 5.0


def test_save_load_roundtrip(tmp_path):
    mesh = tag_regions(build_structured_unit_square(3),
                       lambda c: 1 if c[0] < 1 / 3 else 2)
    path = tmp_path / "mesh.txt"
    save_mesh(mesh, path)
    header = path.read_text().splitlines()[0].split()
    assert [int(t) for t in header] == [mesh.num_vertices, mesh.num_edges,
                                        mesh.num_triangles]
    loaded = load_mesh(path)
    assert np.array_equal(loaded.vertices, mesh.vertices)
    assert np.array_equal(loaded.triangles, mesh.triangles)
    assert np.array_equal(loaded.regions, mesh.regions)


def test_load_rejects_inconsistent_header(tmp_path):
    mesh = build_structured_unit_square(2)
    path = tmp_path / "mesh.txt"
    save_mesh(mesh, path)
    lines = path.read_text().splitlines()
    lines[0] = f"{mesh.num_vertices} {mesh.num_edges + 3} {mesh.num_triangles}"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError):
        load_mesh(path)
