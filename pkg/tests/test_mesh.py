import numpy as np
import pytest

from chns_fem.errors import MeshError
from chns_fem.mesh import Mesh, build_structured_mesh, refine_uniform, vertices_on_rect_boundary


def test_structured_counts():
    mesh = build_structured_mesh(4, 3)

    assert mesh.num_vertices == 5 * 4
    assert mesh.num_triangles == 2 * 4 * 3
    assert mesh.euler_characteristic() == 1
    assert len(mesh.boundary_edges) == 2 * (4 + 3)
    assert len(mesh.boundary_vertices) == 2 * (4 + 3)


def test_area_and_orientation():
    mesh = build_structured_mesh(3, 5, rect=(-1.0, 0.0, 2.0, 0.5))

    assert np.all(mesh.areas > 0)
    assert mesh.area == pytest.approx(1.5, rel=1e-14)


def test_h_max_is_longest_edge():
    mesh = build_structured_mesh(8, 8)
    assert mesh.h_max == pytest.approx(np.sqrt(2) / 8)


def test_boundary_vertices_match_rectangle():
    mesh = build_structured_mesh(6, 6)
    np.testing.assert_array_equal(mesh.boundary_vertices, vertices_on_rect_boundary(mesh))


def test_refine_halves_h_and_quadruples_triangles():
    mesh    = build_structured_mesh(2, 2)
    refined = refine_uniform(mesh)

    assert refined.num_triangles == 4 * mesh.num_triangles
    assert refined.num_vertices == mesh.num_vertices + mesh.num_edges
    assert refined.h_max == pytest.approx(mesh.h_max / 2)
    assert refined.area == pytest.approx(mesh.area)
    assert refined.euler_characteristic() == 1
    np.testing.assert_allclose(refined.vertices[mesh.num_vertices:], mesh.edge_midpoints)


def test_triangle_edges_are_consistent():
    mesh = build_structured_mesh(3, 3)
    tri, edges = mesh.triangles, mesh.edges

    for k, (i, j) in enumerate([(0, 1), (1, 2), (2, 0)]):
        expected = np.sort(tri[:, [i, j]], axis=1)
        np.testing.assert_array_equal(edges[mesh.triangle_edges[:, k]], expected)


@pytest.mark.parametrize('nx, ny', [(0, 1), (1, -2), (2.5, 2)])
def test_rejects_bad_counts(nx, ny):
    with pytest.raises(MeshError):
        build_structured_mesh(nx, ny)


def test_rejects_degenerate_rectangle():
    with pytest.raises(MeshError):
        build_structured_mesh(2, 2, rect=(0.0, 0.0, 0.0, 1.0))


def test_rejects_clockwise_triangle():
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(MeshError):
        Mesh(vertices, np.array([[0, 2, 1]]))


def test_fingerprint_tracks_content():
    assert build_structured_mesh(3, 3).fingerprint == build_structured_mesh(3, 3).fingerprint
    assert build_structured_mesh(3, 3).fingerprint != build_structured_mesh(3, 4).fingerprint
