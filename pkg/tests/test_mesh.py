import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsibem.mesh import (
    MeshTopologyError,
    build_cube_mesh,
    extract_boundary,
    mesh_size,
    tet_volumes,
    VolumeMesh,
    write_vtk,
)


def test_counts_match_reported_figures():
    # published node counts for the coarse meshes, tet count at n=24
    assert build_cube_mesh(2).num_nodes == 27
    assert build_cube_mesh(4).num_nodes == 125
    assert build_cube_mesh(8).num_nodes == 729
    assert len(build_cube_mesh(1).tets) == 5
    assert build_cube_mesh(1).num_nodes == 8


@pytest.mark.slow
def test_n24_tet_count():
    assert len(build_cube_mesh(24).tets) == 69120


@given(n=st.integers(min_value=1, max_value=5))
@settings(max_examples=5, deadline=None)
def test_counts_formulae(n):
    mesh = build_cube_mesh(n)
    assert mesh.num_nodes == (n + 1) ** 3
    assert len(mesh.tets) == 5 * n**3
    surf = extract_boundary(mesh)
    assert surf.num_nodes == (n + 1) ** 3 - (n - 1) ** 3
    assert surf.num_triangles == 12 * n**2


def test_rejects_bad_subdivision():
    with pytest.raises(ValueError):
        build_cube_mesh(0)
    with pytest.raises(ValueError):
        build_cube_mesh(-3)


def test_volumes_positive_and_sum_to_cube(mesh2):
    vols = tet_volumes(mesh2)
    assert np.all(vols > 0)
    assert abs(vols.sum() - 8.0) < 1e-12


def test_conforming_no_orphan_faces():
    # every interior face must be shared by exactly two tets; the
    # extractor raises if any face appears three times
    for n in (1, 2, 3):
        extract_boundary(build_cube_mesh(n))


def test_mesh_size_values():
    assert abs(mesh_size(build_cube_mesh(2)) - np.sqrt(2)) < 1e-14
    h4 = mesh_size(build_cube_mesh(4))
    assert abs(mesh_size(build_cube_mesh(2)) - 2 * h4) < 1e-14
    # a single regular tet of edge 1
    nodes = np.array([
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.5, np.sqrt(3) / 2, 0.0],
        [0.5, np.sqrt(3) / 6, np.sqrt(6) / 3],
    ])
    tet = VolumeMesh(nodes=nodes, tets=np.array([[0, 1, 2, 3]]), n=1)
    assert abs(mesh_size(tet) - 1.0) < 1e-12


def test_boundary_areas_and_normals(surf2):
    assert abs(surf2.areas.sum() - 24.0) < 1e-12
    norms = np.linalg.norm(surf2.normals, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-14
    # outwardness: normal dot (centroid - cube center) > 0
    cent = surf2.nodes[surf2.triangles].mean(axis=1)
    assert np.all(np.einsum("ij,ij->i", surf2.normals, cent) > 0)


def test_boundary_node_map_injective(surf2):
    assert len(np.unique(surf2.boundary_node_map)) == surf2.num_nodes
    assert surf2.num_nodes == 26
    # n=1: everything sits on the boundary
    surf1 = extract_boundary(build_cube_mesh(1))
    assert surf1.num_nodes == 8


def test_boundary_edges_shared_by_two_triangles(surf2):
    edges = {}
    for tri in surf2.triangles:
        for a, b in ((0, 1), (1, 2), (2, 0)):
            key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
            edges[key] = edges.get(key, 0) + 1
    assert set(edges.values()) == {2}


def test_partition_of_unity_on_random_points(mesh2, rng):
    # barycentric coordinates of interior points sum to one
    p = mesh2.nodes[mesh2.tets]
    for t in rng.choice(len(mesh2.tets), size=10, replace=False):
        verts = p[t]
        w = rng.dirichlet(np.ones(4))
        x = w @ verts
        mat = np.vstack([verts.T, np.ones(4)])
        bary = np.linalg.lstsq(mat, np.append(x, 1.0), rcond=None)[0]
        assert abs(bary.sum() - 1.0) < 1e-13
        assert np.allclose(bary, w, atol=1e-12)


def test_surface_diameter(surf2):
    assert abs(surf2.diameter() - 2 * np.sqrt(3)) < 1e-14


def test_topology_error_on_broken_mesh():
    mesh = build_cube_mesh(1)
    # duplicate one tet: its faces now occur twice/thrice
    broken = VolumeMesh(
        nodes=mesh.nodes, tets=np.vstack([mesh.tets, mesh.tets[:1], mesh.tets[:1]]), n=1
    )
    with pytest.raises(MeshTopologyError):
        extract_boundary(broken)


def test_vtk_export(tmp_path, mesh1, surf1):
    path = tmp_path / "mesh.vtk"
    write_vtk(path, mesh1, surf1, point_data={"u": np.zeros((8, 3))})
    text = path.read_text().splitlines()
    assert text[0].startswith("# vtk DataFile")
    assert "CELL_TYPES 17" in "\n".join(text)  # 5 tets + 12 triangles
    types = text[text.index("CELL_TYPES 17") + 1 :][:17]
    assert types.count("10") == 5 and types.count("5") == 12
