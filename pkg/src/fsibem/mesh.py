"""Uniform tetrahedral meshes of the cube [-1,1]^3 and their boundary.

Each grid cell is split into five tetrahedra (one central, four corner
tets); neighbouring cells use the mirrored split so shared faces carry
matching diagonals and the mesh stays conforming.  Node and cell
orderings are lexicographic in (x, y, z) so that every downstream
matrix is reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MeshTopologyError(RuntimeError):
    """Raised when a mesh fails a structural sanity check."""


# Local corner indices (a, b, c) of the two mirrored five-tet splits of a
# cell.  Vertices are addressed by their offset within the cell.
_TETS_EVEN = [
    ((0, 0, 0), (1, 1, 0), (1, 0, 1), (0, 1, 1)),  # central
    ((1, 0, 0), (0, 0, 0), (1, 1, 0), (1, 0, 1)),
    ((0, 1, 0), (0, 0, 0), (1, 1, 0), (0, 1, 1)),
    ((0, 0, 1), (0, 0, 0), (1, 0, 1), (0, 1, 1)),
    ((1, 1, 1), (1, 1, 0), (1, 0, 1), (0, 1, 1)),
]
_TETS_ODD = [
    ((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1)),  # central
    ((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)),
    ((1, 1, 0), (1, 0, 0), (0, 1, 0), (1, 1, 1)),
    ((1, 0, 1), (1, 0, 0), (0, 0, 1), (1, 1, 1)),
    ((0, 1, 1), (0, 1, 0), (0, 0, 1), (1, 1, 1)),
]

_TET_FACES = ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1))


@dataclass
class VolumeMesh:
    """Tetrahedral mesh of the cube.

    nodes: (N_o, 3) coordinates; tets: (N_tet, 4) node indices with
    positive signed volume; n: subdivisions per edge; h: maximal
    element diameter.
    """

    nodes: np.ndarray
    tets: np.ndarray
    n: int
    h: float = field(default=0.0)

    def __post_init__(self):
        if self.h == 0.0 and len(self.tets):
            self.h = mesh_size(self)

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]


@dataclass
class SurfaceMesh:
    """Boundary triangulation induced by a :class:`VolumeMesh`.

    triangles: (N_tri, 3) volume-node indices, oriented so the normal
    points out of the solid; boundary_node_map: surface-node index ->
    volume-node index (ascending in volume index, hence lexicographic
    in coordinates).
    """

    triangles: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    boundary_node_map: np.ndarray
    nodes: np.ndarray  # coordinates of all volume nodes (shared array)
    volume_to_surface: dict = field(default_factory=dict)

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.boundary_node_map.shape[0]

    @property
    def tri_surface_nodes(self) -> np.ndarray:
        """Triangle connectivity in surface-node numbering, (N_tri, 3)."""
        lookup = np.full(self.nodes.shape[0], -1, dtype=int)
        lookup[self.boundary_node_map] = np.arange(self.num_nodes)
        return lookup[self.triangles]

    def diameter(self) -> float:
        """Largest node-to-node distance on the surface."""
        pts = self.nodes[self.boundary_node_map]
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        return float(np.linalg.norm(hi - lo))


def build_cube_mesh(n: int) -> VolumeMesh:
    """Mesh [-1,1]^3 with (n+1)^3 nodes and 5*n^3 tetrahedra.

    Cells alternate between the two mirrored five-tet splits by the
    parity of their integer coordinates, which keeps the mesh
    conforming.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"subdivision count must be a positive integer, got {n!r}")
    if (n + 1) ** 3 > 2**31:
        raise ValueError(f"node count overflow for n={n}")

    ticks = np.linspace(-1.0, 1.0, n + 1)
    # lexicographic in (x, y, z): x is the major axis
    X, Y, Z = np.meshgrid(ticks, ticks, ticks, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def nid(ix, iy, iz):
        return (ix * (n + 1) + iy) * (n + 1) + iz

    tets = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                pattern = _TETS_EVEN if (i + j + k) % 2 == 0 else _TETS_ODD
                for loc in pattern:
                    tets.append([nid(i + a, j + b, k + c) for (a, b, c) in loc])
    tets = np.asarray(tets, dtype=int)

    # enforce positive orientation (swap last two vertices if needed)
    p = nodes[tets]
    vol6 = np.einsum(
        "ij,ij->i",
        np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]),
        p[:, 3] - p[:, 0],
    )
    flip = vol6 < 0
    tets[flip] = tets[flip][:, [0, 1, 3, 2]]

    return VolumeMesh(nodes=nodes, tets=tets, n=int(n))


def tet_volumes(mesh: VolumeMesh) -> np.ndarray:
    """Signed volumes of all tetrahedra."""
    p = mesh.nodes[mesh.tets]
    return np.einsum(
        "ij,ij->i",
        np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]),
        p[:, 3] - p[:, 0],
    ) / 6.0


def mesh_size(mesh: VolumeMesh) -> float:
    """Maximal element diameter (largest vertex-pair distance per tet)."""
    if len(mesh.tets) == 0:
        raise ValueError("empty mesh")
    p = mesh.nodes[mesh.tets]
    hmax = 0.0
    for a in range(4):
        for b in range(a + 1, 4):
            d = np.linalg.norm(p[:, a] - p[:, b], axis=1)
            hmax = max(hmax, float(d.max()))
    return hmax


def extract_boundary(mesh: VolumeMesh) -> SurfaceMesh:
    """Collect the tet faces on the domain boundary with outward normals.

    A face belongs to the boundary exactly when it occurs in a single
    tetrahedron; any face shared by three or more tets means the mesh
    is broken.
    """
    faces = {}
    for t_idx, tet in enumerate(mesh.tets):
        for f in _TET_FACES:
            tri = (tet[f[0]], tet[f[1]], tet[f[2]])
            key = tuple(sorted(tri))
            if key in faces:
                if faces[key] is None:
                    raise MeshTopologyError(f"face {key} shared by more than two tets")
                faces[key] = None  # interior
            else:
                faces[key] = (tri, t_idx)

    tris = []
    tri_owner = []
    for key, val in faces.items():
        if val is not None:
            tris.append(val[0])
            tri_owner.append(val[1])
    if not tris:
        raise MeshTopologyError("mesh has no boundary faces")

    triangles = np.asarray(tris, dtype=int)
    owners = np.asarray(tri_owner, dtype=int)

    # orient each triangle so its normal points away from the owning tet
    p = mesh.nodes[triangles]
    normals = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    areas = 0.5 * np.linalg.norm(normals, axis=1)
    if np.any(areas < 1e-15):
        raise MeshTopologyError("degenerate boundary triangle")
    normals = normals / (2.0 * areas)[:, None]

    owner_tets = mesh.tets[owners]
    centroids_tet = mesh.nodes[owner_tets].mean(axis=1)
    centroids_tri = p.mean(axis=1)
    inward = np.einsum("ij,ij->i", normals, centroids_tri - centroids_tet) < 0
    triangles[inward] = triangles[inward][:, [0, 2, 1]]
    normals[inward] *= -1.0

    # deterministic ordering: sort triangles by their sorted node triple
    order = np.lexsort(np.sort(triangles, axis=1).T[::-1])
    triangles = triangles[order]
    normals = normals[order]
    areas = areas[order]

    bnodes = np.unique(triangles)
    vol2surf = {int(v): s for s, v in enumerate(bnodes)}

    surf = SurfaceMesh(
        triangles=triangles,
        normals=normals,
        areas=areas,
        boundary_node_map=bnodes,
        nodes=mesh.nodes,
        volume_to_surface=vol2surf,
    )
    _check_boundary_closed(surf)
    return surf


def _check_boundary_closed(surf: SurfaceMesh) -> None:
    """Every boundary edge must be shared by exactly two triangles."""
    edges = {}
    for tri in surf.triangles:
        for a, b in ((0, 1), (1, 2), (2, 0)):
            key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
            edges[key] = edges.get(key, 0) + 1
    bad = [k for k, c in edges.items() if c != 2]
    if bad:
        raise MeshTopologyError(f"boundary not watertight at edges {bad[:5]}")


def write_vtk(path, mesh: VolumeMesh, surf: SurfaceMesh | None = None, point_data=None) -> None:
    """Dump the mesh in legacy VTK ASCII (tets as cell 10, triangles as 5).

    point_data: optional dict name -> array of shape (N_o,) or (N_o, 3).
    """
    cells = [tuple(t) for t in mesh.tets]
    types = [10] * len(cells)
    if surf is not None:
        cells += [tuple(t) for t in surf.triangles]
        types += [5] * surf.num_triangles

    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("fsibem mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.num_nodes} double\n")
        for x, y, z in mesh.nodes:
            fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
        total = sum(len(c) + 1 for c in cells)
        fh.write(f"CELLS {len(cells)} {total}\n")
        for c in cells:
            fh.write(" ".join(str(v) for v in (len(c),) + c) + "\n")
        fh.write(f"CELL_TYPES {len(cells)}\n")
        for t in types:
            fh.write(f"{t}\n")
        if point_data:
            fh.write(f"POINT_DATA {mesh.num_nodes}\n")
            for name, arr in point_data.items():
                arr = np.asarray(arr)
                if arr.ndim == 1:
                    fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                    for v in arr:
                        fh.write(f"{v:.17g}\n")
                else:
                    fh.write(f"VECTORS {name} double\n")
                    for row in arr:
                        fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
