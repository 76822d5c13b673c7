"""P1 finite-element matrices for linear elastodynamics on tets.

All element integrals are exact closed forms: gradients of hat
functions are constant per tetrahedron, so stiffness entries reduce to
volume-weighted products of gradients and mass entries to the standard
(1 + delta_ij) factors.  Vector degrees of freedom are ordered
component-major, dof = 3*node + component, everywhere in this package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from fsibem.mesh import SurfaceMesh, VolumeMesh, tet_volumes


class AssemblyError(RuntimeError):
    """Raised when element geometry makes assembly impossible."""


@dataclass(frozen=True)
class MaterialParams:
    """Lame constants in units where wave speed and densities are 1."""

    lam: float = 4.0 / 3.0
    mu: float = 4.0 / 3.0

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError(f"shear modulus must be nonnegative, got {self.mu}")
        if 3.0 * self.lam + 2.0 * self.mu < 0:
            raise ValueError("3*lam + 2*mu must be nonnegative")

    @property
    def pressure_speed(self) -> float:
        return float(np.sqrt(self.lam + 2.0 * self.mu))


@dataclass
class CouplingBlocks:
    """Interior matrices plus the FEM-BEM trace couplings.

    stiffness, mass: 3N_o x 3N_o; boundary_mass: N_s' x N_s';
    trace_coupling C: N_s' x 3N_o with C[a, 3j+nu] = int_G xi_a n_nu eta_j.
    The block system uses C in the scalar test row and C^T in the
    vector test row.
    """

    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    boundary_mass: sp.csr_matrix
    trace_coupling: sp.csr_matrix
    material: MaterialParams


def _hat_gradients(p):
    """Constant gradients of the four hat functions on tets, (T, 4, 3)."""
    e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0], p[:, 3] - p[:, 0]], axis=1)
    vol6 = np.einsum("tj,tj->t", np.cross(e[:, 0], e[:, 1]), e[:, 2])
    ginv = np.linalg.inv(e)  # columns are grads of barycentric coords 1..3
    g = np.transpose(ginv, (0, 2, 1))
    g0 = -g.sum(axis=1, keepdims=True)
    return np.concatenate([g0, g], axis=1), vol6 / 6.0


def assemble_lame_stiffness(mesh: VolumeMesh, mat: MaterialParams) -> sp.csr_matrix:
    """Stiffness A[(i,nu),(j,mu)] = int sigma(eta_i e_nu) : eps(eta_j e_mu)."""
    vols = tet_volumes(mesh)
    if np.any(vols < 1e-14):
        raise AssemblyError("degenerate tetrahedron (volume < 1e-14)")
    p = mesh.nodes[mesh.tets]
    grads, vols = _hat_gradients(p)

    lam, mu = mat.lam, mat.mu
    # block[t, i, nu, j, mu] = vol*(lam*g_i,nu*g_j,mu + mu*g_i,mu*g_j,nu
    #                               + mu*delta(nu,mu)*g_i.g_j)
    gg = np.einsum("tid,tjd->tij", grads, grads)
    blk = lam * np.einsum("tia,tjb->tiajb", grads, grads)
    blk += mu * np.einsum("tib,tja->tiajb", grads, grads)
    blk += mu * np.einsum("tij,ab->tiajb", gg, np.eye(3))
    blk *= vols[:, None, None, None, None]

    rows = 3 * mesh.tets[:, :, None, None, None] + np.arange(3)[None, None, :, None, None]
    cols = 3 * mesh.tets[:, None, None, :, None] + np.arange(3)[None, None, None, None, :]
    rows, cols = np.broadcast_arrays(rows, cols)
    ndof = 3 * mesh.num_nodes
    A = sp.coo_matrix(
        (blk.ravel(), (rows.ravel(), cols.ravel())), shape=(ndof, ndof)
    ).tocsr()
    A.sum_duplicates()
    return _symmetrize(A)


def _symmetrize(A: sp.csr_matrix) -> sp.csr_matrix:
    """Restore exact symmetry lost to duplicate-summation order."""
    return ((A + A.T) * 0.5).tocsr()


def assemble_mass(mesh: VolumeMesh) -> sp.csr_matrix:
    """Vector mass matrix, block-diagonal over components."""
    vols = tet_volumes(mesh)
    if np.any(vols < 1e-14):
        raise AssemblyError("degenerate tetrahedron (volume < 1e-14)")
    local = (np.ones((4, 4)) + np.eye(4)) / 20.0
    blk = vols[:, None, None] * local[None, :, :]

    data, rows, cols = [], [], []
    for c in range(3):
        rows.append((3 * mesh.tets[:, :, None] + c + np.zeros((1, 1, 4), dtype=int)).ravel())
        cols.append((3 * mesh.tets[:, None, :] + c + np.zeros((1, 4, 1), dtype=int)).ravel())
        data.append(blk.ravel())
    ndof = 3 * mesh.num_nodes
    M = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ndof, ndof),
    ).tocsr()
    M.sum_duplicates()
    return _symmetrize(M)


def assemble_boundary_mass(surf: SurfaceMesh) -> sp.csr_matrix:
    """Surface mass int_G xi_i xi_j over the boundary triangulation."""
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    tri_s = surf.tri_surface_nodes
    blk = surf.areas[:, None, None] * local[None, :, :]
    rows = np.repeat(tri_s[:, :, None], 3, axis=2).ravel()
    cols = np.repeat(tri_s[:, None, :], 3, axis=1).ravel()
    ns = surf.num_nodes
    I = sp.coo_matrix((blk.ravel(), (rows, cols)), shape=(ns, ns)).tocsr()
    I.sum_duplicates()
    return _symmetrize(I)


def assemble_trace_coupling(mesh: VolumeMesh, surf: SurfaceMesh) -> sp.csr_matrix:
    """Coupling C[a, 3j+nu] = int_G xi_a (n . e_nu) eta_j ds.

    Columns belonging to interior volume nodes are identically zero;
    per flat triangle the normal is constant and the hat product
    integrates to area*(1+delta)/12.
    """
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    tri_s = surf.tri_surface_nodes
    vals = (surf.areas[:, None, None, None] * local[None, :, :, None]
            * surf.normals[:, None, None, :])
    rows = np.broadcast_to(tri_s[:, :, None, None], vals.shape).ravel()
    cols = (3 * surf.triangles[:, None, :, None]
            + np.arange(3)[None, None, None, :]
            + np.zeros((1, 3, 1, 1), dtype=int)).ravel()
    C = sp.coo_matrix(
        (vals.ravel(), (rows, cols)), shape=(surf.num_nodes, 3 * mesh.num_nodes)
    ).tocsr()
    C.sum_duplicates()
    return C


def assemble_coupling_blocks(mesh: VolumeMesh, surf: SurfaceMesh, mat: MaterialParams) -> CouplingBlocks:
    return CouplingBlocks(
        stiffness=assemble_lame_stiffness(mesh, mat),
        mass=assemble_mass(mesh),
        boundary_mass=assemble_boundary_mass(surf),
        trace_coupling=assemble_trace_coupling(mesh, surf),
        material=mat,
    )


def rigid_motions(mesh: VolumeMesh) -> np.ndarray:
    """Six independent rigid-motion coefficient vectors, (6, 3N_o)."""
    x = mesh.nodes
    modes = []
    for c in range(3):
        v = np.zeros((mesh.num_nodes, 3))
        v[:, c] = 1.0
        modes.append(v.ravel())
    rots = [
        np.column_stack([-x[:, 1], x[:, 0], np.zeros(len(x))]),
        np.column_stack([-x[:, 2], np.zeros(len(x)), x[:, 0]]),
        np.column_stack([np.zeros(len(x)), -x[:, 2], x[:, 1]]),
    ]
    modes.extend(r.ravel() for r in rots)
    return np.asarray(modes)


def dump_coordinate_matrix(path, mat) -> None:
    """Write a sparse matrix as 'row col value' text, 17 significant digits."""
    coo = sp.coo_matrix(mat)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")
