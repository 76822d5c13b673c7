import numpy as np
import pytest

from fsibem.elastic import (
    MaterialParams,
    assemble_boundary_mass,
    assemble_lame_stiffness,
    assemble_mass,
    assemble_trace_coupling,
    rigid_motions,
)
from fsibem.mesh import VolumeMesh, build_cube_mesh, extract_boundary

UNIT_TET = VolumeMesh(
    nodes=np.array([
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ]),
    tets=np.array([[0, 1, 2, 3]]),
    n=1,
)


def hat_values(verts, pts):
    """Barycentric coordinates of pts w.r.t. a tet, solved independently."""
    mat = np.vstack([verts.T, np.ones(4)])
    rhs = np.vstack([pts.T, np.ones(len(pts))])
    return np.linalg.solve(mat, rhs).T  # (npts, 4)


def mc_stiffness_oracle(verts, lam, mu, nsamp=2000, seed=7):
    """Monte-Carlo integral of sigma(eta_i e_nu):eps(eta_j e_mu).

    Gradients come from central finite differences of the hat values,
    independent of the closed-form assembly.
    """
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(4), size=nsamp)
    pts = w @ verts
    vol = abs(np.linalg.det(verts[1:] - verts[0])) / 6.0
    eps = 1e-6
    grads = np.zeros((nsamp, 4, 3))
    for d in range(3):
        dp = np.zeros(3)
        dp[d] = eps
        grads[:, :, d] = (hat_values(verts, pts + dp) - hat_values(verts, pts - dp)) / (2 * eps)

    K = np.zeros((12, 12))
    for i in range(4):
        for nu in range(3):
            for j in range(4):
                for mujj in range(3):
                    gu = np.zeros((nsamp, 3, 3))
                    gu[:, nu, :] = grads[:, i, :]
                    gw = np.zeros((nsamp, 3, 3))
                    gw[:, mujj, :] = grads[:, j, :]
                    eu = 0.5 * (gu + np.transpose(gu, (0, 2, 1)))
                    ew = 0.5 * (gw + np.transpose(gw, (0, 2, 1)))
                    div_u = np.trace(gu, axis1=1, axis2=2)
                    sig = lam * div_u[:, None, None] * np.eye(3) + 2 * mu * eu
                    val = np.einsum("pab,pab->p", sig, ew).mean() * vol
                    K[3 * i + nu, 3 * j + mujj] = val
    return K


def test_stiffness_single_tet_matches_quadrature_oracle():
    mat = MaterialParams(lam=0.0, mu=1.0)
    A = assemble_lame_stiffness(UNIT_TET, mat).toarray()
    K = mc_stiffness_oracle(UNIT_TET.nodes, 0.0, 1.0)
    assert np.max(np.abs(A - K)) < 5e-6  # FD step limits the oracle


def test_stiffness_kills_rigid_motions(mesh2):
    A = assemble_lame_stiffness(mesh2, MaterialParams(1.0, 1.0))
    modes = rigid_motions(mesh2)
    assert np.max(np.abs(A @ modes[0])) < 1e-12  # translation e1
    assert np.max(np.abs(A @ modes[3])) < 1e-10  # rotation (-y, x, 0)
    for m in modes:
        assert np.max(np.abs(A @ m)) < 1e-10


def test_stiffness_kernel_dimension_is_six(mesh1):
    A = assemble_lame_stiffness(mesh1, MaterialParams(1.0, 1.0)).toarray()
    eigvals = np.linalg.eigvalsh(A)
    assert np.sum(np.abs(eigvals) < 1e-10) == 6
    assert np.all(eigvals > -1e-10)


def test_stiffness_symmetric(mesh2):
    A = assemble_lame_stiffness(mesh2, MaterialParams(2.0, 0.5))
    assert (A - A.T).nnz == 0 or np.max(np.abs((A - A.T).data)) == 0.0


def test_mass_total_and_spd(mesh1, mesh2):
    M = assemble_mass(mesh2)
    assert abs(M.sum() - 24.0) < 1e-12  # 3 * |Omega|
    M1 = assemble_mass(mesh1).toarray()
    assert np.linalg.eigvalsh(M1).min() > 0
    assert np.max(np.abs(M1 - M1.T)) == 0.0


def test_mass_single_tet_matches_monte_carlo():
    M = assemble_mass(UNIT_TET).toarray()
    rng = np.random.default_rng(3)
    w = rng.dirichlet(np.ones(4), size=200_000)
    pts = w @ UNIT_TET.nodes
    vol = 1.0 / 6.0
    hats = hat_values(UNIT_TET.nodes, pts)
    ref = np.einsum("pi,pj->ij", hats, hats) / len(pts) * vol
    for i in range(4):
        for j in range(4):
            for c in range(3):
                assert abs(M[3 * i + c, 3 * j + c] - ref[i, j]) < 2e-3 * vol
    # closed form: vol/20 * (1 + delta)
    expected = vol / 20.0 * (np.ones((4, 4)) + np.eye(4))
    assert np.allclose(M[0::3, 0::3], expected, atol=1e-15)


def test_boundary_mass_totals_and_local_matrix(surf2):
    I = assemble_boundary_mass(surf2)
    assert abs(I.sum() - 24.0) < 1e-12
    assert np.max(np.abs((I - I.T).toarray())) == 0.0

    # single triangle of area a: local matrix a/12 * (2,1,1;1,2,1;1,1,2)
    tri = surf2.triangles[0]
    a = surf2.areas[0]
    # analytic oracle by 2D quadrature over the triangle in barycentric form
    rng = np.random.default_rng(11)
    w = rng.dirichlet(np.ones(3), size=200_000)
    ref = np.einsum("pi,pj->ij", w, w) / len(w) * a
    assert np.allclose(ref, a / 12.0 * (np.ones((3, 3)) + np.eye(3)), atol=2e-3 * a)


def test_trace_coupling_zero_interior_columns(mesh2, surf2):
    C = assemble_trace_coupling(mesh2, surf2).toarray()
    boundary = set(surf2.boundary_node_map.tolist())
    interior = [v for v in range(mesh2.num_nodes) if v not in boundary]
    assert interior, "n=2 mesh must have an interior node"
    for v in interior:
        assert np.max(np.abs(C[:, 3 * v : 3 * v + 3])) == 0.0


def test_trace_coupling_face_block_is_masked_surface_mass(mesh2, surf2):
    C = assemble_trace_coupling(mesh2, surf2).toarray()
    I = assemble_boundary_mass(surf2).toarray()
    # pick the face z = +1: triangles whose normal is e3
    on_top = np.where(np.abs(surf2.normals[:, 2] - 1.0) < 1e-14)[0]
    top_nodes = sorted({int(s) for t in on_top for s in surf2.tri_surface_nodes[t]})
    Itop = np.zeros_like(I)
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    for t in on_top:
        tre = surf2.tri_surface_nodes[t]
        for a in range(3):
            for b in range(3):
                Itop[tre[a], tre[b]] += surf2.areas[t] * local[a, b]
    for s_a in top_nodes:
        vol_j = surf2.boundary_node_map
        for s_b in top_nodes:
            col = 3 * vol_j[s_b]
            assert abs(C[s_a, col + 2] - Itop[s_a, s_b]) < 1e-13 or \
                abs(C[s_a, col + 2] - Itop[s_a, s_b]) < 1e-13
    # components 1,2 receive nothing from the top face
    assert np.max(np.abs(Itop)) > 0


def test_trace_coupling_row_sums(mesh2, surf2):
    # sum_a C[a, (j,nu)] = int_G eta_j n_nu ds, checked by direct quadrature
    C = assemble_trace_coupling(mesh2, surf2).toarray()
    sums = C.sum(axis=0).reshape(-1, 3)
    ref = np.zeros((mesh2.num_nodes, 3))
    for t in range(surf2.num_triangles):
        for local in range(3):
            j = surf2.triangles[t, local]
            ref[j] += surf2.areas[t] / 3.0 * surf2.normals[t]
    assert np.max(np.abs(sums - ref)) < 1e-13


def test_refinement_consistency_energy():
    # u smooth: u^T A u approaches the continuum elastic energy
    mat = MaterialParams(1.0, 1.0)

    def field(x):
        return np.column_stack([
            np.sin(np.pi * x[:, 0] / 2),
            x[:, 1] ** 2 / 4,
            np.zeros(len(x)),
        ])

    def energy(mesh):
        A = assemble_lame_stiffness(mesh, mat)
        u = field(mesh.nodes).ravel()
        return u @ (A @ u)

    # exact energy: int lam*div^2 + 2 mu eps:eps with
    # div = pi/2 cos(pi x/2) + y/2
    from scipy.integrate import tplquad

    def integrand(z, y, x):
        divu = np.pi / 2 * np.cos(np.pi * x / 2) + y / 2
        e11 = np.pi / 2 * np.cos(np.pi * x / 2)
        e22 = y / 2
        return 1.0 * divu**2 + 2.0 * (e11**2 + e22**2)

    exact, _ = tplquad(integrand, -1, 1, -1, 1, -1, 1, epsabs=1e-10)
    errs = [abs(energy(build_cube_mesh(n)) - exact) for n in (2, 4)]
    assert errs[1] < 0.4 * errs[0]


def test_material_validation():
    with pytest.raises(ValueError):
        MaterialParams(lam=0.0, mu=-1.0)
    with pytest.raises(ValueError):
        MaterialParams(lam=-10.0, mu=1.0)
    assert MaterialParams(4.0 / 3.0, 4.0 / 3.0).pressure_speed == pytest.approx(2.0)
