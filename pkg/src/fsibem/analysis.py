"""Norms, errors, convergence rates, and exterior field evaluation.

Space norms of discrete functions are mass-matrix quadratic forms;
errors against analytic fields use element Gauss quadrature (conical
product on tets, Dunavant on triangles).  Space-time errors apply the
trapezoidal rule in time to the squared space norms.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from fsibem.mesh import SurfaceMesh, VolumeMesh
from fsibem.quadrature import triangle_rule


class NormError(RuntimeError):
    """Negative quadratic form: the supplied mass matrix is broken."""


def l2_space_norm(coeffs: np.ndarray, mass) -> float:
    """sqrt(c^T M c) for a coefficient vector and its mass matrix."""
    q = float(coeffs @ (mass @ coeffs))
    if q < -1e-12 * max(1.0, float(np.abs(coeffs).max()) ** 2):
        raise NormError(f"quadratic form is negative: {q}")
    return float(np.sqrt(max(q, 0.0)))


def tet_rule(order: int):
    """Conical-product Gauss rule on the reference tetrahedron.

    Returns barycentric coordinates (P, 4) and weights summing to 1.
    """
    n = max(2, (order + 2) // 2 + 1)
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    pts = []
    wts = []
    for a, wa in zip(x, w):
        for b, wb in zip(x, w):
            for c, wc in zip(x, w):
                # collapsed coordinates with Jacobian (1-a)^2 (1-b)
                xi = a
                eta = b * (1.0 - a)
                zeta = c * (1.0 - a) * (1.0 - b)
                pts.append((1.0 - xi - eta - zeta, xi, eta, zeta))
                wts.append(wa * wb * wc * (1.0 - a) ** 2 * (1.0 - b) * 6.0)
    pts = np.asarray(pts)
    wts = np.asarray(wts)
    return pts, wts / wts.sum()


def l2_volume_error(coeffs: np.ndarray, exact, mesh: VolumeMesh, t: float, order: int = 4) -> float:
    """L2(Omega) distance between a P1 vector field and an analytic one.

    coeffs: 3*N_o vector in component-major ordering; exact(x, t) maps
    (N, 3) points to (N, 3) values.
    """
    bary, w = tet_rule(order)
    verts = mesh.nodes[mesh.tets]                     # (T, 4, 3)
    pts = np.einsum("pc,tcd->tpd", bary, verts)       # (T, P, 3)
    vols = np.abs(
        np.einsum(
            "tj,tj->t",
            np.cross(verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0]),
            verts[:, 3] - verts[:, 0],
        )
        / 6.0
    )
    nodal = coeffs.reshape(-1, 3)
    uh = np.einsum("pc,tcd->tpd", bary, nodal[mesh.tets])
    ue = exact(pts.reshape(-1, 3), t).reshape(pts.shape)
    diff2 = ((uh - ue) ** 2).sum(axis=2)
    val = float(np.einsum("tp,p,t->", diff2, w, vols))
    return float(np.sqrt(max(val, 0.0)))


def l2_surface_error(coeffs: np.ndarray, exact, surf: SurfaceMesh, t: float, order: int = 4) -> float:
    """L2(Gamma) distance between a surface P1 function and an analytic one."""
    bary, w = triangle_rule(order)
    verts = surf.nodes[surf.triangles]
    pts = np.einsum("pc,tcd->tpd", bary, verts)
    nodal = coeffs[surf.tri_surface_nodes]            # (T, 3)
    uh = np.einsum("pc,tc->tp", bary, nodal)
    ue = exact(pts.reshape(-1, 3), t).reshape(pts.shape[:2])
    diff2 = (uh - ue) ** 2
    val = float(np.einsum("tp,p,t->", diff2, w, surf.areas))
    return float(np.sqrt(max(val, 0.0)))


def l2_volume_norm_exact(exact, mesh: VolumeMesh, t: float, order: int = 4) -> float:
    return l2_volume_error(np.zeros(3 * mesh.num_nodes), exact, mesh, t, order)


def l2_surface_norm_exact(exact, surf: SurfaceMesh, t: float, order: int = 4) -> float:
    return l2_surface_error(np.zeros(surf.num_nodes), exact, surf, t, order)


def convergence_rate(errors, hs) -> float:
    """Least-squares slope of log(error) against log(h)."""
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    if len(errors) < 2 or len(errors) != len(hs):
        raise ValueError("need at least two matching (error, h) samples")
    if np.any(errors <= 0) or np.any(hs <= 0):
        raise ValueError("errors and mesh sizes must be positive")
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])


def space_time_error(step_errors: np.ndarray, dt: float) -> float:
    """Trapezoid-in-time composition of per-step space errors.

    step_errors[n] is the space error at t_n for n = 0 .. N_t.
    """
    e2 = np.asarray(step_errors, dtype=float) ** 2
    weights = np.full(len(e2), 1.0)
    weights[0] = weights[-1] = 0.5
    return float(np.sqrt(dt * float(weights @ e2)))


# ---------------------------------------------------------------------------
# run report


@dataclass
class RunReport:
    """Per-step norms and errors plus the space-time summaries."""

    n: int
    h: float
    dt: float
    times: np.ndarray
    norm_u_h: np.ndarray
    norm_u_exact: np.ndarray
    norm_phi_h: np.ndarray
    norm_phi_exact: np.ndarray
    err_u: np.ndarray
    err_phi: np.ndarray
    st_err_u: float = 0.0
    st_err_phi: float = 0.0
    wall_clock: float = 0.0
    extra: dict = field(default_factory=dict)

    def finalize(self):
        self.st_err_u = space_time_error(self.err_u, self.dt)
        self.st_err_phi = space_time_error(self.err_phi, self.dt)
        return self

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(
                ["n", "t", "norm_u_h", "norm_u_exact", "norm_phi_h",
                 "norm_phi_exact", "err_u", "err_phi"]
            )
            for i, t in enumerate(self.times):
                wr.writerow(
                    [i, f"{t:.17g}", f"{self.norm_u_h[i]:.17g}",
                     f"{self.norm_u_exact[i]:.17g}", f"{self.norm_phi_h[i]:.17g}",
                     f"{self.norm_phi_exact[i]:.17g}", f"{self.err_u[i]:.17g}",
                     f"{self.err_phi[i]:.17g}"]
                )


def write_summary_csv(path, rows):
    """Summary table: one row per mesh level.

    rows: list of dicts with keys n, h, dt, st_err_u, st_err_phi,
    rate_u, rate_phi (rates may be nan for the first level).
    """
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["n", "h", "dt", "st_err_u", "st_err_phi", "rate_u", "rate_phi"])
        for row in rows:
            wr.writerow(
                [row["n"], f"{row['h']:.17g}", f"{row['dt']:.17g}",
                 f"{row['st_err_u']:.17g}", f"{row['st_err_phi']:.17g}",
                 f"{row['rate_u']:.17g}", f"{row['rate_phi']:.17g}"]
            )


# ---------------------------------------------------------------------------
# exterior field via the representation formula


def evaluate_exterior_field(x, t, history, surf: SurfaceMesh, dt: float,
                            order: int = 5, warn_distance: float | None = None) -> float:
    """Retarded-potential evaluation of the exterior field at one point.

    Combines the double and single layer potentials of the surface
    histories with the same space-time bases as the solver: piecewise
    linear in time (hat) for the densities, so the retarded time picks a
    linear interpolant and a piecewise-constant time derivative.
    """
    import warnings

    x = np.asarray(x, dtype=float)
    bary, w = triangle_rule(order)
    verts = surf.nodes[surf.triangles]
    pts = np.einsum("pc,tcd->tpd", bary, verts).reshape(-1, 3)
    wts = (w[None, :] * surf.areas[:, None]).ravel()
    nrm = np.repeat(surf.normals, len(w), axis=0)

    D = x[None, :] - pts
    r = np.linalg.norm(D, axis=1)
    mesh_h = np.sqrt(surf.areas.max() * 2.0)
    limit = warn_distance if warn_distance is not None else mesh_h
    if r.min() < limit:
        warnings.warn("evaluation point is close to the surface; accuracy degrades")

    tau = t - r                                    # retarded times
    nt = history.phi.shape[0] - 1
    idx = np.floor(tau / dt).astype(int)
    frac = tau / dt - idx

    phi_nodal = history.phi[:, surf.tri_surface_nodes]  # (N_t+1, T, 3)
    lam_nodal = history.lam[:, surf.tri_surface_nodes]

    def time_interp(nodal):
        """Density and its time derivative at retarded times, per point."""
        vals = np.einsum("ntc,pc->ntp", nodal, bary).reshape(nt + 1, -1)
        lo = np.clip(idx, 0, nt)
        hi = np.clip(idx + 1, 0, nt)
        ok = tau > 0
        v_lo = np.where(ok & (idx >= 0) & (idx <= nt), vals[lo, np.arange(vals.shape[1])], 0.0)
        v_hi = np.where(ok & (idx + 1 >= 0) & (idx + 1 <= nt), vals[hi, np.arange(vals.shape[1])], 0.0)
        dens = v_lo * (1.0 - frac) + v_hi * frac
        dens_dot = (v_hi - v_lo) / dt
        return dens, dens_dot

    phi_v, phi_dot = time_interp(phi_nodal)
    lam_v, _ = time_interp(lam_nodal)

    nyd = np.einsum("pd,pd->p", nrm, D)
    dlayer = nyd * (phi_v / r**3 + phi_dot / r**2) / (4.0 * np.pi)
    slayer = lam_v / (4.0 * np.pi * r)
    return float(((dlayer - slayer) * wts).sum())
