"""Exact solution pair and the incident-wave data derived from it.

The interior displacement is a plane pressure pulse travelling along
x_1 with speed 2,

    u_1(x, t) = sin(pi (t - x_1/2))^5  on  1 < t - x_1/2 < 3,

zero otherwise and in the other components; it solves the interior
elastic wave equation exactly when lam + 2 mu = 4.  The exterior field
is the outgoing spherical pulse

    v(x, t) = (|x| - t)/(2 |x|) (1 + cos(pi (|x| - t)/0.9))  on  ||x|-t| < 0.9.

Both windows open only after t = 0 on their domains, so the quiescent
initial conditions hold.  The incident traces follow from the two
transmission conditions; all derivatives are hand-derived closed forms
(the tests cross-check them against central finite differences).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fsibem.elastic import MaterialParams
from fsibem.mesh import SurfaceMesh
from fsibem.quadrature import triangle_rule

_GAMMA = np.pi / 0.9


def _pulse(tau):
    """sin(pi tau)^5 windowed to 1 < tau < 3, vectorized."""
    tau = np.asarray(tau, dtype=float)
    w = (tau > 1.0) & (tau < 3.0)
    s = np.sin(np.pi * tau)
    return np.where(w, s**5, 0.0)


def _pulse_dt(tau):
    tau = np.asarray(tau, dtype=float)
    w = (tau > 1.0) & (tau < 3.0)
    s = np.sin(np.pi * tau)
    c = np.cos(np.pi * tau)
    return np.where(w, 5.0 * np.pi * s**4 * c, 0.0)


def exact_u(x, t):
    """Interior displacement, (N, 3) for points (N, 3)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    out[:, 0] = _pulse(t - 0.5 * x[:, 0])
    return out


def exact_u_dt(x, t):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    out[:, 0] = _pulse_dt(t - 0.5 * x[:, 0])
    return out


def _radial_window(s):
    return np.abs(s) < 0.9


def _shape_F(s):
    """F(s) = (s/2)(1 + cos(pi s / 0.9)) inside the window."""
    s = np.asarray(s, dtype=float)
    return np.where(_radial_window(s), 0.5 * s * (1.0 + np.cos(_GAMMA * s)), 0.0)


def _shape_F_ds(s):
    s = np.asarray(s, dtype=float)
    val = 0.5 * (1.0 + np.cos(_GAMMA * s)) - 0.5 * s * _GAMMA * np.sin(_GAMMA * s)
    return np.where(_radial_window(s), val, 0.0)


def exact_v(x, t):
    """Exterior pressure field F(|x| - t)/|x|; x must avoid the origin."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    R = np.linalg.norm(x, axis=1)
    if np.any(R < 1e-12):
        raise ValueError("exterior field is singular at the origin")
    return _shape_F(R - t) / R


def exact_v_dt(x, t):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    R = np.linalg.norm(x, axis=1)
    return -_shape_F_ds(R - t) / R


def exact_v_normal_derivative(x, normals, t):
    """n . grad v = (n . x/|x|) (F'/|x| - F/|x|^2)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    R = np.linalg.norm(x, axis=1)
    ndotx = np.einsum("id,id->i", normals, x) / R
    s = R - t
    return ndotx * (_shape_F_ds(s) / R - _shape_F(s) / R**2)


def stress_normal(x, normals, t, mat: MaterialParams):
    """sigma(u) n for the plane pulse: diagonal stress times the normal."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    fp = _pulse_dt(t - 0.5 * x[:, 0])  # f'(tau) with tau = t - x1/2
    dudx1 = -0.5 * fp
    sig = np.empty_like(normals)
    sig[:, 0] = (mat.lam + 2.0 * mat.mu) * dudx1 * normals[:, 0]
    sig[:, 1] = mat.lam * dudx1 * normals[:, 1]
    sig[:, 2] = mat.lam * dudx1 * normals[:, 2]
    return sig


def incident_traces(x, normals, t, mat: MaterialParams):
    """Data pair (h, g) of the two transmission conditions.

    h = -(sigma(u) n + v_t n) is the vector datum of the stress
    condition; g = -(u_t . n + dv/dn) the scalar one.  Points must lie
    on face interiors so the triangle's normal applies.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    vdot = exact_v_dt(x, t)
    h = -(stress_normal(x, normals, t, mat) + vdot[:, None] * normals)
    udot_n = exact_u_dt(x, t)[:, 0] * normals[:, 0]
    g = -(udot_n + exact_v_normal_derivative(x, normals, t))
    return h, g


@dataclass
class ManufacturedData:
    """Trapezoidal right-hand-side vectors for the marching scheme.

    rhs_pair(n) returns the pair

      H-part = -(dt/2) int_G (h^n + h^{n-1}) . (eta_j e_mu) ds   (3 N_o)
      G-part = +(dt/2) int_G (g^n + g^{n-1}) xi_j ds             (N_s')

    computed with a fixed per-triangle Gauss rule.  Entries of interior
    volume nodes stay zero.  The data at t_0 = 0 is evaluated, not
    assumed zero.
    """

    surf: SurfaceMesh
    dt: float
    mat: MaterialParams = field(default_factory=MaterialParams)
    quad_order: int = 5
    zero_data: bool = False
    num_volume_nodes: int | None = None

    def __post_init__(self):
        bary, w = triangle_rule(self.quad_order)
        verts = self.surf.nodes[self.surf.triangles]
        self._pts = np.einsum("pc,tcd->tpd", bary, verts)   # (T, P, 3)
        self._wts = w[None, :] * self.surf.areas[:, None]    # (T, P)
        self._hats = bary                                    # (P, 3)
        self._normals = self.surf.normals
        if self.num_volume_nodes is None:
            self.num_volume_nodes = self.surf.nodes.shape[0]
        self._cached: dict[int, tuple] = {}

    def _traces_at(self, n: int):
        """Surface samples of (h, g) at time t_n, cached per step."""
        if n in self._cached:
            return self._cached[n]
        T, P, _ = self._pts.shape
        pts = self._pts.reshape(T * P, 3)
        nrm = np.repeat(self._normals, P, axis=0)
        h, g = incident_traces(pts, nrm, n * self.dt, self.mat)
        out = (h.reshape(T, P, 3), g.reshape(T, P))
        self._cached[n] = out
        return out

    def rhs_pair(self, n: int):
        if n < 1:
            raise ValueError("steps start at n = 1")
        ndof = 3 * self.num_volume_nodes
        ns = self.surf.num_nodes
        if self.zero_data:
            return np.zeros(ndof), np.zeros(ns)

        h0, g0 = self._traces_at(n - 1)
        h1, g1 = self._traces_at(n)
        hsum = h0 + h1
        gsum = g0 + g1

        # per-triangle blocks: (T, 3 local nodes, 3 comp) resp. (T, 3)
        hw = self._wts[:, :, None] * hsum
        Hloc = -0.5 * self.dt * np.einsum("tpd,pj->tjd", hw, self._hats)
        Gloc = 0.5 * self.dt * np.einsum("tp,pj->tj", self._wts * gsum, self._hats)

        Hvec = np.zeros(ndof)
        cols = (3 * self.surf.triangles[:, :, None] + np.arange(3)).ravel()
        np.add.at(Hvec, cols, Hloc.ravel())
        Gvec = np.zeros(ns)
        np.add.at(Gvec, self.surf.tri_surface_nodes.ravel(), Gloc.ravel())
        return Hvec, Gvec
