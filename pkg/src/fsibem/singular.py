"""Regularized quadrature for touching triangle pairs.

Relative-coordinate (Duffy-type) transforms split the 4D product domain
into subdomains on which the distance |x-y| is proportional to the
first coordinate xi; the transform Jacobian then cancels kernel
singularities up to and including n.(x-y)/r^3.  Identical panels use a
three-cone decomposition of the relative coordinate plus the x<->y
swap; pairs sharing an edge or a vertex use the standard five-, resp.
two-region splits.

Because r = xi * R(eta) exactly, the xi coordinate can be panelled at
the distance-shell breakpoints c*dt/R: per panel every lag profile is a
polynomial, so a fixed Gauss rule integrates the radial direction
exactly.  :func:`ss_radial_point_set` exploits this; the plain
:func:`ss_point_set` keeps a uniform layout for smooth radial weights.

All rules return barycentric point pairs and weights w with

    II_{TxT'} f  =  (2 area_X) (2 area_Y) sum_p w_p f(x_p, y_p).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from fsibem.quadrature import Kernel, QuadConfig, shared_vertices, surface_curls, tri_area_normal


def gauss01(n: int, panels: int = 1):
    """Composite Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    if panels == 1:
        return x, w
    xs, ws = [], []
    for p in range(panels):
        xs.append((p + x) / panels)
        ws.append(w / panels)
    return np.concatenate(xs), np.concatenate(ws)


def _collapsed_bary(r1, r2):
    """Hats of the collapsed map x = (1-r1) v0 + (r1-r2) v1 + r2 v2."""
    return np.stack([1.0 - r1, r1 - r2, r2], axis=-1)


# ---------------------------------------------------------------------------
# region maps: (xi, e1, e2, e3) -> collapsed coords of x and y plus the
# Jacobian weight.  In every region the difference x - y is exactly
# proportional to xi.


def _regions_identical():
    """Three cones of the relative coordinate, each plus its swap.

    For z = x - y in the cone spanned by consecutive vertices of the
    difference hexagon, the admissible x form a right triangle of size
    1 - xi opened up by one extra Duffy step (e2, e3 below).
    """

    def make(cone):
        def fwd(xi, e1, e2, e3):
            if cone == 0:
                z1, z2 = xi, xi * e1
                alpha, beta = xi * e1, 1.0 + 0.0 * xi
            elif cone == 1:
                z1, z2 = xi * (1.0 - e1), xi
                alpha, beta = xi, 1.0 + 0.0 * xi
            else:
                z1, z2 = -xi * e1, xi * (1.0 - e1)
                alpha, beta = xi * (1.0 - e1), 1.0 - xi * e1
            sigma = 1.0 - xi
            mu1 = e2 * (1.0 - e3)
            mu2 = e2 * e3
            u1 = beta - mu1 * sigma
            u2 = alpha + mu2 * sigma
            jac = xi * sigma**2 * e2
            return u1, u2, u1 - z1, u2 - z2, jac

        def swp(xi, e1, e2, e3):
            u1, u2, v1, v2, jac = fwd(xi, e1, e2, e3)
            return v1, v2, u1, u2, jac

        return fwd, swp

    out = []
    for cone in range(3):
        out.extend(make(cone))
    return out


def _regions_edge():
    """Five-region split for panels sharing the edge (v0, v1)."""

    def r1(xi, e1, e2, e3):
        w = (xi, -xi * e1 * e2, xi * e1 * (1 - e2), xi * e1 * e3)
        return w[0], w[3], w[0] + w[1], w[2], xi**3 * e1**2

    def r2(xi, e1, e2, e3):
        w = (xi, -xi * e1 * e2 * e3, xi * e1 * e2 * (1 - e3), xi * e1)
        return w[0], w[3], w[0] + w[1], w[2], xi**3 * e1**2 * e2

    def r3(xi, e1, e2, e3):
        w = (xi * (1 - e1 * e2), xi * e1 * e2, xi * e1 * e2 * e3, xi * e1 * (1 - e2))
        return w[0], w[3], w[0] + w[1], w[2], xi**3 * e1**2 * e2

    def r4(xi, e1, e2, e3):
        w = (xi * (1 - e1 * e2 * e3), xi * e1 * e2 * e3, xi * e1, xi * e1 * e2 * (1 - e3))
        return w[0], w[3], w[0] + w[1], w[2], xi**3 * e1**2 * e2

    def r5(xi, e1, e2, e3):
        w = (xi * (1 - e1 * e2 * e3), xi * e1 * e2 * e3, xi * e1 * e2, xi * e1 * (1 - e2 * e3))
        return w[0], w[3], w[0] + w[1], w[2], xi**3 * e1**2 * e2

    return [r1, r2, r3, r4, r5]


def _regions_vertex():
    """Two-region split for panels sharing the vertex v0."""

    def r1(xi, e1, e2, e3):
        return xi, xi * e1, xi * e2, xi * e2 * e3, xi**3 * e2

    def r2(xi, e1, e2, e3):
        return xi * e2, xi * e2 * e3, xi, xi * e1, xi**3 * e2

    return [r1, r2]


_REGIONS = {
    "identical": _regions_identical,
    "edge": _regions_edge,
    "vertex": _regions_vertex,
}


@lru_cache(maxsize=32)
def ss_point_set(adjacency: str, n1d: int, panels: int):
    """Uniform-layout rule for one adjacency class.

    Shared entities must occupy the leading vertex slots of both
    triangles, in the same order.  Radial panels refine the xi
    coordinate, which sets the distance scale.
    """
    if adjacency not in _REGIONS:
        raise ValueError(f"unknown adjacency {adjacency!r}")
    xi, wxi = gauss01(n1d, panels)
    e, we = gauss01(n1d)
    XI, E1, E2, E3 = np.meshgrid(xi, e, e, e, indexing="ij")
    W4 = (
        wxi[:, None, None, None]
        * we[None, :, None, None]
        * we[None, None, :, None]
        * we[None, None, None, :]
    )
    XI, E1, E2, E3, W4 = (a.ravel() for a in (XI, E1, E2, E3, W4))

    bx, by, ww = [], [], []
    for region in _REGIONS[adjacency]():
        r1x, r2x, r1y, r2y, jac = region(XI, E1, E2, E3)
        bx.append(_collapsed_bary(r1x, r2x))
        by.append(_collapsed_bary(r1y, r2y))
        ww.append(W4 * jac)
    return np.concatenate(bx), np.concatenate(by), np.concatenate(ww)


_RADIAL_CACHE: dict = {}


def _pair_signature(pa, pb, dt):
    pts = np.vstack([pa, pb])
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2) / dt
    return tuple(np.round(d.ravel(), 9))


def _panels(R, dt):
    nb = int(np.floor(R / dt))
    cuts = np.concatenate([[0.0], np.arange(1, nb + 1) * dt / R, [1.0]])
    return np.unique(np.clip(cuts, 0.0, 1.0))


def ss_radial_point_set(adjacency, vertsA, vertsB, dt, n_outer=4, n_xi=4):
    """Shell-exact rule: radial panels split where r crosses multiples of dt.

    In every subdomain the distance is exactly proportional to one
    scaling coordinate (xi for identical/vertex maps, the product
    xi*eta1 for edge maps, handled by substitution); panelling that
    coordinate at the shell breakpoints makes the piecewise lag profiles
    polynomial per panel, so a fixed Gauss rule integrates them without
    indicator noise.

    vertsA/vertsB are the physical triangles with shared entities
    leading; they fix the radial scales.  The returned points are
    sorted by r/dt of this representative pair and accompanied by that
    sorted array, so congruent pairs can slice lag windows by
    searchsorted.  Cached per congruence class.
    """
    key = (adjacency, n_outer, n_xi, _pair_signature(vertsA, vertsB, dt))
    hit = _RADIAL_CACHE.get(key)
    if hit is not None:
        return hit

    gx, gw = np.polynomial.legendre.leggauss(n_xi)
    gx = 0.5 * (gx + 1.0)
    gw = 0.5 * gw
    eo, wo = gauss01(n_outer)

    bx_all, by_all, w_all = [], [], []
    one = np.ones(1)

    def emit(region, xi, e1, e2, e3, wtot):
        r1x, r2x, r1y, r2y, jac = region(xi, e1, e2, e3)
        bx_all.append(_collapsed_bary(r1x, r2x))
        by_all.append(_collapsed_bary(r1y, r2y))
        w_all.append(wtot * jac)

    if adjacency in ("identical", "vertex"):
        # r = xi * R(e1, e2, e3): panel xi directly
        E1, E2, E3 = np.meshgrid(eo, eo, eo, indexing="ij")
        WO = (wo[:, None, None] * wo[None, :, None] * wo[None, None, :]).ravel()
        E1, E2, E3 = (a.ravel() for a in (E1, E2, E3))
        for region in _REGIONS[adjacency]():
            for idx in range(len(E1)):
                e1, e2, e3 = E1[idx], E2[idx], E3[idx]
                r1x, r2x, r1y, r2y, _ = region(one, e1 * one, e2 * one, e3 * one)
                X1 = _collapsed_bary(r1x, r2x) @ vertsA
                Y1 = _collapsed_bary(r1y, r2y) @ vertsB
                R = float(np.linalg.norm(X1 - Y1))
                if R < 1e-14:
                    continue
                cuts = _panels(R, dt)
                for lo, hi in zip(cuts[:-1], cuts[1:]):
                    if hi - lo < 1e-14:
                        continue
                    xi = lo + (hi - lo) * gx
                    emit(region, xi, e1, e2, e3, (hi - lo) * gw * WO[idx])
    elif adjacency == "edge":
        # r = (xi*e1) * rho(e2, e3): substitute t = xi*e1, integrate xi
        # over [t, 1] with weight 1/xi, and panel t at the breakpoints
        E2, E3 = np.meshgrid(eo, eo, indexing="ij")
        WO = (wo[:, None] * wo[None, :]).ravel()
        E2, E3 = E2.ravel(), E3.ravel()
        for region in _REGIONS["edge"]():
            for idx in range(len(E2)):
                e2, e3 = E2[idx], E3[idx]
                r1x, r2x, r1y, r2y, _ = region(one, one, e2 * one, e3 * one)
                X1 = _collapsed_bary(r1x, r2x) @ vertsA
                Y1 = _collapsed_bary(r1y, r2y) @ vertsB
                rho = float(np.linalg.norm(X1 - Y1))
                if rho < 1e-14:
                    continue
                cuts = _panels(rho, dt)
                for lo, hi in zip(cuts[:-1], cuts[1:]):
                    if hi - lo < 1e-14:
                        continue
                    for tq, twq in zip(lo + (hi - lo) * gx, (hi - lo) * gw):
                        xi = tq + (1.0 - tq) * eo
                        e1 = tq / xi
                        wtot = twq * (1.0 - tq) * wo * WO[idx] / xi
                        emit(region, xi, e1, e2, e3, wtot)
    else:
        raise ValueError(f"unknown adjacency {adjacency!r}")

    bx = np.concatenate(bx_all)
    by = np.concatenate(by_all)
    w = np.concatenate(w_all)

    rep_r = np.linalg.norm(bx @ vertsA - by @ vertsB, axis=1)
    order = np.argsort(rep_r, kind="stable")
    result = (bx[order], by[order], w[order], rep_r[order] / dt)
    _RADIAL_CACHE[key] = result
    return result


def touching_permutations(triX: np.ndarray, triY: np.ndarray):
    """Vertex orders putting shared entities first, plus the adjacency tag."""
    pairs = shared_vertices(triX, triY)
    if len(pairs) == 3:
        permX = [0, 1, 2]
        permY = [next(j for i2, j in pairs if i2 == i) for i in range(3)]
        return "identical", permX, permY
    if len(pairs) == 2:
        (i1, j1), (i2, j2) = pairs
        permX = [i1, i2, 3 - i1 - i2]
        permY = [j1, j2, 3 - j1 - j2]
        return "edge", permX, permY
    if len(pairs) == 1:
        i1, j1 = pairs[0]
        permX = [i1, (i1 + 1) % 3, (i1 + 2) % 3]
        permY = [j1, (j1 + 1) % 3, (j1 + 2) % 3]
        return "vertex", permX, permY
    raise ValueError("triangles do not touch at shared vertices")


def sauter_schwab_pair(
    kernel: Kernel,
    triX: np.ndarray,
    triY: np.ndarray,
    cfg: QuadConfig,
    parentX: np.ndarray | None = None,
    parentY: np.ndarray | None = None,
    band=None,
) -> float:
    """Integral of a singular kernel over a touching pair.

    With parents given, triX/triY are coplanar sub-triangles and the hat
    functions are those of the parents.  A band restricts the integral
    to a distance interval by masking sample pairs pointwise (the rule's
    points avoid r = 0 exactly).
    """
    adjacency, permX, permY = touching_permutations(triX, triY)
    bx, by, w = ss_point_set(adjacency, cfg.singular_points, cfg.singular_panels)

    tX = triX[permX]
    tY = triY[permY]
    X = bx @ tX
    Y = by @ tY
    areaX, nx = tri_area_normal(triX)
    areaY, ny = tri_area_normal(triY)

    if parentX is None:
        HX = np.empty_like(bx)
        HY = np.empty_like(by)
        HX[:, permX] = bx
        HY[:, permY] = by
        curl_src_x, curl_src_y = triX, triY
    else:
        from fsibem.quadrature import _phys_hats

        HX = _phys_hats(parentX, X)
        HY = _phys_hats(parentY, Y)
        curl_src_x, curl_src_y = parentX, parentY

    cx = surface_curls(curl_src_x) if kernel.kind == "HS_curl" else None
    cy = surface_curls(curl_src_y) if kernel.kind == "HS_curl" else None

    # point-pair evaluation: X and Y are paired one-to-one here
    D = X - Y
    r = np.sqrt((D * D).sum(-1))
    ok = r > 1e-14
    rs = np.where(ok, r, 1.0)
    from fsibem.quadrature import FOUR_PI

    if kernel.kind == "SL":
        base = 1.0 / (FOUR_PI * rs)
    elif kernel.kind == "SL_overR":
        base = 1.0 / (FOUR_PI * rs * rs)
    elif kernel.kind == "DLy":
        base = (D @ ny) / (FOUR_PI * rs**3)
    elif kernel.kind == "DLx":
        base = (D @ nx) / (FOUR_PI * rs**3)
    elif kernel.kind == "HS_normal":
        base = (nx @ ny) / (FOUR_PI * rs)
    elif kernel.kind == "HS_curl":
        base = (cx[kernel.i or 0] @ cy[kernel.j or 0]) / (FOUR_PI * rs)
    else:
        raise ValueError(kernel.kind)

    if kernel.kind != "HS_curl":
        if kernel.i is not None:
            base = base * HX[:, kernel.i]
        if kernel.j is not None:
            base = base * HY[:, kernel.j]
    if kernel.radial is not None:
        base = base * kernel.radial(rs)
    if band is not None:
        a, b = band.bounds if hasattr(band, "bounds") else band
        base = np.where((r >= a) & (r <= b), base, 0.0)
    base = np.where(ok, base, 0.0)
    return float((base * w).sum() * (2 * areaX) * (2 * areaY))
