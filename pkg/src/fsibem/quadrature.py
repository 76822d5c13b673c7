"""Double surface integrals of retarded kernels over triangle pairs.

Every Galerkin entry of the retarded boundary operators is an integral

    II  g(x, y) * w(|x-y|) * chi_{a <= |x-y| <= b}  ds_y ds_x

over a pair of flat triangles, where g collects a geometry factor and a
product of linear hat functions, and w is a piecewise radial weight.
This module provides a reference per-pair engine: shell classification,
fixed Gauss tensor rules, adaptive longest-edge bisection of cut pairs,
regularized rules for touching pairs, and a deliberately simple
brute-force oracle used by the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

FOUR_PI = 4.0 * np.pi

# ---------------------------------------------------------------------------
# Gauss rules on the reference triangle (barycentric points, weights sum 1)

_R1 = (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0]))

_R2 = (
    np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
    np.full(3, 1 / 3),
)


def _perm3(a):
    return [(1 - 2 * a, a, a), (a, 1 - 2 * a, a), (a, a, 1 - 2 * a)]


_R4 = (
    np.array(_perm3(0.445948490915965) + _perm3(0.091576213509771)),
    np.array([0.223381589678011] * 3 + [0.109951743655322] * 3),
)

_s15 = np.sqrt(15.0)
_R5 = (
    np.array([[1 / 3, 1 / 3, 1 / 3]] + _perm3((6 + _s15) / 21) + _perm3((6 - _s15) / 21)),
    np.array([9 / 40] + [(155 + _s15) / 1200] * 3 + [(155 - _s15) / 1200] * 3),
)


def _perm6(a, b):
    c = 1 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


_R6 = (
    np.array(
        _perm3(0.249286745170910)
        + _perm3(0.063089014491502)
        + _perm6(0.310352451033785, 0.636502499121399)
    ),
    np.array(
        [0.116786275726379] * 3
        + [0.050844906370207] * 3
        + [0.082851075618374] * 6
    ),
)

_RULES = {1: _R1, 2: _R2, 3: _R4, 4: _R4, 5: _R5, 6: _R6}


def triangle_rule(order: int):
    """Barycentric Gauss rule exact to (at least) the requested degree."""
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    key = min(max(order, 1), 6)
    return _RULES[key]


def refine_bary(bary: np.ndarray, weights: np.ndarray, levels: int):
    """Composite rule on 4^levels congruent subtriangles (midpoint split)."""
    corners = np.eye(3)
    for _ in range(levels):
        m01 = 0.5 * (corners[..., 0, :] + corners[..., 1, :])
        m12 = 0.5 * (corners[..., 1, :] + corners[..., 2, :])
        m20 = 0.5 * (corners[..., 2, :] + corners[..., 0, :])
        c0, c1, c2 = corners[..., 0, :], corners[..., 1, :], corners[..., 2, :]
        corners = np.stack(
            [
                np.stack([c0, m01, m20], axis=-2),
                np.stack([m01, c1, m12], axis=-2),
                np.stack([m20, m12, c2], axis=-2),
                np.stack([m01, m12, m20], axis=-2),
            ],
            axis=0,
        ).reshape(-1, 3, 3)
    pts = np.einsum("pq,sqd->spd", bary, corners).reshape(-1, 3)
    scale = 0.25**levels
    w = np.tile(weights * scale, corners.shape[0] if corners.ndim == 3 else 1)
    return pts, w


# ---------------------------------------------------------------------------
# geometry helpers


def tri_area_normal(tri: np.ndarray):
    n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    a2 = np.linalg.norm(n)
    if a2 < 1e-15:
        raise ValueError("degenerate triangle")
    return 0.5 * a2, n / a2


def hat_gradients_surface(tri: np.ndarray):
    """In-plane gradients of the three hat functions, (3, 3)."""
    area, n = tri_area_normal(tri)
    g = np.empty((3, 3))
    for i in range(3):
        e = tri[(i + 2) % 3] - tri[(i + 1) % 3]
        g[i] = np.cross(n, e) / (2.0 * area)
    # fix signs so grad_i . (v_i - v_{i+1}) = 1
    for i in range(3):
        if g[i] @ (tri[i] - tri[(i + 1) % 3]) < 0:
            g[i] = -g[i]
    return g


def surface_curls(tri: np.ndarray):
    """curl_G of each hat: constant vectors n x grad(hat_i), (3, 3)."""
    _, n = tri_area_normal(tri)
    return np.cross(n, hat_gradients_surface(tri))


def _point_segment_dist2(p, a, b):
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / max(np.dot(ab, ab), 1e-300), 0.0, 1.0)
    d = p - (a + t * ab)
    return d @ d


def _point_triangle_dist2(p, tri):
    area, n = tri_area_normal(tri)
    # barycentric coordinates of the in-plane projection
    q = p - np.dot(p - tri[0], n) * n
    v0, v1 = tri[1] - tri[0], tri[2] - tri[0]
    d00, d01, d11 = v0 @ v0, v0 @ v1, v1 @ v1
    w = q - tri[0]
    d20, d21 = w @ v0, w @ v1
    den = d00 * d11 - d01 * d01
    b1 = (d11 * d20 - d01 * d21) / den
    b2 = (d00 * d21 - d01 * d20) / den
    if b1 >= 0 and b2 >= 0 and b1 + b2 <= 1:
        d = p - q
        return d @ d + 0.0
    return min(
        _point_segment_dist2(p, tri[0], tri[1]),
        _point_segment_dist2(p, tri[1], tri[2]),
        _point_segment_dist2(p, tri[2], tri[0]),
    )


def _segment_segment_dist2(p1, q1, p2, q2):
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = d1 @ d1
    e = d2 @ d2
    f = d2 @ r
    if a < 1e-300 and e < 1e-300:
        return r @ r
    if a < 1e-300:
        s, t = 0.0, np.clip(f / e, 0.0, 1.0)
    else:
        c = d1 @ r
        if e < 1e-300:
            t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
        else:
            b = d1 @ d2
            den = a * e - b * b
            s = np.clip((b * f - c * e) / den, 0.0, 1.0) if den > 1e-300 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
            elif t > 1.0:
                t, s = 1.0, np.clip((b - c) / a, 0.0, 1.0)
    d = (p1 + s * d1) - (p2 + t * d2)
    return d @ d


def triangle_distance(triX: np.ndarray, triY: np.ndarray) -> float:
    """Exact minimum distance between two (non-crossing) triangles."""
    best = np.inf
    for i in range(3):
        best = min(best, _point_triangle_dist2(triX[i], triY))
        best = min(best, _point_triangle_dist2(triY[i], triX))
    for i in range(3):
        for j in range(3):
            best = min(
                best,
                _segment_segment_dist2(
                    triX[i], triX[(i + 1) % 3], triY[j], triY[(j + 1) % 3]
                ),
            )
    return float(np.sqrt(max(best, 0.0)))


def triangle_max_distance(triX: np.ndarray, triY: np.ndarray) -> float:
    """Largest point-pair distance (attained at vertices)."""
    d = triX[:, None, :] - triY[None, :, :]
    return float(np.sqrt((d * d).sum(-1).max()))


def shared_vertices(triX: np.ndarray, triY: np.ndarray, tol: float = 1e-12):
    """Index pairs of geometrically coincident vertices."""
    out = []
    for i in range(3):
        for j in range(3):
            if np.linalg.norm(triX[i] - triY[j]) < tol:
                out.append((i, j))
    return out


# ---------------------------------------------------------------------------
# shells, classification


@dataclass(frozen=True)
class ShellSpec:
    """Distance band [l*dt, (l+1)*dt] of one light-cone lag."""

    l: int
    dt: float

    def __post_init__(self):
        if self.l < 0 or self.dt <= 0:
            raise ValueError("shell index must be >= 0 and dt > 0")

    @property
    def bounds(self):
        return (self.l * self.dt, (self.l + 1) * self.dt)


INSIDE, OUTSIDE, CUT = "Inside", "Outside", "Cut"


def classify_pair(triX: np.ndarray, triY: np.ndarray, shell: ShellSpec) -> str:
    """Locate the pair's distance range relative to the shell band.

    Conservative: anything not provably inside or outside is Cut.
    """
    a, b = shell.bounds
    dmin = triangle_distance(triX, triY)
    dmax = triangle_max_distance(triX, triY)
    if dmax < a or dmin > b:
        return OUTSIDE
    if a <= dmin and dmax <= b:
        return INSIDE
    return CUT


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class Kernel:
    """Geometry factor x hat product x scalar radial weight.

    kind selects the geometry factor and base radial power:
      SL        1/(4 pi r)
      SL_overR  1/(4 pi r^2)
      DLy       n_y.(x-y)/(4 pi r^3)
      DLx       n_x.(x-y)/(4 pi r^3)
      HS_normal (n_x.n_y)/(4 pi r)
      HS_curl   (curl_j(y).curl_i(x))/(4 pi r)
    radial(r) multiplies on top (lag-dependent polynomial or Y weight);
    i, j pick local hats on triX / triY (None = constant 1; ignored for
    HS_curl where the curls replace the hats).
    """

    kind: str
    radial: Callable[[np.ndarray], np.ndarray] | None = None
    i: int | None = None
    j: int | None = None

def _kernel_values(kernel: Kernel, X, WX, HX, nx, cx, Y, WY, HY, ny, cy):
    """Evaluate kernel*weights on a tensor point set, guarding r < 1e-12."""
    D = X[:, None, :] - Y[None, :, :]
    r = np.sqrt((D * D).sum(-1))
    ok = r > 1e-12
    rs = np.where(ok, r, 1.0)

    if kernel.kind == "SL":
        base = 1.0 / (FOUR_PI * rs)
    elif kernel.kind == "SL_overR":
        base = 1.0 / (FOUR_PI * rs * rs)
    elif kernel.kind == "DLy":
        base = np.einsum("xyd,d->xy", D, ny) / (FOUR_PI * rs**3)
    elif kernel.kind == "DLx":
        base = np.einsum("xyd,d->xy", D, nx) / (FOUR_PI * rs**3)
    elif kernel.kind == "HS_normal":
        base = (nx @ ny) / (FOUR_PI * rs)
    elif kernel.kind == "HS_curl":
        base = (cx[kernel.i or 0] @ cy[kernel.j or 0]) / (FOUR_PI * rs)
    else:
        raise ValueError(f"unknown kernel kind {kernel.kind!r}")

    if kernel.kind != "HS_curl":
        if kernel.i is not None:
            base = base * HX[:, None, kernel.i]
        if kernel.j is not None:
            base = base * HY[None, :, kernel.j]
    if kernel.radial is not None:
        base = base * kernel.radial(rs)
    base = np.where(ok, base, 0.0)
    return base, r, (WX[:, None] * WY[None, :])


@dataclass
class QuadConfig:
    """Knobs of the reference per-pair engine."""

    order_far: int = 3
    order_near: int = 6
    subdiv_depth: int = 6
    singular_points: int = 4  # 1d Gauss points per coordinate after transform
    singular_panels: int = 3  # composite panels in the radial-like coordinate
    near_distance: float | None = None  # defaults to max pair diameter

    def key(self) -> str:
        return (
            f"f{self.order_far}n{self.order_near}d{self.subdiv_depth}"
            f"s{self.singular_points}p{self.singular_panels}"
        )


class QuadratureAccuracyError(RuntimeError):
    """Non-finite intermediate result; the pair and shell are reported."""


def _tensor_points(tri, order):
    bary, w = triangle_rule(order)
    area, n = tri_area_normal(tri)
    pts = bary @ tri
    return pts, w * area, bary, n


def _gauss_pair(kernel, triX, triY, order, shell=None):
    X, WX, HX, nx = _tensor_points(triX, order)
    Y, WY, HY, ny = _tensor_points(triY, order)
    cx = surface_curls(triX) if kernel.kind == "HS_curl" else None
    cy = surface_curls(triY) if kernel.kind == "HS_curl" else None
    vals, r, w = _kernel_values(kernel, X, WX, HX, nx, cx, Y, WY, HY, ny, cy)
    if shell is not None:
        a, b = shell.bounds
        vals = np.where((r >= a) & (r <= b), vals, 0.0)
    out = float((vals * w).sum())
    if not np.isfinite(out):
        raise QuadratureAccuracyError("non-finite value on separated pair")
    return out


def _longest_edge_split(tri):
    e = [np.linalg.norm(tri[(i + 1) % 3] - tri[i]) for i in range(3)]
    i = int(np.argmax(e))
    mid = 0.5 * (tri[i] + tri[(i + 1) % 3])
    a = np.array([tri[i], mid, tri[(i + 2) % 3]])
    b = np.array([mid, tri[(i + 1) % 3], tri[(i + 2) % 3]])
    return a, b


def _phys_hats(tri_parent, pts):
    """Values of the parent triangle's hats at physical points."""
    v0, v1 = tri_parent[1] - tri_parent[0], tri_parent[2] - tri_parent[0]
    d00, d01, d11 = v0 @ v0, v0 @ v1, v1 @ v1
    den = d00 * d11 - d01 * d01
    w = pts - tri_parent[0]
    d20, d21 = w @ v0, w @ v1
    b1 = (d11 * d20 - d01 * d21) / den
    b2 = (d00 * d21 - d01 * d20) / den
    return np.column_stack([1.0 - b1 - b2, b1, b2])


def _gauss_pair_sub(kernel, parentX, parentY, triX, triY, order, shell, indicator):
    """Tensor Gauss on a sub-pair, hats still those of the parents."""
    baryX, wX = triangle_rule(order)
    baryY, wY = triangle_rule(order)
    areaX, nx = tri_area_normal(triX)
    areaY, ny = tri_area_normal(triY)
    X = baryX @ triX
    Y = baryY @ triY
    HX = _phys_hats(parentX, X)
    HY = _phys_hats(parentY, Y)
    cx = surface_curls(parentX) if kernel.kind == "HS_curl" else None
    cy = surface_curls(parentY) if kernel.kind == "HS_curl" else None
    vals, r, w = _kernel_values(kernel, X, wX * areaX, HX, nx, cx, Y, wY * areaY, HY, ny, cy)
    if indicator:
        a, b = shell.bounds
        vals = np.where((r >= a) & (r <= b), vals, 0.0)
    return float((vals * w).sum())


def integrate_pair(
    kernel: Kernel,
    triX: np.ndarray,
    triY: np.ndarray,
    shell: ShellSpec,
    order: int | None = None,
    cfg: QuadConfig | None = None,
) -> float:
    """One shell integral over one triangle pair.

    Outside pairs return exactly 0; Inside pairs skip the indicator; Cut
    pairs are bisected adaptively until sub-pairs classify or the depth
    cap is reached, after which the indicator is applied pointwise.
    Touching pairs fall back to regularized coordinates near r = 0.
    """
    cfg = cfg or QuadConfig()
    triX = np.asarray(triX, dtype=float)
    triY = np.asarray(triY, dtype=float)

    cls = classify_pair(triX, triY, shell)
    if cls == OUTSIDE:
        return 0.0

    if order is None:
        near_dist = cfg.near_distance
        if near_dist is None:
            near_dist = max(
                triangle_max_distance(triX, triX), triangle_max_distance(triY, triY)
            )
        near = triangle_distance(triX, triY) < near_dist
        order = cfg.order_near if near else cfg.order_far

    return _integrate_cut(kernel, triX, triY, triX, triY, shell, order, cfg, 0)


def _classify_band(triX, triY, band):
    a, b = band.bounds
    dmin = triangle_distance(triX, triY)
    dmax = triangle_max_distance(triX, triY)
    if dmax < a or dmin > b:
        return OUTSIDE
    if a <= dmin and dmax <= b:
        return INSIDE
    return CUT


def _integrate_cut(kernel, parentX, parentY, triX, triY, band, order, cfg, depth):
    """Adaptive bisection; touching sub-pairs go to regularized rules."""
    cls = _classify_band(triX, triY, band)
    if cls == OUTSIDE:
        return 0.0
    touching = bool(shared_vertices(triX, triY))
    if cls == INSIDE:
        if touching:
            from fsibem.singular import sauter_schwab_pair

            return sauter_schwab_pair(
                kernel, triX, triY, cfg, parentX=parentX, parentY=parentY
            )
        return _gauss_pair_sub(kernel, parentX, parentY, triX, triY, order, band, False)
    if depth >= cfg.subdiv_depth:
        if touching:
            from fsibem.singular import sauter_schwab_pair

            return sauter_schwab_pair(
                kernel, triX, triY, cfg, parentX=parentX, parentY=parentY, band=band
            )
        return _gauss_pair_sub(kernel, parentX, parentY, triX, triY, order, band, True)
    X1, X2 = _longest_edge_split(triX)
    Y1, Y2 = _longest_edge_split(triY)
    total = 0.0
    for sx in (X1, X2):
        for sy in (Y1, Y2):
            total += _integrate_cut(kernel, parentX, parentY, sx, sy, band, order, cfg, depth + 1)
    return total


def brute_force_pair(
    kernel: Kernel,
    triX: np.ndarray,
    triY: np.ndarray,
    shell: ShellSpec | None,
    m: int,
) -> float:
    """Midpoint tensor oracle: m^2 x m^2 uniform cells, indicator applied
    pointwise, sample pairs closer than 1e-12 contribute zero.

    Converges O(1/m) near cut boundaries and near touching edges; meant
    as an independent reference at large m, not as a fast path.
    """
    if m < 1:
        raise ValueError("need at least one sample per dimension")
    triX = np.asarray(triX, dtype=float)
    triY = np.asarray(triY, dtype=float)
    bx = _midpoint_grid(m)
    X = bx @ triX
    Y = bx @ triY
    areaX, nx = tri_area_normal(triX)
    areaY, ny = tri_area_normal(triY)
    wX = np.full(len(X), areaX / m**2)
    wY = np.full(len(Y), areaY / m**2)
    HX = bx
    HY = bx
    cx = surface_curls(triX) if kernel.kind == "HS_curl" else None
    cy = surface_curls(triY) if kernel.kind == "HS_curl" else None

    total = 0.0
    chunk = max(1, int(2e6 / max(len(Y), 1)))
    for s in range(0, len(X), chunk):
        vals, r, w = _kernel_values(
            kernel, X[s : s + chunk], wX[s : s + chunk], HX[s : s + chunk],
            nx, cx, Y, wY, HY, ny, cy,
        )
        if shell is not None:
            a, b = shell.bounds
            vals = np.where((r >= a) & (r <= b), vals, 0.0)
        total += float((vals * w).sum())
    return total


def _midpoint_grid(m: int) -> np.ndarray:
    """Centroids of the m^2 congruent subtriangles, barycentric, (m^2, 3)."""
    pts = []
    for a in range(m):
        for b in range(m - a):
            pts.append(((a + 1 / 3) / m, (b + 1 / 3) / m))
            if a + b < m - 1:
                pts.append(((a + 2 / 3) / m, (b + 2 / 3) / m))
    uv = np.asarray(pts)
    return np.column_stack([1.0 - uv[:, 0] - uv[:, 1], uv[:, 0], uv[:, 1]])
