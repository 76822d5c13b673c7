"""Assembly of the lagged retarded boundary matrices.

Four matrix families enter the marching scheme: single layer, double
layer, its adjoint, and the hypersingular operator, one matrix per time
lag.  Every entry couples two surface hats through a radial weight
supported on three consecutive distance shells of width dt, so one
engine assembles all families and all lags in a single sweep over
triangle pairs:

  * separated pairs: tensor Gauss points, lag profiles evaluated
    pointwise (the shell indicators live inside the piecewise
    profiles), optionally with composite subdivision for near pairs;
  * touching pairs (shared vertex, edge, or identical): regularized
    relative-coordinate rules whose radial coordinate is panelled
    exactly at the shell breakpoints, so the piecewise profiles are
    integrated without indicator noise.

Touching-pair point sets depend only on the congruence class of the
pair relative to dt; the cube mesh has a handful of classes, so the
sets are built once and shared.  Matrices vanish identically once the
innermost shell clears the surface diameter; those lags are kept as
symbolic zeros.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from fsibem.mesh import SurfaceMesh
from fsibem.profiles import box_diff_profile, hat_diff_profile, spline_profile
from fsibem.quadrature import FOUR_PI, refine_bary, surface_curls, triangle_rule
from fsibem.singular import _pair_signature, ss_radial_point_set

FAMILIES = ("sl", "dl", "adl", "hyp")


@dataclass(frozen=True)
class AssemblyConfig:
    """Quadrature knobs of the batch assembler."""

    order_far: int = 5
    order_near: int = 5
    near_levels: int = 1
    near_factor: float = 1.0
    singular_points: int = 4   # Gauss points per transformed coordinate
    singular_radial: int = 4   # Gauss points per radial shell panel
    block_points: int = 3_000_000

    def key(self) -> str:
        return (
            f"of{self.order_far}-on{self.order_near}-nl{self.near_levels}"
            f"-nf{self.near_factor:g}-sp{self.singular_points}-sr{self.singular_radial}"
        )

    def bumped(self) -> "AssemblyConfig":
        """One refinement level up in every direction (stability checks)."""
        return AssemblyConfig(
            order_far=self.order_far + 1,
            order_near=self.order_near + 1,
            near_levels=self.near_levels + 1,
            near_factor=self.near_factor,
            singular_points=self.singular_points + 1,
            singular_radial=self.singular_radial + 1,
            block_points=self.block_points,
        )


def causality_cutoff(diameter: float, dt: float) -> int:
    """Largest lag whose innermost shell still meets the surface."""
    return int(np.ceil(diameter / dt + 2.0)) - 1


@dataclass
class RetardedMatrixSequence:
    """Per-lag matrices of the four families; None marks a symbolic zero."""

    dt: float
    count: int
    k_nonzero: int
    mats: dict = field(default_factory=dict)  # family -> {k: matrix}

    def get(self, family: str, k: int):
        if k < 0 or k > self.k_nonzero:
            return None
        return self.mats.get(family, {}).get(k)

    def matvec(self, family: str, k: int, vec: np.ndarray) -> np.ndarray:
        m = self.get(family, k)
        if m is None:
            return np.zeros_like(vec)
        return m @ vec

    def dense(self, family: str, k: int, size: int) -> np.ndarray:
        m = self.get(family, k)
        if m is None:
            return np.zeros((size, size))
        return m.toarray() if sp.issparse(m) else np.asarray(m)


# ---------------------------------------------------------------------------
# pair bookkeeping


def _touching_pairs(surf: SurfaceMesh):
    """Unordered triangle pairs sharing at least one node, with the
    shared-first vertex permutations and the adjacency tag."""
    node_tris: dict[int, list[int]] = {}
    for t, tri in enumerate(surf.triangles):
        for v in tri:
            node_tris.setdefault(int(v), []).append(t)
    pairs = set()
    for tris in node_tris.values():
        for ii in range(len(tris)):
            for jj in range(ii, len(tris)):
                a, b = tris[ii], tris[jj]
                pairs.add((min(a, b), max(a, b)))

    out = []
    tris_arr = surf.triangles
    for (a, b) in sorted(pairs):
        if a == b:
            out.append((a, b, "identical", [0, 1, 2], [0, 1, 2]))
            continue
        shared = sorted(set(tris_arr[a]) & set(tris_arr[b]))
        la = [int(np.where(tris_arr[a] == s)[0][0]) for s in shared]
        lb = [int(np.where(tris_arr[b] == s)[0][0]) for s in shared]
        if len(shared) == 2:
            permA = [la[0], la[1], 3 - la[0] - la[1]]
            permB = [lb[0], lb[1], 3 - lb[0] - lb[1]]
            out.append((a, b, "edge", permA, permB))
        elif len(shared) == 1:
            permA = [la[0], (la[0] + 1) % 3, (la[0] + 2) % 3]
            permB = [lb[0], (lb[0] + 1) % 3, (lb[0] + 2) % 3]
            out.append((a, b, "vertex", permA, permB))
        else:
            raise RuntimeError("distinct triangles sharing three nodes")
    return out


# ---------------------------------------------------------------------------
# pointwise family values


def _family_values(r, s, k, dt, w2, nxd, nyd, nxny):
    """Integrand values of the four families at lag k (both orientations).

    Signs follow the energy-consistent convention of the marching
    scheme: the adjoint double layer is the time-tested Neumann trace
    of the single layer potential, and the hypersingular normal part
    carries the acceleration pairing with the same sign as its
    surface-curl part (regularized Maue form).
    """
    u = s - k
    L = hat_diff_profile(u)
    B = spline_profile(u)
    P = box_diff_profile(u)

    r1 = w2 / (FOUR_PI * r)
    r2 = r1 / r
    r3 = r2 / r

    val_sl = L * r1
    f_dl = L * r3 - P * r2 / dt
    f_adl = L * r2 - dt * B * r3
    val_hyp_n = (P / dt) * nxny * r1
    val_hyp_c = dt * B * r1
    return (
        val_sl,
        nyd * f_dl,
        -nxd * f_dl,
        nxd * f_adl,
        -nyd * f_adl,
        val_hyp_n,
        val_hyp_c,
    )


def _contract_tensor_shared(val, hat):
    B, Px, Py = val.shape
    tmp = (val.reshape(B * Px, Py) @ hat).reshape(B, Px, 3)
    return np.einsum("bxi,xj->bji", tmp, hat)


def _contract_paired(val, hatX, hatY):
    return np.einsum("bp,bpj,bpi->bji", val, hatX, hatY, optimize=True)


class _Accumulator:
    def __init__(self, ns, lags):
        self.ns = ns
        self.data = {f: {k: np.zeros((ns, ns)) for k in lags} for f in FAMILIES}

    def add(self, family, k, rows, cols, block):
        np.add.at(self.data[family][k], (rows[:, :, None], cols[:, None, :]), block)


def _scatter(acc, k, rowsA, colsB, selfmask, outs):
    """Both orientations of one lag: mirrored blocks are transposes,
    with the swapped-kernel variants for the unsymmetric families."""
    mirror = ~selfmask
    acc.add("sl", k, rowsA, colsB, outs["sl"])
    acc.add("dl", k, rowsA, colsB, outs["dl"])
    acc.add("adl", k, rowsA, colsB, outs["adl"])
    acc.add("hyp", k, rowsA, colsB, outs["hyp"])
    if np.any(mirror):
        tr = lambda x: np.transpose(x[mirror], (0, 2, 1))
        acc.add("sl", k, colsB[mirror], rowsA[mirror], tr(outs["sl"]))
        acc.add("dl", k, colsB[mirror], rowsA[mirror], tr(outs["dl_swap"]))
        acc.add("adl", k, colsB[mirror], rowsA[mirror], tr(outs["adl_swap"]))
        acc.add("hyp", k, colsB[mirror], rowsA[mirror], tr(outs["hyp"]))


def assemble_lags(surf: SurfaceMesh, dt: float, lags, cfg: AssemblyConfig | None = None):
    """Dense matrices of all four families at the requested lags.

    Returns {family: {k: (N_s', N_s') ndarray}}.
    """
    cfg = cfg or AssemblyConfig()
    lags = sorted(set(int(k) for k in lags))
    if any(k < 0 for k in lags):
        raise ValueError("lags must be nonnegative")
    ns = surf.num_nodes
    if not lags:
        return {f: {} for f in FAMILIES}

    verts = surf.nodes[surf.triangles]
    centers = verts.mean(axis=1)
    rad = np.linalg.norm(verts - centers[:, None, :], axis=2).max(axis=1)
    curls = np.stack([surface_curls(v) for v in verts])
    tsn = surf.tri_surface_nodes
    normals = surf.normals
    areas = surf.areas
    T = surf.num_triangles
    h_surf = 2.0 * rad.max()

    acc = _Accumulator(ns, lags)
    lag_arr = np.asarray(lags)

    # --- touching pairs, grouped by congruence class -----------------------
    touching = _touching_pairs(surf)
    touch_set = {(a, b) for a, b, *_ in touching}
    groups: dict = {}
    for a, b, adjacency, permA, permB in touching:
        sig = (adjacency, _pair_signature(verts[a][permA], verts[b][permB], dt))
        groups.setdefault(sig, []).append((a, b, permA, permB))

    for sig in sorted(groups, key=str):
        adjacency = sig[0]
        items = groups[sig]
        a0, b0, pA0, pB0 = items[0]
        bx, by, w, rep_s = ss_radial_point_set(
            adjacency, verts[a0][pA0], verts[b0][pB0], dt,
            n_outer=cfg.singular_points, n_xi=cfg.singular_radial,
        )
        P = len(w)
        ia = np.array([it[0] for it in items])
        ib = np.array([it[1] for it in items])
        qa = np.array([it[2] for it in items])
        qb = np.array([it[3] for it in items])
        bsize = max(1, cfg.block_points // P)
        for s0 in range(0, len(items), bsize):
            sl_ = slice(s0, s0 + bsize)
            a, b, pa, pb = ia[sl_], ib[sl_], qa[sl_], qb[sl_]
            B = len(a)
            arange = np.arange(B)[:, None]
            vA = verts[a][arange, pa]
            vB = verts[b][arange, pb]
            X = np.einsum("pc,bcd->bpd", bx, vA)
            Y = np.einsum("pc,bcd->bpd", by, vB)
            D = X - Y
            r = np.linalg.norm(D, axis=2)
            np.maximum(r, 1e-14, out=r)
            s = r / dt
            w2 = (4.0 * areas[a] * areas[b])[:, None] * w[None, :]
            nxd = np.einsum("bd,bpd->bp", normals[a], D)
            nyd = np.einsum("bd,bpd->bp", normals[b], D)
            nxny = np.einsum("bd,bd->b", normals[a], normals[b])[:, None]
            rowsA = tsn[a][arange, pa]
            colsB = tsn[b][arange, pb]
            selfmask = a == b
            ccAB = np.einsum("bjd,bid->bji", curls[a], curls[b])

            # hats of all points in permuted-local order
            HX = np.broadcast_to(bx, (B,) + bx.shape)
            HY = np.broadcast_to(by, (B,) + by.shape)

            for k in lag_arr:
                p0, p1 = np.searchsorted(rep_s, [k - 1.0 - 1e-8, k + 2.0 + 1e-8])
                if p1 <= p0:
                    continue
                pslice = slice(p0, p1)
                v_sl, v_dl, v_dls, v_adl, v_adls, v_hn, v_hc = _family_values(
                    r[:, pslice], s[:, pslice], k, dt,
                    w2[:, pslice], nxd[:, pslice], nyd[:, pslice], nxny,
                )
                hx = HX[:, pslice]
                hy = HY[:, pslice]
                outs = {
                    "sl": _contract_paired(v_sl, hx, hy),
                    "dl": _contract_paired(v_dl, hx, hy),
                    "adl": _contract_paired(v_adl, hx, hy),
                    "dl_swap": _contract_paired(v_dls, hx, hy),
                    "adl_swap": _contract_paired(v_adls, hx, hy),
                    "hyp": _contract_paired(v_hn, hx, hy)
                    + v_hc.sum(axis=1)[:, None, None] * ccAB,
                }
                _scatter(acc, int(k), rowsA, colsB, selfmask, outs)

    # --- separated pairs (shared hats per layout) --------------------------
    ia, ib = np.triu_indices(T)
    keep = np.array([(a, b) not in touch_set for a, b in zip(ia, ib)], dtype=bool)
    ia, ib = ia[keep], ib[keep]
    if len(ia):
        cdist = np.linalg.norm(centers[ia] - centers[ib], axis=1)
        dmin_b = np.maximum(cdist - rad[ia] - rad[ib], 0.0)
        near = dmin_b < cfg.near_factor * h_surf
        order = np.argsort(dmin_b, kind="stable")
        ia, ib, near = ia[order], ib[order], near[order]

        for is_near in (True, False):
            sel = near == is_near
            if not np.any(sel):
                continue
            aa, bb = ia[sel], ib[sel]
            bary, wrule = triangle_rule(cfg.order_near if is_near else cfg.order_far)
            if is_near and cfg.near_levels > 0:
                bary, wrule = refine_bary(bary, wrule, cfg.near_levels)
            Pq = len(wrule)
            hat = bary
            bsize = max(1, cfg.block_points // (Pq * Pq))
            for s0 in range(0, len(aa), bsize):
                a = aa[s0 : s0 + bsize]
                b = bb[s0 : s0 + bsize]
                X = np.einsum("pc,ucd->upd", bary, verts[a])
                Y = np.einsum("pc,ucd->upd", bary, verts[b])
                D = X[:, :, None, :] - Y[:, None, :, :]
                r = np.linalg.norm(D, axis=3)
                np.maximum(r, 1e-14, out=r)
                s = r / dt
                wX = wrule[None, :] * areas[a][:, None]
                wY = wrule[None, :] * areas[b][:, None]
                w2 = wX[:, :, None] * wY[:, None, :]
                nxd = np.einsum("ud,uxyd->uxy", normals[a], D)
                nyd = np.einsum("ud,uxyd->uxy", normals[b], D)
                nxny = np.einsum("ud,ud->u", normals[a], normals[b])[:, None, None]
                rowsA, colsB = tsn[a], tsn[b]
                selfmask = np.zeros(len(a), dtype=bool)  # a < b here
                ccAB = np.einsum("ujd,uid->uji", curls[a], curls[b])

                smin, smax = s.min(), s.max()
                window = lag_arr[(lag_arr >= smin - 1.0 - 1e-9) & (lag_arr <= smax + 2.0 + 1e-9)]
                for k in window:
                    v_sl, v_dl, v_dls, v_adl, v_adls, v_hn, v_hc = _family_values(
                        r, s, k, dt, w2, nxd, nyd, nxny
                    )
                    outs = {
                        "sl": _contract_tensor_shared(v_sl, hat),
                        "dl": _contract_tensor_shared(v_dl, hat),
                        "adl": _contract_tensor_shared(v_adl, hat),
                        "dl_swap": _contract_tensor_shared(v_dls, hat),
                        "adl_swap": _contract_tensor_shared(v_adls, hat),
                        "hyp": _contract_tensor_shared(v_hn, hat)
                        + v_hc.sum(axis=(1, 2))[:, None, None] * ccAB,
                    }
                    _scatter(acc, int(k), rowsA, colsB, selfmask, outs)

    return acc.data


def _sparsify(mat: np.ndarray):
    nnz = np.count_nonzero(mat)
    if nnz < 0.25 * mat.size and mat.shape[0] > 100:
        return sp.csr_matrix(mat)
    return mat


def assemble_sequence(
    surf: SurfaceMesh,
    dt: float,
    n_lags: int,
    cfg: AssemblyConfig | None = None,
    cache_dir=None,
) -> RetardedMatrixSequence:
    """All four families for lags 0 .. n_lags-1, honoring causality.

    Lags whose three shells all clear the surface diameter are stored as
    symbolic zeros.  With cache_dir set, matrices are reloaded from disk
    when mesh, dt and quadrature configuration match.
    """
    if n_lags < 1:
        raise ValueError("need at least one lag")
    cfg = cfg or AssemblyConfig()
    kcut = causality_cutoff(surf.diameter(), dt)
    lags = list(range(0, min(n_lags - 1, kcut) + 1))

    key = None
    if cache_dir is not None:
        from fsibem.cache import load_sequence, sequence_key

        key = sequence_key(surf, dt, lags, cfg)
        cached = load_sequence(cache_dir, key)
        if cached is not None:
            return RetardedMatrixSequence(dt=dt, count=n_lags, k_nonzero=kcut, mats=cached)

    data = assemble_lags(surf, dt, lags, cfg)
    mats = {f: {k: _sparsify(m) for k, m in data[f].items()} for f in FAMILIES}

    if cache_dir is not None:
        from fsibem.cache import save_sequence

        save_sequence(cache_dir, key, mats, meta={"dt": dt, "lags": lags, "cfg": cfg.key()})
    return RetardedMatrixSequence(dt=dt, count=n_lags, k_nonzero=kcut, mats=mats)


def _single_lag(surf, dt, k, cfg, family):
    if k < 0:
        return np.zeros((surf.num_nodes, surf.num_nodes))
    kcut = causality_cutoff(surf.diameter(), dt)
    if k > kcut:
        return np.zeros((surf.num_nodes, surf.num_nodes))
    return assemble_lags(surf, dt, [k], cfg)[family][k]


def assemble_single_layer(surf, dt, k, cfg=None):
    """Lag-k single layer matrix (zero beyond causality or for k < 0)."""
    return _single_lag(surf, dt, k, cfg or AssemblyConfig(), "sl")


def assemble_double_layer(surf, dt, k, cfg=None):
    """Lag-k double layer matrix (kernel differentiates in y)."""
    return _single_lag(surf, dt, k, cfg or AssemblyConfig(), "dl")


def assemble_adjoint_double_layer(surf, dt, k, cfg=None):
    """Lag-k adjoint double layer matrix (kernel differentiates in x);
    assembled independently of the double layer, not by transposition."""
    return _single_lag(surf, dt, k, cfg or AssemblyConfig(), "adl")


def assemble_hypersingular(surf, dt, k, cfg=None):
    """Lag-k hypersingular matrix: normal-product part plus the
    surface-curl part weighted by the quadratic time weight."""
    return _single_lag(surf, dt, k, cfg or AssemblyConfig(), "hyp")
