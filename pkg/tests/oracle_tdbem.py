"""Brute-force midpoint oracle for the retarded matrix families.

Independent of the production assembler: the per-shell integrands are
transcribed term by term (shell indicators applied pointwise on a
uniform midpoint grid), hats are the barycentric grid coordinates, and
sample pairs closer than 1e-12 contribute zero.  Matches sums of
``brute_force_pair`` calls by construction; used as the accuracy
reference at desk scale.
"""

import numpy as np

from fsibem.quadrature import _midpoint_grid, surface_curls, tri_area_normal

FOUR_PI = 4.0 * np.pi


def _y_weight(r, k, dt):
    """Literal three-shell quadratic weight."""
    out = np.zeros_like(r)
    for l, expr in (
        (k, lambda rr: (rr**2 - 2 * rr * (k + 1) * dt + ((k + 1) * dt) ** 2) / (2 * dt)),
        (k - 2, lambda rr: (rr**2 - 2 * rr * (k - 2) * dt + ((k - 2) * dt) ** 2) / (2 * dt)),
        (
            k - 1,
            lambda rr: (
                -2 * rr**2
                + 2 * rr * ((k - 1) * dt + k * dt)
                - (((k - 1) * dt) ** 2 + (k * dt) ** 2)
                + 2 * dt**2
            )
            / (2 * dt),
        ),
    ):
        if l < 0:
            continue
        m = (r >= l * dt) & (r <= (l + 1) * dt)
        out = np.where(m, expr(r), out)
    return out


def oracle_matrices(surf, dt, k, m=40, chunk_rows=400):
    """All four family matrices at lag k from midpoint sums.

    Returns dict family -> (N_s', N_s') ndarray.
    """
    ns = surf.num_nodes
    tsn = surf.tri_surface_nodes
    verts = surf.nodes[surf.triangles]
    out = {f: np.zeros((ns, ns)) for f in ("sl", "dl", "adl", "hyp")}

    grid = _midpoint_grid(m)
    shells = [(k, 0), (k - 1, 1), (k - 2, 2)]

    for a in range(surf.num_triangles):
        areaA, nA = tri_area_normal(verts[a])
        X = grid @ verts[a]
        wA = areaA / m**2
        curlA = surface_curls(verts[a])
        for b in range(surf.num_triangles):
            areaB, nB = tri_area_normal(verts[b])
            Y = grid @ verts[b]
            wB = areaB / m**2
            curlB = surface_curls(verts[b])
            w2 = wA * wB
            nxny = nA @ nB
            cc = curlA @ curlB.T  # [j, i]

            acc = {f: np.zeros((3, 3)) for f in ("sl", "dl", "adl")}
            acc_hyp_n = np.zeros((3, 3))
            acc_hyp_c = 0.0

            for s0 in range(0, len(X), chunk_rows):
                Xc = X[s0 : s0 + chunk_rows]
                Hc = grid[s0 : s0 + chunk_rows]
                D = Xc[:, None, :] - Y[None, :, :]
                r = np.sqrt((D * D).sum(-1))
                ok = r > 1e-12
                rs = np.where(ok, r, 1.0)
                nxd = D @ nA
                nyd = D @ nB

                val_sl = np.zeros_like(r)
                val_dl = np.zeros_like(r)
                val_adl = np.zeros_like(r)
                val_hyp_n = np.zeros_like(r)

                for l, piece in shells:
                    if l < 0:
                        continue
                    msk = (r >= l * dt) & (r <= (l + 1) * dt) & ok
                    if not msk.any():
                        continue
                    if piece == 0:
                        sl_w = -(k + 1) / rs + 1.0 / dt
                        dl1 = -(k + 1) / rs**3 + 1.0 / (dt * rs**2)
                        dl2 = -1.0 / (dt * rs**2)
                        adl = (k + 1) / rs**2 - 1.0 / (dt * rs)
                        hyp_n = -1.0 / (dt * rs)
                    elif piece == 1:
                        sl_w = (2 * k - 1) / rs - 2.0 / dt
                        dl1 = (2 * k - 1) / rs**3 - 2.0 / (dt * rs**2)
                        dl2 = 2.0 / (dt * rs**2)
                        adl = -(2 * k - 1) / rs**2 + 2.0 / (dt * rs)
                        hyp_n = 2.0 / (dt * rs)
                    else:
                        sl_w = -(k - 2) / rs + 1.0 / dt
                        dl1 = -(k - 2) / rs**3 + 1.0 / (dt * rs**2)
                        dl2 = -1.0 / (dt * rs**2)
                        adl = (k - 2) / rs**2 - 1.0 / (dt * rs)
                        hyp_n = -1.0 / (dt * rs)
                    val_sl += np.where(msk, sl_w, 0.0)
                    val_dl += np.where(msk, nyd * (dl1 + dl2), 0.0)
                    val_adl += np.where(msk, nxd * adl, 0.0)
                    val_hyp_n += np.where(msk, nxny * hyp_n, 0.0)

                yw = np.where(ok, _y_weight(r, k, dt), 0.0)
                val_adl += nxd * yw / rs**3
                val_hyp_c = yw / rs

                for f, val in (("sl", val_sl), ("dl", val_dl), ("adl", val_adl)):
                    acc[f] += np.einsum("xy,xj,yi->ji", val, Hc, grid)
                acc_hyp_n += np.einsum("xy,xj,yi->ji", val_hyp_n, Hc, grid)
                acc_hyp_c += val_hyp_c.sum()

            rows, cols = tsn[a], tsn[b]
            for f in ("sl", "dl", "adl"):
                np.add.at(out[f], (rows[:, None], cols[None, :]), acc[f] * w2 / FOUR_PI)
            hyp_blk = (acc_hyp_n + acc_hyp_c * cc) * w2 / FOUR_PI
            np.add.at(out["hyp"], (rows[:, None], cols[None, :]), hyp_blk)
    return out
