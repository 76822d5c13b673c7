"""On-disk cache for assembled retarded matrices.

Layout: <cache_dir>/<key>/meta.json plus one scipy .npz per family and
lag, named like sl_0012.npz.  The key hashes mesh fingerprint, time
step, lag list and quadrature configuration, so stale matrices are
never reused after a settings change.  Matrices are stored sparse; the
loader restores dense arrays when the stored density is high.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np
import scipy.sparse as sp

from fsibem.layerpot import FAMILIES


def sequence_key(surf, dt: float, lags, cfg) -> str:
    fingerprint = hashlib.sha256()
    fingerprint.update(np.ascontiguousarray(surf.nodes).tobytes())
    fingerprint.update(np.ascontiguousarray(surf.triangles).tobytes())
    payload = f"dt={dt!r};lags={list(lags)!r};cfg={cfg.key()}"
    fingerprint.update(payload.encode())
    return fingerprint.hexdigest()[:24]


def save_sequence(cache_dir, key: str, mats: dict, meta: dict) -> None:
    path = os.path.join(str(cache_dir), key)
    os.makedirs(path, exist_ok=True)
    stored = []
    for family in FAMILIES:
        for k, m in sorted(mats.get(family, {}).items()):
            name = f"{family}_{k:04d}"
            dense = not sp.issparse(m)
            mm = sp.csr_matrix(m) if dense else m
            sp.save_npz(os.path.join(path, name + ".npz"), mm)
            stored.append({"family": family, "lag": int(k), "dense": bool(dense)})
    with open(os.path.join(path, "meta.json"), "w") as fh:
        json.dump({"entries": stored, **meta}, fh, indent=1)


def load_sequence(cache_dir, key: str):
    path = os.path.join(str(cache_dir), key)
    meta_path = os.path.join(path, "meta.json")
    if not os.path.exists(meta_path):
        return None
    with open(meta_path) as fh:
        meta = json.load(fh)
    mats: dict = {f: {} for f in FAMILIES}
    try:
        for entry in meta["entries"]:
            name = f"{entry['family']}_{entry['lag']:04d}.npz"
            m = sp.load_npz(os.path.join(path, name))
            mats[entry["family"]][entry["lag"]] = m.toarray() if entry["dense"] else m
    except (OSError, ValueError):
        return None
    return mats
