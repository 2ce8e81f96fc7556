"""NumPy implementation of the pair sums behind the time-dependent counterterms.

For every pair of modes (k1, k2) of the dealiased box with q = k1 + k2 also in
the box and nonzero, the Leray-contracted weight of each counterterm is added to
a bin indexed by the integer decay rates that fix its time dependence:

    C2  : bin (a, |q|^2)
    C11 : bin (a, |k2|^2)
    C12 : bin (a, |k2|^2)

with a = |k1|^2 + |k2|^2 + |q|^2.  The compiled module ``_kernels`` exposes the
same ``pair_bins`` function.
"""

from __future__ import annotations

import numpy as np


def _proj(k: np.ndarray, k2: np.ndarray) -> np.ndarray:
    return np.eye(3)[None] - k[:, :, None] * k[:, None, :] / k2[:, None, None]


def _mv(P: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("nij,nj->ni", P, v)


def pair_bins(modes: np.ndarray, weights: np.ndarray, cutoff: int,
              amax: int, bmax: int, chunk: int = 200_000):
    """Return (bins_c2, bins_c11, bins_c12), each of shape (amax+1, bmax+1, 9).

    ``modes`` lists nonzero integer modes (n, 3); ``weights`` holds f(eps k)^2.
    """
    modes = np.asarray(modes, dtype=np.int64)
    weights = np.asarray(weights, dtype=float)
    n = len(modes)
    out2 = np.zeros((amax + 1, bmax + 1, 9))
    out11 = np.zeros_like(out2)
    out12 = np.zeros_like(out2)
    sq = np.sum(modes ** 2, axis=1)
    rows = max(1, chunk // max(n, 1))
    for start in range(0, n, rows):
        i1 = np.repeat(np.arange(start, min(start + rows, n)), n)
        i2 = np.tile(np.arange(n), min(start + rows, n) - start)
        q = modes[i1] + modes[i2]
        ok = np.all(np.abs(q) <= cutoff, axis=1) & np.any(q != 0, axis=1)
        i1, i2, q = i1[ok], i2[ok], q[ok]
        if len(i1) == 0:
            continue
        k1 = modes[i1].astype(float)
        k2 = modes[i2].astype(float)
        qf = q.astype(float)
        n1 = sq[i1].astype(float)
        n2 = sq[i2].astype(float)
        nq = np.sum(q ** 2, axis=1)
        a = sq[i1] + sq[i2] + nq
        s = weights[i1] * weights[i2]
        P1 = _proj(k1, n1)
        P2 = _proj(k2, n2)
        Pq = _proj(qf, nq.astype(float))

        # C2: (q.P2 q) Pq P1 Pq + (Pq P1 q)(Pq P2 q)^T
        A = Pq @ P1 @ Pq
        sc = np.einsum("ni,nij,nj->n", qf, P2, qf)
        u = _mv(Pq, _mv(P1, qf))
        v = _mv(Pq, _mv(P2, qf))
        W = sc[:, None, None] * A + u[:, :, None] * v[:, None, :]
        W *= (s / (2.0 * n1 * n2 * a))[:, None, None]
        np.add.at(out2, (a, nq), W.reshape(-1, 9))

        # C11: -(q.P1 k2) P2 Pq P2 - (P2 Pq P1 k2)(P2 q)^T
        pre = -(s / (4.0 * n1 * n2 * a))[:, None, None]
        B = P2 @ Pq @ P2
        s11 = np.einsum("ni,nij,nj->n", qf, P1, k2)
        x = _mv(P2, _mv(Pq, _mv(P1, k2)))
        y = _mv(P2, qf)
        W = s11[:, None, None] * B + x[:, :, None] * y[:, None, :]
        np.add.at(out11, (a, sq[i2]), (pre * W).reshape(-1, 9))

        # C12: -(P2 P1 Pq k2)(P2 q)^T - (P2 P1 q)(P2 Pq k2)^T
        x1 = _mv(P2, _mv(P1, _mv(Pq, k2)))
        x2 = _mv(P2, _mv(P1, qf))
        y2 = _mv(P2, _mv(Pq, k2))
        W = x1[:, :, None] * y[:, None, :] + x2[:, :, None] * y2[:, None, :]
        np.add.at(out12, (a, sq[i2]), (pre * W).reshape(-1, 9))
    return out2, out11, out12
