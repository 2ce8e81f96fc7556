"""Dyadic partition of unity, Littlewood-Paley blocks and Besov norms."""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, log2

import numpy as np

from .lattice import TorusLattice

INNER = 0.75        # theta vanishes below this radius
OUTER = 4.0 / 3.0   # chi vanishes beyond this radius


def _exp_tail(x: np.ndarray) -> np.ndarray:
    """exp(-1/x) for x > 0 and 0 otherwise; the building block of the bump
    exp(1 - 1/(1 - r^2)) = e * exp(-1/(1 - r^2))."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(r: np.ndarray, a: float = INNER, b: float = OUTER) -> np.ndarray:
    """C-infinity radial profile equal to 1 on [0, a] and 0 on [b, inf)."""
    r = np.asarray(r, dtype=float)
    hi = _exp_tail(b - r)
    lo = _exp_tail(r - a)
    return hi / (hi + lo)


def chi(z: np.ndarray) -> np.ndarray:
    return smooth_step(np.abs(z))


def theta(z: np.ndarray) -> np.ndarray:
    r = np.abs(z)
    return smooth_step(r / 2.0) - smooth_step(r)


@dataclass(frozen=True)
class BesovIndex:
    alpha: float
    p: float = np.inf
    q: float = np.inf

    def __post_init__(self):
        if not (1 <= self.p <= np.inf and 1 <= self.q <= np.inf):
            raise ValueError("p and q must lie in [1, inf]")


class DyadicPartition:
    """Multipliers of the blocks Delta_{-1}, ..., Delta_J on a lattice.

    ``chi`` is supported in ``|z| <= 4/3``, ``theta`` in ``3/4 <= |z| <= 8/3``
    and chi(z) + sum_j theta(2^-j z) telescopes to 1 because
    theta(z) = h(|z|/2) - h(|z|) for the smooth step h.
    """

    def __init__(self, lattice: TorusLattice):
        self.lattice = lattice
        self.J = ceil(log2(lattice.max_mode)) + 1
        r = lattice.kmag
        mult = [smooth_step(r)]
        for j in range(self.J + 1):
            s = 2.0 ** -j
            mult.append(smooth_step(r * s / 2.0) - smooth_step(r * s))
        self.multipliers = np.array(mult) * lattice.mask
        # blocks carrying no resolved mode are skipped in products
        self.active = [j for j in range(-1, self.J + 1)
                       if np.any(self.multipliers[j + 1] != 0)]
        # low[r] = multiplier of S_{j-1} for row r = j + 1 (sum of rows < r - 1)
        low = np.zeros_like(self.multipliers)
        np.cumsum(self.multipliers[:-2], axis=0, out=low[2:])
        self.low_multipliers = low

    @property
    def indices(self) -> range:
        return range(-1, self.J + 1)

    def multiplier(self, j: int) -> np.ndarray:
        if j < -1:
            raise ValueError("block index must be >= -1")
        if j > self.J:
            return np.zeros(self.lattice.shape)
        return self.multipliers[j + 1]

    def residual(self) -> float:
        """max |chi + sum theta_j - 1| over resolved modes."""
        total = self.multipliers.sum(axis=0)
        return float(np.max(np.abs(total - 1.0)[self.lattice.mask]))

    def blocks(self, c: np.ndarray) -> np.ndarray:
        """Spectral blocks; shape (J + 2,) + c.shape."""
        return self.multipliers.reshape((-1,) + (1,) * (c.ndim - 3) + self.lattice.shape) * c[None]

    def grid_blocks(self, c: np.ndarray) -> np.ndarray:
        """Point values of every block (inactive blocks left at zero)."""
        out = np.zeros((self.J + 2,) + c.shape[:-3] + (self.lattice.grid_points,) * 3)
        act = [j + 1 for j in self.active]
        out[act] = self.lattice.to_grid(self.multipliers[act].reshape(
            (len(act),) + (1,) * (c.ndim - 3) + self.lattice.shape) * c[None])
        return out


    def grid_low(self, c: np.ndarray, rows) -> np.ndarray:
        """Point values of S_{j-1} c for the block rows ``rows``; other rows zero."""
        out = np.zeros((self.J + 2,) + c.shape[:-3] + (self.lattice.grid_points,) * 3)
        rows = list(rows)
        if rows:
            out[rows] = self.lattice.to_grid(self.low_multipliers[rows].reshape(
                (len(rows),) + (1,) * (c.ndim - 3) + self.lattice.shape) * c[None])
        return out


def lp_block(part: DyadicPartition, c: np.ndarray, j: int) -> np.ndarray:
    return part.multiplier(j) * c


def _lp_norm(values: np.ndarray, p: float, cell: float) -> np.ndarray:
    axes = (-3, -2, -1)
    if np.isinf(p):
        return np.max(np.abs(values), axis=axes)
    return (np.sum(np.abs(values) ** p, axis=axes) * cell) ** (1.0 / p)


def block_lp_norms(part: DyadicPartition, c: np.ndarray, p: float = np.inf) -> np.ndarray:
    """||Delta_j u||_{L^p} for every block; shape (J + 2,) + leading axes of c."""
    vals = part.grid_blocks(c)
    return _lp_norm(vals, p, part.lattice.cell_volume)


def combine_block_norms(norms: np.ndarray, idx: BesovIndex, component_axes: int) -> float:
    """Weight block norms by 2^{j alpha}, take the l^q sum over j, then sum
    the remaining leading axes (field components)."""
    j = np.arange(-1, norms.shape[0] - 1, dtype=float)
    w = (2.0 ** (j * idx.alpha)).reshape((-1,) + (1,) * (norms.ndim - 1))
    a = w * norms
    if np.isinf(idx.q):
        per = np.max(a, axis=0)
    else:
        per = np.sum(a ** idx.q, axis=0) ** (1.0 / idx.q)
    return float(np.sum(per))


def besov_norm(part: DyadicPartition, c: np.ndarray, idx: BesovIndex | float) -> float:
    """Truncated B^alpha_{p,q} norm, summed over leading (component) axes.

    A bare float is read as the Hoelder-Besov index C^alpha = B^alpha_{inf,inf}.
    """
    if not isinstance(idx, BesovIndex):
        idx = BesovIndex(float(idx))
    norms = block_lp_norms(part, c, idx.p)
    return combine_block_norms(norms, idx, c.ndim - 3)


def besov_norms_many(part: DyadicPartition, c: np.ndarray, alphas) -> list[float]:
    """C^alpha norms of one field for several alphas, sharing the block work."""
    norms = block_lp_norms(part, c, np.inf)
    return [combine_block_norms(norms, BesovIndex(a), c.ndim - 3) for a in alphas]


def embedding_check(part: DyadicPartition, c: np.ndarray, p1: float, q1: float,
                    p2: float, q2: float, alpha: float) -> float:
    """||u||_{B^{alpha - d(1/p1 - 1/p2)}_{p2,q2}} / ||u||_{B^alpha_{p1,q1}}."""
    if p1 > p2 or q1 > q2:
        raise ValueError("embedding needs p1 <= p2 and q1 <= q2")
    shift = 3.0 * (1.0 / p1 - (0.0 if np.isinf(p2) else 1.0 / p2))
    top = besov_norm(part, c, BesovIndex(alpha - shift, p2, q2))
    bottom = besov_norm(part, c, BesovIndex(alpha, p1, q1))
    return top / bottom
