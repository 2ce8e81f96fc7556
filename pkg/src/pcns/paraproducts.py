"""Bony decomposition fg = pi_<(f,g) + pi_0(f,g) + pi_>(f,g) and commutators.

pi_<(f,g) = sum_j S_{j-1} f Delta_j g with S_{j-1} f = sum_{i <= j-2} Delta_i f,
pi_0(f,g) = sum_{|i-j| <= 1} Delta_i f Delta_j g, pi_>(f,g) = pi_<(g,f).

All products are evaluated on the collocation grid from block point values and
transformed back, so every piece is alias free on the dealiased box.
"""

from __future__ import annotations

import numpy as np

from .lattice import LatticeMismatch
from .littlewood_paley import DyadicPartition


class GridBlocks:
    """Point values of the Littlewood-Paley blocks of a (batched) field.

    Holds Delta_j u on the grid plus the derived sums used by the paraproducts:
    ``low[j] = S_{j-1} u`` and ``near[j] = Delta_{j-1} u + Delta_j u + Delta_{j+1} u``.
    """

    def __init__(self, part: DyadicPartition, c: np.ndarray):
        self.part = part
        self.lead = c.shape[:-3]
        b = part.grid_blocks(c)
        self.blocks = b
        low = np.zeros_like(b)
        # low[j+1] holds S_{j-1} = sum of blocks i <= j-2, i.e. array rows < j
        np.cumsum(b[:-2], axis=0, out=low[2:])
        self.low = low
        near = b.copy()
        near[1:] += b[:-1]
        near[:-1] += b[1:]
        self.near = near

    @property
    def values(self) -> np.ndarray:
        return self.blocks.sum(axis=0)

    def map(self, fn) -> "GridBlocks":
        """Reindex the leading field axes (``fn`` sees arrays with the block axis first)."""
        out = object.__new__(GridBlocks)
        out.part = self.part
        out.blocks = fn(self.blocks)
        out.low = fn(self.low)
        out.near = fn(self.near)
        out.lead = out.blocks.shape[1:-3]
        return out


def _blocks(part: DyadicPartition, x) -> GridBlocks:
    if isinstance(x, GridBlocks):
        if x.part.lattice != part.lattice:
            raise LatticeMismatch("block cache built on another lattice")
        return x
    if x.shape[-3:] != part.lattice.shape:
        raise LatticeMismatch("field shape does not match the lattice")
    return GridBlocks(part, x)


def _aligned(a: np.ndarray, lead: tuple, n: int) -> np.ndarray:
    # pad leading field axes so operands with different batch ranks broadcast
    return a.reshape(a.shape[:1] + (1,) * (n - len(lead)) + a.shape[1:])


def _block_sum(x: np.ndarray, xlead: tuple, y: np.ndarray, ylead: tuple) -> np.ndarray:
    n = max(len(xlead), len(ylead))
    return (_aligned(x, xlead, n) * _aligned(y, ylead, n)).sum(axis=0)


def para_lt(part: DyadicPartition, f, g) -> np.ndarray:
    F = _blocks(part, f)
    G = _blocks(part, g)
    return part.lattice.from_grid(_block_sum(F.low, F.lead, G.blocks, G.lead))


def para_gt(part: DyadicPartition, f, g) -> np.ndarray:
    return para_lt(part, g, f)


def para_res(part: DyadicPartition, f, g) -> np.ndarray:
    F = _blocks(part, f)
    G = _blocks(part, g)
    return part.lattice.from_grid(_block_sum(F.blocks, F.lead, G.near, G.lead))


def bony_pieces(part: DyadicPartition, f, g) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    F = _blocks(part, f)
    G = _blocks(part, g)
    return para_lt(part, F, G), para_res(part, F, G), para_lt(part, G, F)


def commutator_c(part: DyadicPartition, f, g, h) -> np.ndarray:
    """C(f,g,h) = pi_0(pi_<(f,g), h) - f pi_0(g,h), evaluated literally."""
    lat = part.lattice
    F = _blocks(part, f)
    H = _blocks(part, h)
    first = para_res(part, para_lt(part, F, g), H)
    second = lat.from_grid(F.values * lat.to_grid(para_res(part, g, H)))
    return first - second


def commutator_c_sum(part: DyadicPartition, f, g, h, gh: np.ndarray | None = None) -> np.ndarray:
    """sum_n C(f_n, g_n, h) over the first leading axis of f and g.

    ``gh`` may hold pi_0(g_n, h) already (leading axes of g, then of h).
    """
    lat = part.lattice
    F = _blocks(part, f)
    G = _blocks(part, g)
    H = _blocks(part, h)
    low = _block_sum(F.low, F.lead, G.blocks, G.lead).sum(axis=0)
    first = para_res(part, lat.from_grid(low), H)
    if gh is None:
        gh = para_res(part, G, H)
    fv = F.values
    fv = fv.reshape(fv.shape[:1] + (1,) * (gh.ndim - fv.ndim) + fv.shape[1:])
    second = lat.from_grid((fv * lat.to_grid(gh)).sum(axis=0))
    return first - second


def leray_para_commutator(part: DyadicPartition, u, v: np.ndarray, k: int, l: int) -> np.ndarray:
    """P^{kl} pi_<(u, v) - pi_<(u, P^{kl} v) for scalar fields u, v."""
    if k not in (0, 1, 2) or l not in (0, 1, 2):
        raise ValueError("component indices must be 0, 1 or 2")
    lat = part.lattice
    U = _blocks(part, u)
    return lat.leray_component(para_lt(part, U, v), k, l) - para_lt(part, U, lat.leray_component(v, k, l))


def leray_para_commutator_vec(part: DyadicPartition, u, V: np.ndarray) -> np.ndarray:
    """Vector form sum_l [P^{kl} pi_<(u, V^l) - pi_<(u, P^{kl} V^l)]."""
    lat = part.lattice
    U = _blocks(part, u)
    return lat.leray(para_lt(part, U, V)) - para_lt(part, U, lat.leray(V))
