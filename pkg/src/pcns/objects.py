"""Renormalized stochastic objects built from one noise path.

The objects live on the time grid of the path and are produced by a streaming
``BundleStepper``: at each grid time it advances u2 and u3 by one exponential
step and exposes the products needed downstream (Wick products, resonant
paraproducts and the P D K family).  Nothing is stored for past times, which
keeps memory flat in the number of steps.

Index conventions: component indices are 0-based.  Families of scalar objects
carry their indices as leading axes, e.g. ``wick[i, j]`` is u1^i <> u1^j and
``pdk_div[i, i1, j, j1]`` is pi_0(P^{i i1} D_j K^j, u1^{j1}).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .counterterms import EXPECTATION_SCALE, CountertermSet
from .etd import EtdCache
from .lattice import TorusLattice
from .littlewood_paley import DyadicPartition, besov_norm
from .noise import OuPath, build_k_field
from .paraproducts import GridBlocks

OBJECT_NAMES = ("u1", "u1u1", "u1u2", "u2u2", "pi0_u3u1", "pdk_div", "pdk_comp")


def object_exponents(delta: float) -> dict:
    """Hoelder-Besov exponents of the norms entering C_xi."""
    return {"u1": -0.5 - delta / 2, "u1u1": -1.0 - delta / 2, "u1u2": -0.5 - delta / 2,
            "u2u2": -delta, "pi0_u3u1": -delta, "pdk_div": -delta, "pdk_comp": -delta}


# ---------------------------------------------------------------- primitives
def outer_grid(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a^i b^j on the grid for two grid vector fields; shape (3, 3, M, M, M)."""
    return a[:, None] * b[None, :]


def nonlinear_term(lattice: TorusLattice, G: np.ndarray) -> np.ndarray:
    """-1/2 sum_{i1, j} P^{i i1} D_j G^{i1 j} for coefficients G of shape (3, 3, ...)."""
    div = 1j * np.einsum("jxyz,ajxyz->axyz", lattice.k, G)
    return -0.5 * lattice.leray(div)


def wick_u1u1(lattice: TorusLattice, u1: np.ndarray, c0: np.ndarray) -> np.ndarray:
    """u1^i u1^j - C0^{ij}, the constant entering through the zero mode."""
    g = lattice.to_grid(u1)
    return lattice.from_grid(outer_grid(g, g)) - lattice.constant(c0)


def product_u1u2(lattice: TorusLattice, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """u1^i u2^j (no counterterm is needed for this product)."""
    return lattice.from_grid(outer_grid(lattice.to_grid(u1), lattice.to_grid(u2)))


def wick_u2u2(lattice: TorusLattice, u2: np.ndarray, c2: np.ndarray) -> np.ndarray:
    g = lattice.to_grid(u2)
    return lattice.from_grid(outer_grid(g, g)) - lattice.constant(c2)


def pi0_diamond_u3_u1(part: DyadicPartition, u3, u1, c1: np.ndarray) -> np.ndarray:
    """pi_0(u3^i, u1^j) - C1^{ij}; ``u3`` and ``u1`` may be cached GridBlocks."""
    U3 = u3 if isinstance(u3, GridBlocks) else GridBlocks(part, u3)
    U1 = u1 if isinstance(u1, GridBlocks) else GridBlocks(part, u1)
    res = part.lattice.from_grid(np.einsum("raxyz,rbxyz->abxyz", U3.blocks, U1.near))
    return res - part.lattice.constant(c1)


def pdk_fields(lattice: TorusLattice, K: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The two scalar families P^{i i1} D_j K^j and P^{i i1} D_j K^{i1}, each (3, 3, 3, ...)."""
    dK = 1j * lattice.k[None, :] * K[:, None]          # dK[a, j] = D_j K^a
    P = np.eye(3)[:, :, None, None, None] - lattice.k[:, None] * lattice.k[None, :] * lattice.inv_k2
    P[..., 0, 0, 0] = 0.0
    div = np.stack([dK[j, j] for j in range(3)])       # div[j] = D_j K^j
    fam_div = P[:, :, None] * div[None, None]
    fam_comp = P[:, :, None] * dK[None]
    return fam_div, fam_comp


def pi0_pdk_u1(part: DyadicPartition, K: np.ndarray, u1) -> tuple[np.ndarray, np.ndarray]:
    """pi_0 of both P D K families against u1^{j1}; each has shape (3, 3, 3, 3, ...).

    No constant is subtracted: the zeroth chaos of these products vanishes.
    """
    lat = part.lattice
    U1 = u1 if isinstance(u1, GridBlocks) else GridBlocks(part, u1)
    out = []
    for fam in pdk_fields(lat, K):
        F = GridBlocks(part, fam)
        grid = np.einsum("rabcxyz,rdxyz->abcdxyz", F.blocks, U1.near)
        out.append(lat.from_grid(grid))
    return out[0], out[1]


# ------------------------------------------------------------------- stepping
@dataclass
class BundleState:
    """Objects at one grid time.  Expensive products are computed on demand."""

    stepper: "BundleStepper"
    m: int
    t: float
    u1: np.ndarray
    K: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    F2: np.ndarray          # L u2 at this time
    F3: np.ndarray          # L u3 at this time

    @property
    def lattice(self) -> TorusLattice:
        return self.stepper.lattice

    @property
    def part(self) -> DyadicPartition:
        return self.stepper.part

    @property
    def c0(self) -> np.ndarray:
        return self.stepper.counterterms.c0

    @property
    def c1(self) -> np.ndarray:
        """Constant subtracted from pi_0(u3, u1) at this time."""
        return self.stepper.scale * self.stepper.counterterms.c1[self.m]

    @property
    def c2(self) -> np.ndarray:
        return self.stepper.scale * self.stepper.counterterms.c2[self.m]

    @cached_property
    def u1_blocks(self) -> GridBlocks:
        return GridBlocks(self.part, self.u1)

    @cached_property
    def K_blocks(self) -> GridBlocks:
        return GridBlocks(self.part, self.K)

    @cached_property
    def dK_blocks(self) -> GridBlocks:
        """Blocks of D_l K^b with leading axes (l, b)."""
        dK = 1j * self.lattice.k[:, None] * self.K[None]
        return GridBlocks(self.part, dK)

    @cached_property
    def pdk_blocks(self) -> GridBlocks:
        """Blocks of sum_{i1} P^{a i1} D_j K^{i1} with leading axes (j, a)."""
        dK = 1j * self.lattice.k[:, None] * self.K[None]
        return GridBlocks(self.part, self.lattice.leray(dK))

    @cached_property
    def u1_grid(self) -> np.ndarray:
        return self.u1_blocks.values

    @cached_property
    def u2_grid(self) -> np.ndarray:
        return self.lattice.to_grid(self.u2)

    @cached_property
    def wick(self) -> np.ndarray:
        return self.lattice.from_grid(outer_grid(self.u1_grid, self.u1_grid)) - self.lattice.constant(self.c0)

    @cached_property
    def u1u2(self) -> np.ndarray:
        return self.lattice.from_grid(outer_grid(self.u1_grid, self.u2_grid))

    @cached_property
    def u2u2(self) -> np.ndarray:
        return self.lattice.from_grid(outer_grid(self.u2_grid, self.u2_grid)) - self.lattice.constant(self.c2)

    @cached_property
    def pi0_u3u1(self) -> np.ndarray:
        return pi0_diamond_u3_u1(self.part, self.u3, self.u1_blocks, self.c1)

    @cached_property
    def pdk(self) -> tuple[np.ndarray, np.ndarray]:
        return pi0_pdk_u1(self.part, self.K, self.u1_blocks)

    @cached_property
    def pdk_contracted(self) -> np.ndarray:
        """sum_{i1} pi_0(P^{a i1} D_j K^{i1}, u1^b) with axes (a, j, b)."""
        if "pdk" in self.__dict__:
            return self.pdk[1].sum(axis=1)
        grid = np.einsum("rjaxyz,rbxyz->ajbxyz", self.pdk_blocks.blocks, self.u1_blocks.near)
        return self.lattice.from_grid(grid)

    def snapshot(self) -> dict:
        """The seven objects of the bundle as coefficient arrays."""
        fam_div, fam_comp = self.pdk
        return {"u1": self.u1, "u1u1": self.wick, "u1u2": self.u1u2, "u2u2": self.u2u2,
                "pi0_u3u1": self.pi0_u3u1, "pdk_div": fam_div, "pdk_comp": fam_comp}


def snapshot_norms(part: DyadicPartition, snap: dict, delta: float) -> dict:
    """Besov norm of each object (summed over its component indices)."""
    ex = object_exponents(delta)
    out = {}
    for name in OBJECT_NAMES:
        c = snap[name]
        if c.ndim > 5:
            # chunk the leading axis to bound the memory of the block transforms
            out[name] = float(sum(besov_norm(part, c[a], ex[name]) for a in range(c.shape[0])))
        else:
            out[name] = besov_norm(part, c, ex[name])
    return out


def snapshot_difference(a: dict, b: dict) -> dict:
    return {name: a[name] - b[name] for name in OBJECT_NAMES}


class BundleStepper:
    """Streams BundleState objects along the time grid of a noise path.

    ``scale`` multiplies the literal counterterm sums C1, C2 before they are
    subtracted (see ``counterterms.EXPECTATION_SCALE``).
    """

    def __init__(self, path: OuPath, counterterms: CountertermSet | None = None,
                 part: DyadicPartition | None = None, scale: float = EXPECTATION_SCALE):
        if path.raw_K is None:
            build_k_field(path)
        self.path = path
        self.lattice = path.lattice
        self.part = part if part is not None else DyadicPartition(self.lattice)
        self.part.lattice.check(self.lattice)
        if counterterms is None:
            counterterms = CountertermSet.build(self.lattice, path.epsilon, path.times,
                                                path.config.profile)
        if counterterms.epsilon != path.epsilon:
            raise ValueError("counterterms were computed for another epsilon")
        if len(counterterms.times) != len(path.times) or np.any(counterterms.times != path.times):
            raise ValueError("counterterms and path use different time grids")
        self.lattice.check(counterterms.lattice)
        self.counterterms = counterterms
        self.scale = scale
        self.etd = EtdCache(self.lattice.k2)

    def _forcing2(self, u1g: np.ndarray) -> np.ndarray:
        return nonlinear_term(self.lattice, self.lattice.from_grid(outer_grid(u1g, u1g)))

    def _forcing3(self, u1g: np.ndarray, u2g: np.ndarray) -> np.ndarray:
        G = outer_grid(u1g, u2g)
        return nonlinear_term(self.lattice, self.lattice.from_grid(G + np.swapaxes(G, 0, 1)))

    def __len__(self) -> int:
        return len(self.path.times)

    def __iter__(self):
        lat = self.lattice
        path = self.path
        times = path.times
        u2 = lat.zeros(3)
        u3 = lat.zeros(3)
        prev = None
        for m, t in enumerate(times):
            u1 = path.u1(m)
            u1g = lat.to_grid(u1)
            F2 = self._forcing2(u1g)
            if prev is not None:
                step = self.etd(t - times[m - 1])
                u2 = step.linear(prev.u2, prev.F2, F2)
            u2g = lat.to_grid(u2)
            F3 = self._forcing3(u1g, u2g)
            if prev is not None:
                u3 = step.linear(prev.u3, prev.F3, F3)
            state = BundleState(self, m, float(t), u1, path.K(m), u2, u3, F2, F3)
            state.__dict__["u2_grid"] = u2g
            yield state
            prev = state


def norm_times(n_times: int, stride: int) -> list[int]:
    """Grid indices at which sup-in-time norms are sampled (always includes the end)."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    idx = list(range(0, n_times, stride))
    if idx[-1] != n_times - 1:
        idx.append(n_times - 1)
    return idx


def bundle_norm(per_time: list[dict]) -> float:
    """C_xi = sup over sampled times of the sum of the seven object norms."""
    if not per_time:
        return 0.0
    return float(max(sum(d[name] for name in OBJECT_NAMES) for d in per_time))


def bundle_norms(path: OuPath, delta: float, stride: int = 1,
                 counterterms: CountertermSet | None = None) -> tuple[float, list[dict]]:
    """Run the stepper and return C_xi with the per-time norm tables."""
    stepper = BundleStepper(path, counterterms)
    keep = set(norm_times(len(stepper), stride))
    table = []
    for state in stepper:
        if state.m in keep:
            d = snapshot_norms(stepper.part, state.snapshot(), delta)
            d["t"] = state.t
            table.append(d)
    return bundle_norm(table), table


def build_u2(path: OuPath) -> np.ndarray:
    """u2 on every grid time, shape (n_times, 3, ...)."""
    return np.array([s.u2 for s in BundleStepper(path, _zero_counterterms(path))])


def build_u3(path: OuPath) -> np.ndarray:
    return np.array([s.u3 for s in BundleStepper(path, _zero_counterterms(path))])


def _zero_counterterms(path: OuPath) -> CountertermSet:
    z = np.zeros((len(path.times), 3, 3))
    return CountertermSet(path.epsilon, path.lattice, path.times, np.zeros((3, 3)), z, z, z,
                          path.config.profile)
