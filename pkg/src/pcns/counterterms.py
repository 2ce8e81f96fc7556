"""Renormalization constants C0, C11, C12 (C1 = C11 + C12) and C2.

C0 is a single lattice sum.  The time-dependent constants are double sums over
mode pairs (k1, k2) with q = k1 + k2; after the inner time integral is done in
closed form every summand is a fixed 3x3 weight times

    bracket(t; a, b) = (1 - e^{-2bt}) / (2b) - int_0^t e^{-2b(t-s) - a s} ds,

where a = |k1|^2 + |k2|^2 + |q|^2 and b = |q|^2 (C2) or |k2|^2 (C11, C12).
The weights are therefore binned once by the integer pair (a, b) and the
constants are evaluated on any time grid by a cheap pass over the bins.

C12 has no closed form in the literature; it is obtained by repeating the C11
computation for the other ordering of the u1 u2 product (u3 minus its first
half), which gives the weight

    -(P2 P1 Pq k2)(P2 q)^T - (P2 P1 q)(P2 Pq k2)^T      (Pn = P(kn), Pq = P(q))

with the same prefactor and bracket as C11.

The values returned here are the literal sums.  With the -1/2 in front of the
nonlinearity the expectations of the zero modes of u2 u2 and u3 u1 are
``EXPECTATION_SCALE`` times these sums; the renormalized objects subtract that
scaled value.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import pi

import numpy as np

from .lattice import TorusLattice
from .noise import profile_function

try:
    from ._kernels import pair_bins as _pair_bins
    BACKEND = "cython"
except ImportError:  # pragma: no cover - exercised only without a compiler
    from ._kernels_py import pair_bins as _pair_bins
    BACKEND = "numpy"

EXPECTATION_SCALE = 0.25   # (-1/2)^2 from the two nonlinear vertices


def _box_modes(lattice: TorusLattice) -> np.ndarray:
    K = lattice.cutoff
    r = np.arange(-K, K + 1)
    m = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    return m[np.any(m != 0, axis=1)]


def counterterm_c0(lattice: TorusLattice, epsilon: float, profile: str = "bump") -> np.ndarray:
    """C0^{ij} = (2pi)^-3 sum_{k != 0} f(eps k)^2 / (2|k|^2) P^{ij}(k)."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    m = _box_modes(lattice).astype(float)
    k2 = np.sum(m ** 2, axis=1)
    w = profile_function(profile)(epsilon * np.sqrt(k2)) ** 2 / (2.0 * k2)
    P = np.eye(3)[None] - m[:, :, None] * m[:, None, :] / k2[:, None, None]
    return np.einsum("n,nij->ij", w, P) / (2.0 * pi) ** 3


def bracket(t, a, b) -> np.ndarray:
    """(1 - e^{-2bt})/(2b) - int_0^t e^{-2b(t-s)} e^{-a s} ds, elementwise.

    ``a`` and ``b`` are positive integers (or integer-valued arrays); the
    degenerate case a = 2b is handled exactly.
    """
    t = np.asarray(t, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    first = -np.expm1(-2.0 * b * t) / (2.0 * b)
    gap = a - 2.0 * b
    safe = np.where(gap == 0, 1.0, gap)
    tail = np.where(gap == 0, t, -np.expm1(-gap * t) / safe)
    return first - np.exp(-2.0 * b * t) * tail


@dataclass(frozen=True)
class PairBins:
    """Nonzero (a, b) bins and their 3x3 weights for one counterterm."""

    a: np.ndarray
    b: np.ndarray
    weights: np.ndarray

    @classmethod
    def compress(cls, dense: np.ndarray) -> "PairBins":
        a, b = np.nonzero(np.any(dense != 0.0, axis=2))
        return cls(a, b, dense[a, b].reshape(-1, 3, 3))

    def evaluate(self, times) -> np.ndarray:
        """sum over bins of weight * bracket(t; a, b) * (2pi)^-6, shape (nt, 3, 3)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if len(self.a) == 0:
            return np.zeros((len(times), 3, 3))
        br = bracket(times[:, None], self.a[None, :], self.b[None, :])
        return np.einsum("tn,nij->tij", br, self.weights) / (2.0 * pi) ** 6


@lru_cache(maxsize=16)
def _pair_sums(key: tuple, cutoff: int, epsilon: float, profile: str):
    modes = np.ascontiguousarray(
        np.stack(np.meshgrid(*(np.arange(-cutoff, cutoff + 1),) * 3, indexing="ij"), -1).reshape(-1, 3),
        dtype=np.int64)
    modes = modes[np.any(modes != 0, axis=1)]
    w = profile_function(profile)(epsilon * np.sqrt(np.sum(modes ** 2, axis=1).astype(float))) ** 2
    keep = w > 0
    modes = np.ascontiguousarray(modes[keep])
    w = np.ascontiguousarray(w[keep])
    if len(modes) == 0:
        empty = PairBins(np.zeros(0, int), np.zeros(0, int), np.zeros((0, 3, 3)))
        return empty, empty, empty
    kmax = int(np.max(np.sum(modes ** 2, axis=1)))
    bmax = max(kmax, 3 * cutoff * cutoff)
    amax = 2 * kmax + 3 * cutoff * cutoff
    d2, d11, d12 = _pair_bins(modes, w, cutoff, amax, bmax)
    return PairBins.compress(d2), PairBins.compress(d11), PairBins.compress(d12)


def pair_sums(lattice: TorusLattice, epsilon: float, profile: str = "bump"):
    """Binned weights (C2, C11, C12) for a lattice and mollification scale."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return _pair_sums(lattice.key(), lattice.cutoff, float(epsilon), profile)


def _at(bins: PairBins, t) -> np.ndarray:
    out = bins.evaluate(t)
    return out[0] if np.ndim(t) == 0 else out


def counterterm_c2(lattice: TorusLattice, epsilon: float, t, profile: str = "bump") -> np.ndarray:
    return _at(pair_sums(lattice, epsilon, profile)[0], t)


def counterterm_c11(lattice: TorusLattice, epsilon: float, t, profile: str = "bump") -> np.ndarray:
    return _at(pair_sums(lattice, epsilon, profile)[1], t)


def counterterm_c12(lattice: TorusLattice, epsilon: float, t, profile: str = "bump") -> np.ndarray:
    return _at(pair_sums(lattice, epsilon, profile)[2], t)


def counterterm_c1(lattice: TorusLattice, epsilon: float, t, profile: str = "bump") -> np.ndarray:
    _, b11, b12 = pair_sums(lattice, epsilon, profile)
    return _at(b11, t) + _at(b12, t)


@dataclass(frozen=True)
class CountertermSet:
    """All constants for one (lattice, eps) on a time grid."""

    epsilon: float
    lattice: TorusLattice
    times: np.ndarray
    c0: np.ndarray
    c11: np.ndarray
    c12: np.ndarray
    c2: np.ndarray
    profile: str = "bump"

    @property
    def c1(self) -> np.ndarray:
        return self.c11 + self.c12

    @classmethod
    def build(cls, lattice: TorusLattice, epsilon: float, times, profile: str = "bump") -> "CountertermSet":
        times = np.asarray(times, dtype=float)
        b2, b11, b12 = pair_sums(lattice, epsilon, profile)
        return cls(float(epsilon), lattice, times, counterterm_c0(lattice, epsilon, profile),
                   b11.evaluate(times), b12.evaluate(times), b2.evaluate(times), profile)

    def rows(self):
        """(epsilon, N, t, i, j, c0, c11, c2) records with 1-based indices."""
        for m, t in enumerate(self.times):
            for i in range(3):
                for j in range(3):
                    yield (self.epsilon, self.lattice.max_mode, float(t), i + 1, j + 1,
                           float(self.c0[i, j]), float(self.c11[m, i, j]), float(self.c2[m, i, j]))
