"""Truncated Fourier representation of periodic fields on the 3-torus.

Coefficients are stored in the real-FFT layout ``(..., M, M, M//2 + 1)`` of a
collocation grid with ``M`` points per axis.  The basis is
``e_k(x) = (2*pi)**(-3/2) * exp(i k.x)``, so the Fourier coefficient of a
pointwise product picks up a factor ``(2*pi)**(-3/2)`` relative to the plain
discrete convolution.  Every field is kept inside the dealiased box
``|k_i| <= cutoff``; products are evaluated on the grid and then cut back to
that box, which is alias free because ``3 * cutoff < M``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from math import floor, pi

import numpy as np
import scipy.fft as sfft

NORM = (2.0 * pi) ** -1.5  # e_k(x) = NORM * exp(i k.x)


class LatticeMismatch(ValueError):
    pass


class TorusLattice:
    """Mode box ``|k_i| <= max_mode`` with a 2/3-rule dealiasing cutoff.

    Parameters
    ----------
    max_mode : int
        N >= 2; largest represented wavenumber per axis.
    grid_points : int, optional
        Collocation points per axis.  Defaults to the smallest FFT-friendly
        even size that is at least ``2 * max_mode + 2``.
    dealias_fraction : Fraction
        Fields are supported on ``|k_i| <= floor(dealias_fraction * max_mode)``.
    """

    def __init__(self, max_mode: int, grid_points: int | None = None,
                 dealias_fraction: Fraction = Fraction(2, 3)):
        if max_mode < 2:
            raise ValueError("max_mode must be at least 2")
        dealias_fraction = Fraction(dealias_fraction)
        if not 0 < dealias_fraction <= 1:
            raise ValueError("dealias_fraction must lie in (0, 1]")
        minimum = 2 * max_mode + 2
        if grid_points is None:
            grid_points = sfft.next_fast_len(minimum)
            if grid_points % 2:
                grid_points = sfft.next_fast_len(grid_points + 1)
        if grid_points < minimum:
            raise ValueError(f"grid_points must be >= {minimum}")
        self.max_mode = int(max_mode)
        self.grid_points = int(grid_points)
        self.dealias_fraction = dealias_fraction
        self.cutoff = floor(dealias_fraction * max_mode)
        if 3 * self.cutoff >= self.grid_points:
            raise ValueError("dealias cutoff too large for an alias-free product")

        M = self.grid_points
        self.shape = (M, M, M // 2 + 1)
        kf = np.fft.fftfreq(M, 1.0 / M).astype(np.int64)
        kr = np.arange(M // 2 + 1, dtype=np.int64)
        k0, k1, k2 = np.meshgrid(kf, kf, kr, indexing="ij")
        self.kint = np.stack([k0, k1, k2])
        self.k = self.kint.astype(float)
        self.k2 = np.sum(self.k ** 2, axis=0)
        self.kmag = np.sqrt(self.k2)
        self.mask = np.all(np.abs(self.kint) <= self.cutoff, axis=0)
        inv = np.zeros_like(self.k2)
        nz = self.k2 > 0
        inv[nz] = 1.0 / self.k2[nz]
        self.inv_k2 = inv
        self.zero_mode = (0, 0, 0)
        # weight of each stored coefficient in a full-lattice sum (rfft halves the last axis)
        w = np.full(self.shape, 2.0)
        w[..., 0] = 1.0
        if M % 2 == 0:
            w[..., -1] = 1.0
        self.half_weight = w
        self.cell_volume = (2.0 * pi / M) ** 3

    # ------------------------------------------------------------------ identity
    def key(self) -> tuple:
        return (self.max_mode, self.grid_points, self.dealias_fraction)

    def __eq__(self, other) -> bool:
        return isinstance(other, TorusLattice) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return (f"TorusLattice(max_mode={self.max_mode}, grid_points={self.grid_points}, "
                f"dealias_fraction={self.dealias_fraction})")

    def check(self, other: "TorusLattice") -> None:
        if other != self:
            raise LatticeMismatch(f"{other!r} does not match {self!r}")

    # --------------------------------------------------------------- transforms
    def zeros(self, *lead: int) -> np.ndarray:
        return np.zeros(lead + self.shape, dtype=complex)

    def to_grid(self, c: np.ndarray) -> np.ndarray:
        """Point values on the collocation grid; leading axes are batched."""
        M = self.grid_points
        axes = (-3, -2, -1)
        return sfft.irfftn(c, s=(M, M, M), axes=axes) * (M ** 3 * NORM)

    def from_grid(self, u: np.ndarray) -> np.ndarray:
        """Coefficients of grid values, truncated to the dealiased box."""
        M = self.grid_points
        c = sfft.rfftn(u, axes=(-3, -2, -1)) * (1.0 / (M ** 3 * NORM))
        c *= self.mask
        return c

    def truncate(self, c: np.ndarray) -> np.ndarray:
        return c * self.mask

    def grid_coords(self) -> np.ndarray:
        x = 2.0 * pi * np.arange(self.grid_points) / self.grid_points
        return np.stack(np.meshgrid(x, x, x, indexing="ij"))

    # -------------------------------------------------------------- multipliers
    def leray(self, c: np.ndarray) -> np.ndarray:
        """Apply P(k) = I - k k^T/|k|^2 to a vector field (axis -4 of length 3)."""
        kc = np.sum(self.k * c, axis=-4)           # k broadcasts over leading axes
        out = c - self.k * (kc * self.inv_k2)[..., None, :, :, :]
        out[..., 0, 0, 0] = 0.0
        return out

    def leray_component(self, c: np.ndarray, i: int, j: int) -> np.ndarray:
        """Scalar multiplier P^{ij}(k) applied to a scalar field."""
        sym = (1.0 if i == j else 0.0) - self.k[i] * self.k[j] * self.inv_k2
        sym[0, 0, 0] = 0.0
        return c * sym

    def heat(self, c: np.ndarray, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError("heat propagation needs t >= 0")
        return c * np.exp(-self.k2 * t)

    def derivative(self, c: np.ndarray, j: int) -> np.ndarray:
        if j not in (0, 1, 2):
            raise ValueError("axis must be 0, 1 or 2")
        return c * (1j * self.k[j])

    def divergence(self, c: np.ndarray) -> np.ndarray:
        return 1j * np.sum(self.k * np.moveaxis(c, -4, 0), axis=0)

    def product(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Dealiased pointwise product of coefficient arrays (broadcasting)."""
        return self.from_grid(self.to_grid(f) * self.to_grid(g))

    def constant(self, value) -> np.ndarray:
        """Coefficients of a constant function (only the zero mode is set)."""
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + self.shape, dtype=complex)
        c[..., 0, 0, 0] = value / NORM
        return c

    def mean_value(self, c: np.ndarray) -> np.ndarray:
        """Spatial average of the field, i.e. the constant carried by e_0."""
        return np.real(c[..., 0, 0, 0]) * NORM

    def l2_norm(self, c: np.ndarray) -> float:
        """L2 norm of a scalar/vector field via Parseval (orthonormal e_k)."""
        return float(np.sqrt(np.sum(self.half_weight * np.abs(c) ** 2)))

    # ------------------------------------------------------------ mode listing
    def modes(self) -> np.ndarray:
        """All integer modes of the dealiased box, shape (n, 3), lexicographic."""
        r = np.arange(-self.cutoff, self.cutoff + 1)
        g = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1)
        return g.reshape(-1, 3)

    def gather(self, c: np.ndarray, modes: np.ndarray) -> np.ndarray:
        """Coefficients at the listed integer modes (any sign of k_3)."""
        M = self.grid_points
        modes = np.asarray(modes)
        neg = modes[:, 2] < 0
        m = np.where(neg[:, None], -modes, modes)
        vals = c[..., m[:, 0] % M, m[:, 1] % M, m[:, 2]]
        return np.where(neg, np.conj(vals), vals)

    def scatter(self, modes: np.ndarray, values: np.ndarray, lead: tuple = ()) -> np.ndarray:
        """Inverse of gather for modes with k_3 >= 0 (other entries are ignored)."""
        M = self.grid_points
        c = self.zeros(*lead)
        modes = np.asarray(modes)
        keep = modes[:, 2] >= 0
        m = modes[keep]
        c[..., m[:, 0] % M, m[:, 1] % M, m[:, 2]] = values[..., keep]
        return c * self.mask


def hermitian_defect(lattice: TorusLattice, c: np.ndarray) -> float:
    """Largest violation of c(-k) = conj(c(k)) inside the dealiased box."""
    modes = lattice.modes()
    # gather already conjugates for k3 < 0, so only the k3 = 0 plane can fail
    a = lattice.gather(c, modes)
    b = lattice.gather(c, -modes)
    return float(np.max(np.abs(a - np.conj(b)), initial=0.0))


@dataclass(frozen=True, eq=False)
class SpectralVectorField:
    """Three complex Fourier components on a lattice, optionally time-tagged."""

    lattice: TorusLattice
    coeffs: np.ndarray
    time_tag: float | None = None
    divergence_free: bool = field(default=False)

    def __post_init__(self):
        if self.coeffs.shape != (3,) + self.lattice.shape:
            raise ValueError("coeffs must have shape (3,) + lattice.shape")

    @classmethod
    def from_function(cls, lattice: TorusLattice, func, time_tag=None) -> "SpectralVectorField":
        """Sample ``func(x, y, z) -> (3, ...)`` on the grid and transform."""
        X = lattice.grid_coords()
        vals = np.asarray(func(*X), dtype=float)
        c = lattice.from_grid(vals)
        c[..., 0, 0, 0] = 0.0
        return cls(lattice, c, time_tag)

    @classmethod
    def single_mode(cls, lattice: TorusLattice, k, amplitude) -> "SpectralVectorField":
        """Real field a e_k + conj(a) e_{-k}."""
        k = np.asarray(k, dtype=int)
        a = np.asarray(amplitude, dtype=complex)
        modes = np.array([k, -k])
        vals = np.stack([a, np.conj(a)], axis=-1)
        return cls(lattice, lattice.scatter(modes, vals, lead=(3,)))

    def values(self) -> np.ndarray:
        return self.lattice.to_grid(self.coeffs)

    def replace(self, coeffs, divergence_free=None) -> "SpectralVectorField":
        df = self.divergence_free if divergence_free is None else divergence_free
        return SpectralVectorField(self.lattice, coeffs, self.time_tag, df)

    def max_divergence(self) -> float:
        return float(np.max(np.abs(self.lattice.divergence(self.coeffs))))


def leray_project(u: SpectralVectorField) -> SpectralVectorField:
    return u.replace(u.lattice.leray(u.coeffs), divergence_free=True)


def heat_propagate(u: SpectralVectorField, t: float) -> SpectralVectorField:
    return u.replace(u.lattice.heat(u.coeffs, t))


def spatial_derivative(u: SpectralVectorField, j: int) -> SpectralVectorField:
    return u.replace(u.lattice.derivative(u.coeffs, j))


def dealiased_product(lattice: TorusLattice, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Product of two scalar coefficient arrays on ``lattice``."""
    if f.shape[-3:] != lattice.shape or g.shape[-3:] != lattice.shape:
        raise LatticeMismatch("operands are not on this lattice")
    return lattice.product(f, g)


# ---------------------------------------------------------------------- CSV
def field_to_csv(u: SpectralVectorField, meta: dict | None = None) -> str:
    lat = u.lattice
    buf = io.StringIO()
    info = {"max_mode": lat.max_mode, "grid_points": lat.grid_points,
            "dealias_fraction": str(lat.dealias_fraction)}
    if u.time_tag is not None:
        info["time"] = repr(float(u.time_tag))
    info.update(meta or {})
    buf.write("# " + " ".join(f"{k}={v}" for k, v in info.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k1", "k2", "k3", "re1", "im1", "re2", "im2", "re3", "im3"])
    modes = lat.modes()
    vals = lat.gather(u.coeffs, modes)
    for n, k in enumerate(modes):
        row = [int(k[0]), int(k[1]), int(k[2])]
        for i in range(3):
            row += [repr(float(vals[i, n].real)), repr(float(vals[i, n].imag))]
        w.writerow(row)
    return buf.getvalue()


def field_from_csv(text: str) -> SpectralVectorField:
    lines = text.splitlines()
    head = dict(tok.split("=", 1) for tok in lines[0].lstrip("# ").split())
    lat = TorusLattice(int(head["max_mode"]), int(head["grid_points"]),
                       Fraction(head["dealias_fraction"]))
    rows = list(csv.reader(lines[2:]))
    modes = np.array([[int(r[0]), int(r[1]), int(r[2])] for r in rows])
    vals = np.array([[float(r[3 + 2 * i]) + 1j * float(r[4 + 2 * i]) for r in rows]
                     for i in range(3)])
    c = lat.scatter(modes, vals, lead=(3,))
    t = float(head["time"]) if "time" in head else None
    return SpectralVectorField(lat, c, t)
