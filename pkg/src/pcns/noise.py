"""Mollified space-time white noise and the stationary linear solution u1.

Each Fourier mode of u1 is an Ornstein-Uhlenbeck process

    dX(k) = -|k|^2 X(k) dt + f(eps k) P(k) dW(k),

sampled exactly on the time grid.  The Gaussians are generated per time index
from a counter-based Philox stream keyed by ``(seed, time_index)`` and drawn
over the whole dealiased box in a fixed order, so two runs with the same seed
and lattice see the same noise whatever ``eps`` is.  Because the dynamics are
linear, the path at scale ``eps`` is exactly ``f(eps k)`` times the
unmollified path, which is how the coupling across an eps ladder is realised.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import e

import numpy as np

from .etd import EtdCache
from .lattice import TorusLattice


def bump_profile(r: np.ndarray) -> np.ndarray:
    """f(x) = exp(1 - 1/(1 - |x|^2)) inside the unit ball, 0 outside; f(0) = 1."""
    r = np.abs(np.asarray(r, dtype=float))
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = e * np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


PROFILES = {"bump": bump_profile}


def profile_function(name: str):
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown cutoff profile {name!r}") from None


@dataclass(frozen=True)
class NoiseConfig:
    epsilon: float
    seed: int
    lattice: TorusLattice
    T: float = 0.25
    steps: int = 16
    profile: str = "bump"
    times: tuple | None = None
    refinement: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        profile_function(self.profile)
        grid = self.time_grid()
        if grid.size < 2 or np.any(np.diff(grid) <= 0) or grid[0] != 0.0:
            raise ValueError("time grid must start at 0 and increase strictly")

    def time_grid(self) -> np.ndarray:
        if self.times is not None:
            return np.asarray(self.times, dtype=float)
        if self.steps < 1 or not self.T > 0:
            raise ValueError("need T > 0 and at least one step")
        return np.linspace(0.0, self.T, self.steps + 1)

    def with_epsilon(self, epsilon: float) -> "NoiseConfig":
        return NoiseConfig(epsilon, self.seed, self.lattice, self.T, self.steps,
                           self.profile, self.times, self.refinement)


def profile_multiplier(lattice: TorusLattice, epsilon: float, profile: str = "bump") -> np.ndarray:
    """f(eps k) on the dealiased box (zero outside it and at k = 0)."""
    m = profile_function(profile)(epsilon * lattice.kmag) * lattice.mask
    m[0, 0, 0] = 0.0
    return m


def mollify(lattice: TorusLattice, epsilon: float, c: np.ndarray, profile: str = "bump") -> np.ndarray:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return c * profile_multiplier(lattice, epsilon, profile)


def _generator(seed: int, key: tuple) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & (2 ** 64 - 1), spawn_key=tuple(int(v) for v in key))
    return np.random.Generator(np.random.Philox(ss))


def raw_gaussians(lattice: TorusLattice, seed: int, time_index: int, level: int = 0) -> np.ndarray:
    """Unit complex Gaussians per mode and component with c(-k) = conj(c(k)).

    Draws a full box g(k), |k_i| <= cutoff, and pairs it as
    (g(k) + conj(g(-k))) / sqrt(2), so E|c(k)|^2 = 1 and E c(k)^2 = 0 for k != 0.
    ``level`` > 0 selects the independent stream used by bridge refinement.
    """
    K = lattice.cutoff
    n = 2 * K + 1
    rng = _generator(seed, (time_index,) if level == 0 else (time_index, level))
    g = (rng.standard_normal((3, n, n, n)) + 1j * rng.standard_normal((3, n, n, n))) / np.sqrt(2.0)
    c = (g + np.conj(g[:, ::-1, ::-1, ::-1])) / np.sqrt(2.0)
    M = lattice.grid_points
    idx = np.arange(-K, K + 1) % M
    out = lattice.zeros(3)
    out[:, idx[:, None, None], idx[None, :, None], np.arange(K + 1)[None, None, :]] = c[:, :, :, K:]
    out[:, 0, 0, 0] = 0.0
    return out


@dataclass
class OuPath:
    """Time-gridded u1 and its Duhamel antiderivative K (L K = u1, K(0) = 0).

    ``raw`` and ``raw_K`` hold the unmollified trajectories; the field at
    scale ``epsilon`` is ``multiplier * raw``.  Paths for different eps built
    from the same seed share these arrays.
    """

    config: NoiseConfig
    times: np.ndarray
    raw: np.ndarray
    multiplier: np.ndarray
    raw_K: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def lattice(self) -> TorusLattice:
        return self.config.lattice

    @property
    def epsilon(self) -> float:
        return self.config.epsilon

    def __len__(self) -> int:
        return len(self.times)

    def u1(self, m: int) -> np.ndarray:
        return self.multiplier * self.raw[m]

    def K(self, m: int) -> np.ndarray:
        if self.raw_K is None:
            raise RuntimeError("K has not been built; call build_k_field first")
        return self.multiplier * self.raw_K[m]

    def at_epsilon(self, epsilon: float) -> "OuPath":
        cfg = self.config.with_epsilon(epsilon)
        return OuPath(cfg, self.times, self.raw,
                      profile_multiplier(self.lattice, epsilon, cfg.profile), self.raw_K)

    def refine(self) -> "OuPath":
        """Same realization on the grid with every step halved.

        Midpoints are drawn from the exact Ornstein-Uhlenbeck bridge between
        neighbouring nodes, so the existing nodes are kept and the refined path
        has the law of an exact sample on the finer grid.  The midpoint
        Gaussians come from a stream keyed by (fine time index, refinement
        depth), so refinement is deterministic.
        """
        lat = self.lattice
        level = self.config.refinement + 1
        times = np.empty(2 * len(self.times) - 1)
        times[0::2] = self.times
        times[1::2] = 0.5 * (self.times[1:] + self.times[:-1])
        raw = np.empty((len(times),) + self.raw.shape[1:], dtype=complex)
        raw[0::2] = self.raw
        k2 = lat.k2
        inv2 = np.where(k2 > 0, 0.5 * lat.inv_k2, 0.0) * lat.mask
        for m in range(len(self.times) - 1):
            h = 0.5 * (self.times[m + 1] - self.times[m])
            a = np.exp(-k2 * h)
            mean = a * (self.raw[m] + self.raw[m + 1]) / (1.0 + a * a)
            var = inv2 * -np.expm1(-2.0 * k2 * h) / (1.0 + a * a)
            eta = np.sqrt(var) * raw_gaussians(lat, self.config.seed, 2 * m + 1, level)
            raw[2 * m + 1] = mean + lat.leray(eta)
        c = self.config
        cfg = NoiseConfig(c.epsilon, c.seed, lat, c.T, 2 * c.steps, c.profile, tuple(times), level)
        out = OuPath(cfg, times, raw, self.multiplier)
        return build_k_field(out) if self.raw_K is not None else out


def sample_ou_path(cfg: NoiseConfig) -> OuPath:
    """Exact stationary OU sampling on the configured time grid."""
    lat = cfg.lattice
    times = cfg.time_grid()
    k2 = lat.k2
    inv2 = np.where(k2 > 0, 0.5 * lat.inv_k2, 0.0) * lat.mask
    raw = np.empty((len(times), 3) + lat.shape, dtype=complex)
    raw[0] = lat.leray(np.sqrt(inv2) * raw_gaussians(lat, cfg.seed, 0))
    for m in range(1, len(times)):
        h = times[m] - times[m - 1]
        decay = np.exp(-k2 * h)
        sd = np.sqrt(inv2 * -np.expm1(-2.0 * k2 * h))
        eta = sd * raw_gaussians(lat, cfg.seed, m)
        raw[m] = decay * raw[m - 1] + lat.leray(eta)
    mult = profile_multiplier(lat, cfg.epsilon, cfg.profile)
    return OuPath(cfg, times, raw, mult)


def build_k_field(path: OuPath) -> OuPath:
    """Populate K with the exponential trapezoidal rule (exact for u1 linear
    between grid times)."""
    lat = path.lattice
    etd = EtdCache(lat.k2)
    K = np.empty_like(path.raw)
    K[0] = 0.0
    for m in range(1, len(path.times)):
        step = etd(path.times[m] - path.times[m - 1])
        K[m] = step.linear(K[m - 1], path.raw[m - 1], path.raw[m])
    path.raw_K = K
    return path


def duhamel_linear(lattice: TorusLattice, times: np.ndarray, forcing: np.ndarray,
                   initial: np.ndarray | None = None) -> np.ndarray:
    """Solve L w = forcing on the grid (forcing given at grid times)."""
    etd = EtdCache(lattice.k2)
    w = np.empty_like(forcing)
    w[0] = 0.0 if initial is None else initial
    for m in range(1, len(times)):
        step = etd(times[m] - times[m - 1])
        w[m] = step.linear(w[m - 1], forcing[m - 1], forcing[m])
    return w
