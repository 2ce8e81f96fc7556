"""Experiments: coupled eps-ladder convergence, counterterm divergence and the
brute-force battery for the harmonic-analysis estimates.

Every study takes plain arguments (the CLI maps a RunConfig onto them) and
returns a report dataclass with a ``rows()`` method for CSV emission.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import pi

import numpy as np

from .counterterms import counterterm_c0, counterterm_c11, counterterm_c2
from .lattice import TorusLattice
from .littlewood_paley import DyadicPartition, besov_norm
from .noise import NoiseConfig, OuPath, build_k_field, sample_ou_path
from .objects import OBJECT_NAMES, BundleStepper, snapshot_difference, snapshot_norms
from .paraproducts import commutator_c, leray_para_commutator, para_lt, para_res
from .solver import SolverError, SolverParams, iter_paracontrolled

log = logging.getLogger(__name__)


# ------------------------------------------------------------------ helpers
def fit_power(x, y) -> float:
    """Least-squares slope of log y against log x (nan if under-determined)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def strictly_decreasing(values) -> bool:
    v = list(values)
    return all(b < a for a, b in zip(v, v[1:]))


def coupled_paths(lattice: TorusLattice, ladder, seed: int, T: float, steps: int,
                  profile: str = "bump") -> list[OuPath]:
    """One unmollified realization viewed at every eps of the ladder."""
    base = build_k_field(sample_ou_path(NoiseConfig(ladder[0], seed, lattice, T, steps, profile)))
    return [base.at_epsilon(e) for e in ladder]


# ------------------------------------------------------------------ convergence
@dataclass
class SeedDistances:
    seed: int
    bundle: list          # per consecutive pair: sup_t sum_objects ||Z_l - Z_{l+1}||
    objects: list         # per pair: {name: sup_t ||.||}
    solution: list        # per pair: sup_{t <= tau} ||u_l - u_{l+1}||_{-z}
    tau: list             # per level


def ladder_distances(params: SolverParams, paths: list[OuPath], part: DyadicPartition,
                     stride: int = 4, u0: np.ndarray | None = None) -> SeedDistances:
    """March the solver at every level in lockstep and compare neighbours.

    Bundle distances are sampled every ``stride`` grid steps (and at the final
    time); solution distances at every step until either level of the pair
    reaches its blow-up cutoff.
    """
    n = len(paths)
    times = paths[0].times
    last = len(times) - 1
    gens = [iter_paracontrolled(params, p, u0, stepper=BundleStepper(p, part=part)) for p in paths]
    obj = [dict.fromkeys(OBJECT_NAMES, 0.0) for _ in range(n - 1)]
    bundle = [0.0] * (n - 1)
    sol = [0.0] * (n - 1)
    halted = [False] * n
    tau = [min(float(times[-1]), params.L)] * n
    for steps in zip(*gens):
        m = steps[0].m
        for l, s in enumerate(steps):
            if not halted[l] and besov_norm(part, s.u, -params.z) >= params.L:
                halted[l] = True
                tau[l] = min(s.state.t, params.L)
        for l in range(n - 1):
            # the step that reaches the cutoff is still inside [0, tau]
            if tau[l] >= steps[l].state.t and tau[l + 1] >= steps[l].state.t:
                d = besov_norm(part, steps[l].u - steps[l + 1].u, -params.z)
                sol[l] = max(sol[l], d)
        if m % stride == 0 or m == last:
            snaps = [s.state.snapshot() for s in steps]
            for l in range(n - 1):
                norms = snapshot_norms(part, snapshot_difference(snaps[l], snaps[l + 1]), params.delta)
                for name, v in norms.items():
                    obj[l][name] = max(obj[l][name], v)
                bundle[l] = max(bundle[l], sum(norms.values()))
            del snaps
    return SeedDistances(paths[0].config.seed, bundle, obj, sol, tau)


@dataclass
class ConvergenceReport:
    ladder: list
    seeds: list
    per_seed: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)

    def _stat(self, key: str, q: float) -> list:
        if not self.per_seed:
            return [float("nan")] * (len(self.ladder) - 1)
        data = np.array([getattr(s, key) for s in self.per_seed])
        return [float(v) for v in np.quantile(data, q, axis=0)]

    @property
    def bundle_median(self) -> list:
        return self._stat("bundle", 0.5)

    @property
    def solution_median(self) -> list:
        return self._stat("solution", 0.5)

    def quartiles(self, key: str) -> tuple[list, list]:
        return self._stat(key, 0.25), self._stat(key, 0.75)

    def object_median(self, name: str) -> list:
        if not self.per_seed:
            return [float("nan")] * (len(self.ladder) - 1)
        data = np.array([[pair[name] for pair in s.objects] for s in self.per_seed])
        return [float(v) for v in np.median(data, axis=0)]

    def exponent(self, key: str) -> float:
        """Fitted decay exponent of the median distance against the finer eps of each pair."""
        return fit_power(self.ladder[1:], self._stat(key, 0.5))

    @property
    def bundle_decreasing(self) -> bool:
        return strictly_decreasing(self.bundle_median)

    @property
    def solution_decreasing(self) -> bool:
        return strictly_decreasing(self.solution_median)

    def rows(self):
        """(quantity, eps_coarse, eps_fine, q25, median, q75) records."""
        pairs = list(zip(self.ladder, self.ladder[1:]))
        for key in ("bundle", "solution"):
            lo, hi = self.quartiles(key)
            for (a, b), q1, md, q3 in zip(pairs, lo, self._stat(key, 0.5), hi):
                yield (key, a, b, q1, md, q3)
        for name in OBJECT_NAMES:
            for (a, b), md in zip(pairs, self.object_median(name)):
                yield (name, a, b, float("nan"), md, float("nan"))

    def seed_rows(self):
        """(seed, eps_coarse, eps_fine, bundle, solution) records."""
        pairs = list(zip(self.ladder, self.ladder[1:]))
        for s in self.per_seed:
            for (a, b), db, ds in zip(pairs, s.bundle, s.solution):
                yield (s.seed, a, b, db, ds)


def _convergence_task(args):
    params, lattice, ladder, seed, T, steps, profile, stride = args
    part = DyadicPartition(lattice)
    paths = coupled_paths(lattice, ladder, seed, T, steps, profile)
    return ladder_distances(params, paths, part, stride)


def run_convergence_study(params: SolverParams, lattice: TorusLattice, ladder, seeds,
                          T: float = 0.25, steps: int = 16, profile: str = "bump",
                          stride: int = 4, threads: int = 1) -> ConvergenceReport:
    ladder = [float(e) for e in ladder]
    seeds = [int(s) for s in seeds]
    if len(ladder) < 2:
        raise ValueError("the ladder needs at least two levels")
    report = ConvergenceReport(ladder, seeds)
    tasks = [(params, lattice, ladder, s, T, steps, profile, stride) for s in seeds]
    for seed, res in zip(seeds, _map(_convergence_task, tasks, threads)):
        if isinstance(res, Exception):
            log.warning("seed %d aborted: %s", seed, res)
            report.failures[seed] = str(res)
        else:
            report.per_seed.append(res)
    return report


def _safe(fn, arg):
    try:
        return fn(arg)
    except SolverError as exc:
        return exc


def _map(fn, tasks, threads: int):
    """Run tasks on a bounded process pool; results in task order."""
    if threads <= 1 or len(tasks) <= 1:
        return [_safe(fn, t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor
    from functools import partial
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(partial(_safe, fn), tasks))


# ------------------------------------------------------------------ divergence
@dataclass
class DivergenceReport:
    ladder: list
    t_star: float
    c0: list                 # diagonal entry C0^{11}
    c0_offdiag: list         # max |C0^{ij}|, i != j
    c11: list                # C11^{11}(t*)
    c11_zero: list           # max |C11(0)|
    c2: list                 # C2^{11}(t*)
    growth: float            # fitted exponent of C0 against 1/eps

    @property
    def c0_ratios(self) -> list:
        return [b / a for a, b in zip(self.c0, self.c0[1:])]

    def rows(self):
        for i, e in enumerate(self.ladder):
            yield (e, self.c0[i], self.c0_offdiag[i], self.c11[i], self.c11_zero[i], self.c2[i])


def run_divergence_study(lattice: TorusLattice, ladder, t_star: float = 0.125,
                         profile: str = "bump") -> DivergenceReport:
    ladder = [float(e) for e in ladder]
    off = ~np.eye(3, dtype=bool)
    c0, c0o, c11, c110, c2 = [], [], [], [], []
    for e in ladder:
        C0 = counterterm_c0(lattice, e, profile)
        c0.append(float(C0[0, 0]))
        c0o.append(float(np.max(np.abs(C0[off]))))
        c11.append(float(counterterm_c11(lattice, e, t_star, profile)[0, 0]))
        c110.append(float(np.max(np.abs(counterterm_c11(lattice, e, 0.0, profile)))))
        c2.append(float(counterterm_c2(lattice, e, t_star, profile)[0, 0]))
    growth = fit_power(1.0 / np.array(ladder), c0)
    return DivergenceReport(ladder, t_star, c0, c0o, c11, c110, c2, growth)


# ------------------------------------------------------------------ lemma battery
def convolution_sum(k, l: float, m: float, d: int = 3, radius: int = 160) -> float:
    """sum_{k1 + k2 = k, k1, k2 != 0} |k1|^-l |k2|^-m over the lattice Z^d.

    The sum runs over the ball |k1| <= radius; the remainder is replaced by
    its continuum value, valid once radius >> |k|.
    """
    k = np.asarray(k, dtype=float)
    if d != 3:
        raise ValueError("only d = 3 is implemented")
    r = np.arange(-radius, radius + 1, dtype=float)
    total = 0.0
    yy, zz = np.meshgrid(r, r, indexing="ij")
    for x in r:
        a2 = x * x + yy ** 2 + zz ** 2
        inside = (a2 <= radius * radius) & (a2 > 0)
        b2 = (x - k[0]) ** 2 + (yy - k[1]) ** 2 + (zz - k[2]) ** 2
        ok = inside & (b2 > 0)
        total += float(np.sum(a2[ok] ** (-l / 2) * b2[ok] ** (-m / 2)))
    s = l + m
    tail = 4.0 * pi * radius ** (d - s) / (s - d)
    return total + tail


@dataclass
class ConvolutionCheck:
    l: float
    m: float
    k: list
    sums: list
    slope: float

    @property
    def expected(self) -> float:
        return -(self.l + self.m - 3)


def convolution_slope(l: float, m: float, kmax: int = 64, kmin: int = 16,
                      radius: int = 160) -> ConvolutionCheck:
    """Fit the decay of the convolution sum along a coordinate axis, |k| = kmin..kmax."""
    if not (0 < l < 3 and 0 < m < 3 and l + m > 3):
        raise ValueError("need 0 < l, m < d and l + m > d")
    ks = []
    v = kmin
    while v <= kmax:
        ks.append(v)
        v *= 2
    sums = [convolution_sum((kk, 0, 0), l, m, radius=radius) for kk in ks]
    return ConvolutionCheck(l, m, ks, sums, fit_power(ks, sums))


def multiplier_difference_ratio(k1, k2, t: float, eta: float) -> float:
    """max_{i,j,l} |F(k1 + k2) - F(k2)| / (|k1|^eta t^{-(1-eta)/2}),
    F(x)^{ijl} = exp(-|x|^2 t) x^i Phat^{jl}(x)."""
    def F(x):
        x = np.asarray(x, dtype=float)
        n2 = x @ x
        P = np.eye(3) - np.outer(x, x) / n2
        return np.exp(-n2 * t) * x[:, None, None] * P[None]
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    diff = np.max(np.abs(F(k1 + k2) - F(k2)))
    return float(diff / (np.linalg.norm(k1) ** eta * t ** (-(1 - eta) / 2)))


def multiplier_scan(eta: float, box: int = 4, times=(1e-3, 1e-2, 1e-1, 1.0, 10.0)) -> float:
    """Largest ratio over k1, k2 in a box (k1, k2, k1 + k2 nonzero) and the given times."""
    r = np.arange(-box, box + 1)
    modes = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3)
    modes = modes[np.any(modes != 0, axis=1)].astype(float)
    best = 0.0
    for t in times:
        # vectorized over all (k1, k2) pairs
        x = modes[:, None, :] + modes[None, :, :]
        n2 = np.sum(x ** 2, axis=-1)
        valid = n2 > 0
        n2s = np.where(valid, n2, 1.0)
        Px = np.eye(3) - x[..., :, None] * x[..., None, :] / n2s[..., None, None]
        Fx = np.exp(-n2s * t)[..., None, None, None] * x[..., :, None, None] * Px[..., None, :, :]
        y = modes
        m2 = np.sum(y ** 2, axis=-1)
        Py = np.eye(3) - y[:, :, None] * y[:, None, :] / m2[:, None, None]
        Fy = np.exp(-m2 * t)[:, None, None, None] * y[:, :, None, None] * Py[:, None, :, :]
        diff = np.max(np.abs(Fx - Fy[None]), axis=(-3, -2, -1))
        scale = np.linalg.norm(modes, axis=1) ** eta * t ** (-(1 - eta) / 2)
        ratio = np.where(valid, diff / scale[:, None], 0.0)
        best = max(best, float(ratio.max()))
    return best


def random_field(lattice: TorusLattice, alpha: float, rng: np.random.Generator,
                 components: int = 1) -> np.ndarray:
    """Real random field with Fourier amplitudes ~ |k|^{-alpha - 3/2} (so it sits in C^alpha)."""
    M = lattice.grid_points
    shape = (components, M, M, M) if components > 1 else (M, M, M)
    c = lattice.from_grid(rng.standard_normal(shape))
    amp = np.where(lattice.k2 > 0, lattice.k2, 1.0) ** (-(alpha + 1.5) / 2)
    return lattice.truncate(amp * c)


def _linf(lattice: TorusLattice, c: np.ndarray) -> float:
    return float(np.max(np.abs(lattice.to_grid(c))))


def _ratios_paraproduct_linf(part, rng, n):
    b = -0.5
    lat = part.lattice
    out = []
    for _ in range(n):
        f = random_field(lat, 0.5, rng)
        g = random_field(lat, b, rng)
        out.append(besov_norm(part, para_lt(part, f, g), b) / (_linf(lat, f) * besov_norm(part, g, b)))
    return out


def _ratios_paraproduct_neg(part, rng, n):
    a, b = -0.3, -0.5
    lat = part.lattice
    out = []
    for _ in range(n):
        f = random_field(lat, a, rng)
        g = random_field(lat, b, rng)
        out.append(besov_norm(part, para_lt(part, f, g), a + b)
                   / (besov_norm(part, f, a) * besov_norm(part, g, b)))
    return out


def _ratios_resonant(part, rng, n):
    a, b = 0.6, -0.4
    lat = part.lattice
    out = []
    for _ in range(n):
        f = random_field(lat, a, rng)
        g = random_field(lat, b, rng)
        out.append(besov_norm(part, para_res(part, f, g), a + b)
                   / (besov_norm(part, f, a) * besov_norm(part, g, b)))
    return out


def _ratios_commutator(part, rng, n):
    a, b, c = 0.7, 0.4, -0.6
    lat = part.lattice
    out = []
    for _ in range(n):
        f = random_field(lat, a, rng)
        g = random_field(lat, b, rng)
        h = random_field(lat, c, rng)
        out.append(besov_norm(part, commutator_c(part, f, g, h), a + b + c)
                   / (besov_norm(part, f, a) * besov_norm(part, g, b) * besov_norm(part, h, c)))
    return out


def _ratios_leray_commutator(part, rng, n):
    a, b = 0.5, -0.7
    lat = part.lattice
    out = []
    for _ in range(n):
        u = random_field(lat, a, rng)
        v = random_field(lat, b, rng)
        num = max(besov_norm(part, leray_para_commutator(part, u, v, k, l), a + b)
                  for k in range(3) for l in range(k, 3))
        out.append(num / (besov_norm(part, u, a) * besov_norm(part, v, b)))
    return out


def _ratios_heat(part, rng, n):
    a, d, t = -0.5, 1.0, 0.01
    lat = part.lattice
    out = []
    for _ in range(n):
        u = random_field(lat, a, rng)
        out.append(t ** (d / 2) * besov_norm(part, lat.heat(u, t), a + d) / besov_norm(part, u, a))
    return out


def _ratios_leray(part, rng, n):
    a = -0.5
    lat = part.lattice
    out = []
    for _ in range(n):
        u = random_field(lat, a, rng)
        num = max(besov_norm(part, lat.leray_component(u, k, l), a) for k in range(3) for l in range(k, 3))
        out.append(num / besov_norm(part, u, a))
    return out


ESTIMATE_CHECKS = {
    "paraproduct_linf": _ratios_paraproduct_linf,
    "paraproduct_negative": _ratios_paraproduct_neg,
    "resonant": _ratios_resonant,
    "commutator": _ratios_commutator,
    "leray_commutator": _ratios_leray_commutator,
    "heat_smoothing": _ratios_heat,
    "leray_bound": _ratios_leray,
}


@dataclass
class ConstantCheck:
    name: str
    coarse: float      # max ratio on N
    fine: float        # max ratio on 2N

    @property
    def drift(self) -> float:
        return max(self.fine / self.coarse, self.coarse / self.fine)

    @property
    def stable(self) -> bool:
        return bool(np.isfinite(self.coarse) and np.isfinite(self.fine) and self.drift < 2.0)


def estimate_constants(N: int = 8, samples: int = 100, seed: int = 0) -> list[ConstantCheck]:
    """Empirical constants (max ratio over random fields) on N and 2N."""
    out = []
    parts = [DyadicPartition(TorusLattice(N)), DyadicPartition(TorusLattice(2 * N))]
    for i, (name, fn) in enumerate(ESTIMATE_CHECKS.items()):
        vals = []
        for part in parts:
            rng = np.random.default_rng([seed, i, part.lattice.max_mode])
            vals.append(float(np.max(fn(part, rng, samples))))
        out.append(ConstantCheck(name, *vals))
    return out


@dataclass
class LemmaReport:
    convolution: list
    multiplier: dict          # eta -> max ratio
    multiplier_decay: float   # both sides at large t on a fixed pair
    constants: list

    def rows(self):
        for c in self.convolution:
            yield ("convolution_slope", f"l={c.l},m={c.m}", c.slope, c.expected)
        for eta, v in self.multiplier.items():
            yield ("multiplier_ratio", f"eta={eta}", v, float("nan"))
        yield ("multiplier_large_t", "", self.multiplier_decay, 0.0)
        for c in self.constants:
            yield ("constant_" + c.name, f"N={c.coarse:.6g};2N={c.fine:.6g}", c.drift, 2.0)


def run_lemma_checks(N: int = 8, samples: int = 100, kmax: int = 64, seed: int = 0,
                     radius: int = 160) -> LemmaReport:
    conv = [convolution_slope(2, 2, kmax, radius=radius), convolution_slope(2.5, 2, kmax, radius=radius)]
    mult = {eta: multiplier_scan(eta) for eta in (0.25, 0.5, 0.75, 1.0)}
    k1, k2, t = np.array([1.0, 2.0, 0.0]), np.array([0.0, 1.0, 3.0]), 50.0
    F = lambda x: np.exp(-(x @ x) * t) * np.linalg.norm(x)
    decay = float(max(F(k1 + k2), F(k2)))
    return LemmaReport(conv, mult, decay, estimate_constants(N, samples, seed))
