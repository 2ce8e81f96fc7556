"""Paracontrolled solver for the remainder u4 and a direct solver for comparison.

The solution is split as u = u1 + u2 + u3 + u4 where u1, u2, u3 come from the
object bundle and u4 is written as

    u4 = A(u3 + u4) + u_sharp,
    A(w)^i = -1/2 sum_{i1, j} P^{i i1} D_j [pi_<(w^{i1}, K^j) + pi_<(w^j, K^{i1})].

u_sharp is advanced in mild form with an exponential integrator (frozen
forcing as predictor, linearly interpolated forcing as corrector), and u4 is
recovered from the ansatz at every node by a damped fixed-point iteration.
The resonant product pi_0(u4, u1) entering the forcing is assembled from the
ansatz through the Leray and trilinear commutators plus the precomputed
pi_0(P D K, u1) objects.

``direct_mollified_solve`` integrates the mollified equation for u itself with
the same time stepping and no splitting; at fixed eps the two must agree since
the constants removed by the renormalization are killed by the derivative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .counterterms import CountertermSet
from .etd import EtdCache
from .lattice import TorusLattice
from .littlewood_paley import DyadicPartition, besov_norm
from .noise import OuPath, build_k_field
from .objects import BundleState, BundleStepper, nonlinear_term, outer_grid
from .paraproducts import GridBlocks, commutator_c_sum, para_res


class SolverError(RuntimeError):
    """Numerical failure (non-finite values)."""


class FixedPointError(SolverError):
    """The ansatz fixed point did not converge."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class SolverParams:
    z: float = 0.55
    delta0: float = 0.1
    delta: float = 0.05
    beta: float = 0.06
    L: float = 10.0
    damping: float = 0.5
    tol: float = 1e-10
    max_iter: int = 400
    corrections: int = 1
    predictor_tol: float = 1e-6

    def __post_init__(self):
        z, d0, d, b = self.z, self.delta0, self.delta, self.beta
        checks = [
            (0.5 < z < 0.5 + d0, "need 1/2 < z < 1/2 + delta0"),
            (0.0 < d0 < 0.5, "need 0 < delta0 < 1/2"),
            (0.0 < d < min(d0, (1 - 2 * d0) / 3, (1 - z) / 4, 2 * z - 1),
             "need 0 < delta < delta0 ^ (1-2 delta0)/3 ^ (1-z)/4 ^ (2z-1)"),
            (d / 2 < b < z + 2 * d - 0.5, "need delta/2 < beta < z + 2 delta - 1/2"),
            (self.L > 0, "need L > 0"),
            (0.0 < self.damping <= 1.0, "damping must lie in (0, 1]"),
            (self.tol > 0 and self.max_iter >= 1, "need tol > 0 and max_iter >= 1"),
            (self.predictor_tol >= self.tol, "predictor_tol must be >= tol"),
            (self.corrections >= 0, "corrections must be >= 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)


# ------------------------------------------------------------------ ansatz
def ansatz_map(part: DyadicPartition, w, K) -> np.ndarray:
    """A(w) for a vector field w and K (coefficients or cached GridBlocks)."""
    lat = part.lattice
    Kb = K if isinstance(K, GridBlocks) else GridBlocks(part, K)
    if isinstance(w, GridBlocks):
        low = w.low
    else:
        # S_{j-1} vanishes for j < 1 and Delta_j K vanishes off the active blocks
        rows = [j + 1 for j in part.active if j >= 1]
        low = part.grid_low(w, rows)
    Q = np.einsum("raxyz,rbxyz->abxyz", low, Kb.blocks)     # pi_<(w^a, K^b)
    return nonlinear_term(lat, lat.from_grid(Q + np.swapaxes(Q, 0, 1)))


def recover_u4(part: DyadicPartition, u_sharp: np.ndarray, u3: np.ndarray, K,
               start: np.ndarray, params: SolverParams, step: int = 0,
               tol: float | None = None) -> tuple[np.ndarray, int]:
    """Damped fixed point for u4 = A(u3 + u4) + u_sharp.

    A is linear, so A(u3) is evaluated once and each sweep only maps u4.
    ``tol`` overrides ``params.tol`` (used for predictor sweeps).
    """
    tol = params.tol if tol is None else tol
    lat = part.lattice
    Kb = K if isinstance(K, GridBlocks) else GridBlocks(part, K)
    base = ansatz_map(part, u3, Kb) + u_sharp
    u4 = start
    theta = params.damping
    for it in range(1, params.max_iter + 1):
        target = ansatz_map(part, u4, Kb) + base
        new = (1.0 - theta) * u4 + theta * target
        change = lat.l2_norm(new - u4)
        scale = max(lat.l2_norm(new), 1e-300)
        u4 = new
        if not np.isfinite(change):
            raise SolverError(f"non-finite iterate at step {step}")
        if change <= tol * scale:
            return u4, it
    raise FixedPointError(f"ansatz fixed point did not converge at step {step}", step)


def ansatz_residual(part: DyadicPartition, u4, u3, u_sharp, K) -> float:
    lat = part.lattice
    r = u4 - ansatz_map(part, u3 + u4, K) - u_sharp
    return lat.l2_norm(r) / max(lat.l2_norm(u4), 1e-300)


# ------------------------------------------------------- resonant product
def _outer_res(part: DyadicPartition, f: np.ndarray, U1: GridBlocks) -> np.ndarray:
    """pi_0(f^a, u1^b) for a vector field f, shape (3, 3, ...)."""
    return para_res(part, f[:, None], U1)


def _low_rows(part: DyadicPartition) -> list:
    # S_{j-1} vanishes for j < 1 and the partner blocks vanish off the active set
    return [j + 1 for j in part.active if j >= 1]


def pi0_diamond_u4_u1(state: BundleState, w: np.ndarray, u_sharp: np.ndarray,
                      Wb: GridBlocks | None = None, dW_low: np.ndarray | None = None) -> np.ndarray:
    """pi_0<>(u4^a, u1^b) through the commutator expansion of the ansatz.

    With w = u3 + u4 the ansatz splits pi_0(u4, u1) into four paraproduct
    families plus pi_0(u_sharp, u1).  The family built on D_j K^j vanishes
    because K is divergence free.  The family built on D_j K^{i1} is expanded as

        pi_0(P pi_<(w, DK) - pi_<(w, P DK), u1) + C(w, P DK, u1) + w pi_0<>(P DK, u1)

    and the remaining two are plain resonant products.  ``Wb`` (blocks of w)
    and ``dW_low`` (grid values of S_{j-1} D_l w^a, axes (r, l, a)) may be
    passed in when the caller already has them.
    """
    part = state.part
    lat = part.lattice
    U1 = state.u1_blocks
    Kb = state.K_blocks
    Wb = Wb if Wb is not None else GridBlocks(part, w)
    if dW_low is None:
        dW_low = part.grid_low(1j * lat.k[:, None] * w[None], _low_rows(part))
    dKb = state.dK_blocks                                   # D_j K^a, axes (j, a)
    PdKb = state.pdk_blocks                                 # (P D_j K)^a, axes (j, a)

    # family on D_j K^{i1}: Leray commutator, trilinear commutator, P D K object
    low = lat.from_grid(np.einsum("rjxyz,rjaxyz->axyz", Wb.low, dKb.blocks))
    low_p = lat.from_grid(np.einsum("rjxyz,rjaxyz->axyz", Wb.low, PdKb.blocks))
    leray_comm = lat.leray(low) - low_p
    pdk = state.pdk_contracted                              # (a, j, b)
    comm = commutator_c_sum(part, Wb.map(lambda a: a[:, :, None, None]),
                            PdKb.map(lambda a: a[:, :, :, None]), U1,
                            gh=np.moveaxis(pdk, 1, 0))
    w_pdk = lat.from_grid(np.einsum("jxyz,ajbxyz->abxyz", Wb.values, lat.to_grid(pdk)))
    # family on D_j w^{i1} against K^j
    fam3 = lat.from_grid(np.einsum("rjaxyz,rjxyz->axyz", dW_low, Kb.blocks))
    # family on div w against K^{i1}
    div_low = sum(dW_low[:, j, j] for j in range(3))
    fam4 = lat.from_grid(np.einsum("rxyz,raxyz->axyz", div_low, Kb.blocks))
    # the resonant product is linear in its first slot, so the vector pieces share one
    vec = -0.5 * (leray_comm + lat.leray(fam3) + lat.leray(fam4)) + u_sharp
    return _outer_res(part, vec, U1) - 0.5 * (comm + w_pdk)


# ----------------------------------------------------------- sharp forcing
def sharp_forcing(state: BundleState, u4: np.ndarray, u_sharp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """phi_sharp at one node; also returns L(u3 + u4)."""
    part = state.part
    lat = part.lattice
    w = state.u3 + u4
    Wb = GridBlocks(part, w)
    wg = Wb.values
    u1g = state.u1_grid
    u2g = state.u2_grid
    U = u1g + u2g + wg
    G4 = outer_grid(U, U) - outer_grid(u1g, u1g) - outer_grid(u1g, u2g) - outer_grid(u2g, u1g)
    Lw = state.F3 + nonlinear_term(lat, lat.from_grid(G4))

    rows = _low_rows(part)
    Kb = state.K_blocks
    dKb = state.dK_blocks
    LW_low = part.grid_low(Lw, rows)
    dW_low = part.grid_low(1j * lat.k[:, None] * w[None], rows)   # (r, l, a)
    H = -np.einsum("raxyz,rbxyz->abxyz", LW_low, Kb.blocks)
    H += 2.0 * np.einsum("rlaxyz,rlbxyz->abxyz", dW_low, dKb.blocks)
    H += np.einsum("raxyz,rbxyz->abxyz", state.u1_blocks.low, Wb.blocks).transpose(1, 0, 2, 3, 4)
    Hs = lat.from_grid(H) + state.pi0_u3u1 + pi0_diamond_u4_u1(state, w, u_sharp, Wb, dW_low)

    G = lat.from_grid(outer_grid(u2g, wg) + outer_grid(wg, u2g) + outer_grid(wg, wg)) + state.u2u2
    G = G + Hs + np.swapaxes(Hs, 0, 1)
    return nonlinear_term(lat, G), Lw


# ------------------------------------------------------------------ results
@dataclass
class SolutionDecomposition:
    times: np.ndarray
    u: list = field(default_factory=list)
    u4: list = field(default_factory=list)
    u_sharp: list = field(default_factory=list)
    phi_sharp: list = field(default_factory=list)
    u1: list = field(default_factory=list)
    u2: list = field(default_factory=list)
    u3: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    norm_u: list = field(default_factory=list)          # ||u||_{-z}
    weighted_u4: list = field(default_factory=list)     # t^{(1/2-delta0+z)/2} ||u4||_{1/2-delta0}
    weighted_phi: list = field(default_factory=list)    # t^{delta+z} ||phi_sharp||_{-1-2delta}
    tau: float | None = None
    stopped_at: int | None = None

    def rows(self):
        """(t, norm_u, weighted_u4, residual, tau_hit) per accepted step."""
        for m in range(len(self.norm_u)):
            hit = self.stopped_at is not None and m == self.stopped_at
            yield (float(self.times[m]), self.norm_u[m], self.weighted_u4[m], self.residuals[m], hit)


@dataclass
class SolverStep:
    """One accepted node of the paracontrolled march."""

    m: int
    state: BundleState
    u: np.ndarray
    u4: np.ndarray
    u_sharp: np.ndarray
    phi: np.ndarray
    residual: float
    iterations: int


def _initial_u4(lat: TorusLattice, u0: np.ndarray | None, u1_0: np.ndarray) -> np.ndarray:
    if u0 is None:
        u0 = lat.zeros(3)
    return lat.leray(lat.truncate(u0)) - u1_0


def iter_paracontrolled(params: SolverParams, path: OuPath, u0: np.ndarray | None = None,
                        counterterms: CountertermSet | None = None,
                        part: DyadicPartition | None = None, stepper=None):
    """Yield a SolverStep at every grid time (no blow-up check)."""
    lat = path.lattice
    if stepper is None:
        stepper = BundleStepper(path, counterterms, part)
    part = stepper.part
    etd = EtdCache(lat.k2)
    prev = None
    for state in stepper:
        m = state.m
        if prev is None:
            u4 = _initial_u4(lat, u0, state.u1)
            us = u4.copy()                       # K(0) = 0 so A vanishes
            it = 0
            phi, _ = sharp_forcing(state, u4, us)
        else:
            pstate, pu4, pus, pphi, pu4_old = prev
            step = etd(state.t - pstate.t)
            guess = 2.0 * pu4 - pu4_old if pu4_old is not None else pu4
            us = step.frozen(pus, pphi)
            # a corrector follows, so the predictor only needs a rough u4
            ptol = params.predictor_tol if params.corrections else params.tol
            u4, it = recover_u4(part, us, state.u3, state.K_blocks, guess, params, m, ptol)
            phi, _ = sharp_forcing(state, u4, us)
            for _ in range(params.corrections):
                us_new = step.linear(pus, pphi, phi)
                # u4 - u_sharp = A(w) moves little between sweeps
                u4, it2 = recover_u4(part, us_new, state.u3, state.K_blocks, u4 + (us_new - us), params, m)
                us = us_new
                it += it2
                phi, _ = sharp_forcing(state, u4, us)
        u = state.u1 + state.u2 + state.u3 + u4
        if not np.all(np.isfinite(u)):
            raise SolverError(f"non-finite solution at step {m}")
        res = ansatz_residual(part, u4, state.u3, us, state.K_blocks) if m else 0.0
        yield SolverStep(m, state, u, u4, us, phi, res, it)
        prev = (state, u4, us, phi, prev[1] if prev is not None else None)


def solve_paracontrolled(params: SolverParams, path: OuPath, u0: np.ndarray | None = None,
                         counterterms: CountertermSet | None = None, keep: str = "all",
                         part: DyadicPartition | None = None, stepper=None,
                         callback=None) -> SolutionDecomposition:
    """March u_sharp on the path's time grid and assemble u = u1 + u2 + u3 + u4.

    ``keep`` selects what is stored per step: "all" keeps every family,
    "u" keeps only the assembled solution and u4, "none" keeps diagnostics
    only.  The run halts once the C^{-z} norm of u reaches ``params.L`` (the
    step that crosses is kept).  ``callback(step)`` receives every SolverStep.
    """
    if keep not in ("all", "u", "none"):
        raise ValueError("keep must be 'all', 'u' or 'none'")
    if stepper is None:
        stepper = BundleStepper(path, counterterms, part)
    part = stepper.part
    out = SolutionDecomposition(np.asarray(path.times))
    for step in iter_paracontrolled(params, path, u0, stepper=stepper):
        t = step.state.t
        if keep != "none":
            out.u.append(step.u)
            out.u4.append(step.u4)
        if keep == "all":
            out.u_sharp.append(step.u_sharp)
            out.phi_sharp.append(step.phi)
            out.u1.append(step.state.u1)
            out.u2.append(step.state.u2)
            out.u3.append(step.state.u3)
        out.residuals.append(step.residual)
        out.iterations.append(step.iterations)
        norm = besov_norm(part, step.u, -params.z)
        out.norm_u.append(norm)
        out.weighted_u4.append(weighted_norm(part, t, step.u4, 0.5 - params.delta0,
                                             (0.5 - params.delta0 + params.z) / 2))
        out.weighted_phi.append(weighted_norm(part, t, step.phi, -1 - 2 * params.delta,
                                              params.delta + params.z))
        if callback is not None:
            callback(step)
        if norm >= params.L:
            out.tau = min(t, params.L)
            out.stopped_at = step.m
            break
    return out


def direct_mollified_solve(params: SolverParams, path: OuPath, u0: np.ndarray | None = None,
                           nonlinear: bool = True) -> list[np.ndarray]:
    """Integrate L u = P xi_eps - 1/2 P D(u u) for v = u - u1 with the same ETD steps."""
    lat = path.lattice
    etd = EtdCache(lat.k2)

    def force(u):
        if not nonlinear:
            return lat.zeros(3)
        g = lat.to_grid(u)
        return nonlinear_term(lat, lat.from_grid(outer_grid(g, g)))

    v = _initial_u4(lat, u0, path.u1(0))
    u = path.u1(0) + v
    F = force(u)
    out = [u]
    for m in range(1, len(path.times)):
        step = etd(path.times[m] - path.times[m - 1])
        u1 = path.u1(m)
        vn = step.frozen(v, F)
        Fn = force(u1 + vn)
        for _ in range(params.corrections):
            vn = step.linear(v, F, Fn)
            Fn = force(u1 + vn)
        v, F = vn, Fn
        u = u1 + v
        if not np.all(np.isfinite(u)):
            raise SolverError(f"direct solve blew up at t = {path.times[m]}")
        out.append(u)
    return out


def blowup_time(part: DyadicPartition, times, u_family, L: float, z: float) -> float:
    """tau_L = inf{t : ||u(t)||_{-z} >= L} ^ L on the grid."""
    if not L > 0:
        raise ValueError("L must be positive")
    for t, u in zip(times, u_family):
        if besov_norm(part, u, -z) >= L:
            return min(float(t), L)
    return float(L)


def weighted_norm(part: DyadicPartition, t: float, c: np.ndarray, alpha: float, power: float) -> float:
    """t^power ||c||_alpha, skipping t = 0 (returns 0 there)."""
    if t <= 0:
        return 0.0
    return t ** power * besov_norm(part, c, alpha)


def ensure_k(path: OuPath) -> OuPath:
    if path.raw_K is None:
        build_k_field(path)
    return path
