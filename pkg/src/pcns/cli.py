"""Command line entry point ``pcns``.

Every subcommand writes CSV files into ``--out`` whose first line records the
package version and the config hash, so reruns with the same inputs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, parse_seeds
from .counterterms import CountertermSet
from .lattice import SpectralVectorField, field_to_csv
from .littlewood_paley import DyadicPartition
from .noise import NoiseConfig, build_k_field, sample_ou_path
from .objects import OBJECT_NAMES, BundleStepper, norm_times, snapshot_norms
from .solver import FixedPointError, SolverError, solve_paracontrolled
from . import studies, trees

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_FIXED_POINT = 0, 2, 3, 4

log = logging.getLogger("pcns")


def _header(cfg: RunConfig, what: str) -> str:
    return f"# pcns {__version__} {what} config={cfg.hash()}"


def _write_csv(path: Path, header: str, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def common(fn):
    fn = click.option("--threads", type=int, default=1, show_default=True, help="Worker processes.")(fn)
    fn = click.option("--seeds", "seeds", default=None, help="Seed list, e.g. '1-8,12'.")(fn)
    fn = click.option("--out", "out", type=click.Path(file_okay=False), default=None,
                      help="Output directory (overrides the config).")(fn)
    fn = click.option("--config", "config", type=click.Path(dir_okay=False), default=None,
                      help="INI run configuration.")(fn)
    return fn


def _setup(config, seeds, out) -> tuple[RunConfig, Path]:
    try:
        cfg = load_config(config)
        if seeds:
            cfg = cfg.with_seeds(parse_seeds(seeds))
        cfg.lattice()
    except (ConfigError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    return cfg, Path(out or cfg.out)


def _epsilons(cfg: RunConfig, epsilon) -> list[float]:
    return [float(epsilon)] if epsilon is not None else list(cfg.epsilons)


@click.group()
@click.version_option(__version__, prog_name="pcns")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Paracontrolled stochastic Navier-Stokes experiments on the 3-torus."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command("sample-noise")
@common
@click.option("--epsilon", type=float, default=None)
def sample_noise(config, out, seeds, threads, epsilon):
    """Write u1 at the final time for every seed and eps."""
    cfg, outdir = _setup(config, seeds, out)
    lat = cfg.lattice()
    for seed in cfg.seeds:
        path = sample_ou_path(NoiseConfig(cfg.epsilons[0], seed, lat, cfg.T, cfg.steps, cfg.profile))
        for e in _epsilons(cfg, epsilon):
            p = path.at_epsilon(e)
            u = SpectralVectorField(lat, p.u1(len(p.times) - 1), float(p.times[-1]), True)
            text = field_to_csv(u, {"seed": seed, "epsilon": repr(e), "config": cfg.hash()})
            f = outdir / f"u1_seed{seed}_eps{e:g}.csv"
            f.parent.mkdir(parents=True, exist_ok=True)
            f.write_text(text)
    sys.exit(EXIT_OK)


@main.command("build-objects")
@common
@click.option("--epsilon", type=float, default=None)
def build_objects(config, out, seeds, threads, epsilon):
    """Norms of the seven renormalized objects along the path."""
    cfg, outdir = _setup(config, seeds, out)
    lat = cfg.lattice()
    part = DyadicPartition(lat)
    rows = []
    for seed in cfg.seeds:
        base = build_k_field(sample_ou_path(NoiseConfig(cfg.epsilons[0], seed, lat, cfg.T,
                                                        cfg.steps, cfg.profile)))
        for e in _epsilons(cfg, epsilon):
            path = base.at_epsilon(e)
            keep = set(norm_times(len(path.times), cfg.stride))
            for state in BundleStepper(path, part=part):
                if state.m in keep:
                    norms = snapshot_norms(part, state.snapshot(), cfg.solver.delta)
                    rows.append([seed, e, state.t] + [norms[n] for n in OBJECT_NAMES])
    _write_csv(outdir / "objects.csv", _header(cfg, "build-objects"),
               ["seed", "epsilon", "t"] + list(OBJECT_NAMES), rows)
    sys.exit(EXIT_OK)


@main.command("counterterms")
@common
@click.option("--epsilon", type=float, default=None)
def counterterms(config, out, seeds, threads, epsilon):
    """C0, C11 and C2 on the time grid for every eps (1-based indices)."""
    cfg, outdir = _setup(config, seeds, out)
    lat = cfg.lattice()
    times = NoiseConfig(cfg.epsilons[0], 0, lat, cfg.T, cfg.steps, cfg.profile).time_grid()
    rows = []
    for e in _epsilons(cfg, epsilon):
        rows.extend(CountertermSet.build(lat, e, times, cfg.profile).rows())
    _write_csv(outdir / "counterterms.csv", _header(cfg, "counterterms"),
               ["epsilon", "N", "t", "i", "j", "c0", "c11", "c2"], rows)
    sys.exit(EXIT_OK)


@main.command("solve")
@common
@click.option("--seed", type=int, default=None, help="Single seed (default: first configured).")
@click.option("--epsilon", type=float, default=None, help="Single eps (default: last of the ladder).")
def solve(config, out, seeds, threads, seed, epsilon):
    """Paracontrolled solve with per-step diagnostics."""
    cfg, outdir = _setup(config, seeds, out)
    lat = cfg.lattice()
    seed = cfg.seeds[0] if seed is None else seed
    e = cfg.epsilons[-1] if epsilon is None else epsilon
    try:
        path = build_k_field(sample_ou_path(NoiseConfig(e, seed, lat, cfg.T, cfg.steps, cfg.profile)))
        sol = solve_paracontrolled(cfg.solver, path, keep="none")
    except FixedPointError as exc:
        click.echo(f"fixed point failed at step {exc.step}: {exc}", err=True)
        sys.exit(EXIT_FIXED_POINT)
    except SolverError as exc:
        click.echo(f"solver failure: {exc}", err=True)
        sys.exit(EXIT_SOLVER)
    _write_csv(outdir / f"solve_seed{seed}_eps{e:g}.csv", _header(cfg, "solve"),
               ["t", "norm_u", "weighted_norm_u4", "ansatz_residual", "tau_L_hit"],
               ([t, a, b, r, int(h)] for t, a, b, r, h in sol.rows()))
    sys.exit(EXIT_OK)


@main.command("converge")
@common
def converge(config, out, seeds, threads):
    """Coupled eps-ladder distances of bundles and solutions."""
    cfg, outdir = _setup(config, seeds, out)
    if len(cfg.epsilons) < 2:
        click.echo("config error: the convergence study needs at least two eps levels", err=True)
        sys.exit(EXIT_CONFIG)
    rep = studies.run_convergence_study(cfg.solver, cfg.lattice(), cfg.epsilons, cfg.seeds,
                                        cfg.T, cfg.steps, cfg.profile, cfg.stride, threads)
    head = _header(cfg, "converge")
    _write_csv(outdir / "convergence_summary.csv", head,
               ["quantity", "eps_coarse", "eps_fine", "q25", "median", "q75"], rep.rows())
    _write_csv(outdir / "convergence_seeds.csv", head,
               ["seed", "eps_coarse", "eps_fine", "bundle", "solution"], rep.seed_rows())
    _write_csv(outdir / "convergence_fit.csv", head, ["quantity", "exponent", "decreasing"],
               [["bundle", rep.exponent("bundle"), int(rep.bundle_decreasing)],
                ["solution", rep.exponent("solution"), int(rep.solution_decreasing)]])
    for s, reason in rep.failures.items():
        click.echo(f"seed {s} aborted: {reason}", err=True)
    sys.exit(EXIT_SOLVER if not rep.per_seed else EXIT_OK)


@main.command("diverge")
@common
def diverge(config, out, seeds, threads):
    """Growth of the counterterms along the eps ladder."""
    cfg, outdir = _setup(config, seeds, out)
    rep = studies.run_divergence_study(cfg.lattice(), cfg.epsilons, cfg.t_star, cfg.profile)
    head = _header(cfg, f"diverge t_star={cfg.t_star!r} c0_growth={rep.growth!r}")
    _write_csv(outdir / "divergence.csv", head,
               ["epsilon", "c0", "c0_offdiag_max", "c11_t_star", "c11_zero_max", "c2_t_star"], rep.rows())
    sys.exit(EXIT_OK)


@main.command("lemmas")
@common
def lemmas(config, out, seeds, threads):
    """Brute-force battery for the harmonic-analysis estimates (constants on N/2 and N)."""
    cfg, outdir = _setup(config, seeds, out)
    rep = studies.run_lemma_checks(N=max(cfg.N // 2, 2), samples=cfg.samples)
    _write_csv(outdir / "lemmas.csv", _header(cfg, "lemmas"),
               ["check", "case", "value", "reference"], rep.rows())
    sys.exit(EXIT_OK)


@main.command("trees")
@common
@click.option("--max-iter", type=int, default=20, show_default=True)
def trees_cmd(config, out, seeds, threads, max_iter):
    """Generate the tree forest, its negative sector and F_0."""
    cfg, outdir = _setup(config, seeds, out)
    try:
        forest = trees.generate_grammar(max_iter)
    except RuntimeError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_SOLVER)
    f0 = trees.build_f0(forest)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "forest.txt").write_text(trees.forest_text(forest))
    rows = trees.forest_rows(forest, f0)
    cols = list(rows[0]) if rows else []
    _write_csv(outdir / "forest.csv", _header(cfg, "trees"), cols, ([r[c] for c in cols] for r in rows))
    sys.exit(EXIT_OK)


if __name__ == "__main__":  # pragma: no cover
    main()
