"""INI run configuration.

Example::

    [lattice]
    N = 16

    [noise]
    epsilons = 0.5, 0.25, 0.125, 0.0625
    seeds = 1-16
    profile = bump
    T = 0.25
    steps = 16

    [solver]
    z = 0.55
    delta0 = 0.1
    delta = 0.05
    beta = 0.06
    L = 10

    [experiment]
    study = converge
    samples = 100
    stride = 4
    t_star = 0.125
    out = results

Unknown keys are rejected so typos do not silently fall back to defaults.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .lattice import TorusLattice
from .noise import profile_function
from .solver import SolverParams


class ConfigError(ValueError):
    pass


def parse_seeds(text: str) -> list[int]:
    """'1-4, 9' -> [1, 2, 3, 4, 9]."""
    out = []
    for part in str(text).replace(";", ",").split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ConfigError(f"empty seed range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    if len(set(out)) != len(out):
        raise ConfigError("duplicate seeds")
    return out


def _floats(text: str) -> list[float]:
    return [float(x) for x in str(text).replace(";", ",").split(",") if x.strip()]


_SOLVER_TYPES = {f.name: f.type for f in fields(SolverParams)}


@dataclass(frozen=True)
class RunConfig:
    N: int = 16
    grid_points: int | None = None
    epsilons: tuple = (0.5, 0.25, 0.125, 0.0625)
    seeds: tuple = tuple(range(1, 17))
    profile: str = "bump"
    T: float = 0.25
    steps: int = 16
    solver: SolverParams = field(default_factory=SolverParams)
    study: str = "converge"
    samples: int = 100
    stride: int = 4
    t_star: float = 0.125
    out: str = "results"

    def __post_init__(self):
        if self.N < 2:
            raise ConfigError("N must be at least 2")
        if not self.epsilons:
            raise ConfigError("the eps ladder is empty")
        if any(e <= 0 for e in self.epsilons):
            raise ConfigError("eps values must be positive")
        if any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ConfigError("the eps ladder must be strictly decreasing")
        if not self.seeds:
            raise ConfigError("no seeds given")
        if self.T <= 0 or self.steps < 1:
            raise ConfigError("need T > 0 and steps >= 1")
        if self.samples < 1 or self.stride < 1:
            raise ConfigError("samples and stride must be >= 1")
        if self.t_star < 0:
            raise ConfigError("t_star must be nonnegative")
        try:
            profile_function(self.profile)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def lattice(self) -> TorusLattice:
        try:
            return TorusLattice(self.N, self.grid_points)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def canonical(self) -> str:
        """Normalized text used for hashing (independent of formatting in the file)."""
        s = self.solver
        lines = [
            f"N={self.N}", f"grid_points={self.grid_points}",
            "epsilons=" + ",".join(repr(float(e)) for e in self.epsilons),
            "seeds=" + ",".join(str(x) for x in self.seeds),
            f"profile={self.profile}", f"T={self.T!r}", f"steps={self.steps}",
        ]
        lines += [f"solver.{f.name}={getattr(s, f.name)!r}" for f in fields(s)]
        lines += [f"study={self.study}", f"samples={self.samples}", f"stride={self.stride}",
                  f"t_star={self.t_star!r}"]
        return "\n".join(lines)

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def with_seeds(self, seeds) -> "RunConfig":
        return replace(self, seeds=tuple(seeds))


_KEYS = {
    "lattice": {"n", "grid_points"},
    "noise": {"epsilons", "seeds", "profile", "t", "steps"},
    "solver": {k.lower() for k in _SOLVER_TYPES},
    "experiment": {"study", "samples", "stride", "t_star", "out"},
}


def load_config(source: str | Path | None = None, text: str | None = None) -> RunConfig:
    """Read a RunConfig from a file path or from INI text; defaults otherwise."""
    cp = configparser.ConfigParser()
    try:
        if text is not None:
            cp.read_string(text)
        elif source is not None:
            with open(source) as fh:
                cp.read_file(fh)
    except (configparser.Error, OSError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    for section in cp.sections():
        if section not in _KEYS:
            raise ConfigError(f"unknown section [{section}]")
        extra = set(cp[section]) - _KEYS[section]
        if extra:
            raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(extra))}")

    def get(section, key, conv, default):
        if cp.has_option(section, key):
            try:
                return conv(cp.get(section, key))
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from None
        return default

    d = RunConfig.__dataclass_fields__
    solver_kw = {}
    lower = {k.lower(): k for k in _SOLVER_TYPES}
    if cp.has_section("solver"):
        for key, raw in cp["solver"].items():
            name = lower[key]
            conv = int if name in ("max_iter", "corrections") else float
            try:
                solver_kw[name] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"[solver] {key}: {exc}") from None
    try:
        solver = SolverParams(**solver_kw)
    except ValueError as exc:
        raise ConfigError(f"invalid solver parameters: {exc}") from None
    gp = get("lattice", "grid_points", int, None)
    return RunConfig(
        N=get("lattice", "n", int, d["N"].default),
        grid_points=gp,
        epsilons=tuple(get("noise", "epsilons", _floats, d["epsilons"].default)),
        seeds=tuple(get("noise", "seeds", parse_seeds, d["seeds"].default)),
        profile=get("noise", "profile", str.strip, d["profile"].default),
        T=get("noise", "t", float, d["T"].default),
        steps=get("noise", "steps", int, d["steps"].default),
        solver=solver,
        study=get("experiment", "study", str.strip, d["study"].default),
        samples=get("experiment", "samples", int, d["samples"].default),
        stride=get("experiment", "stride", int, d["stride"].default),
        t_star=get("experiment", "t_star", float, d["t_star"].default),
        out=get("experiment", "out", str.strip, d["out"].default),
    )
