import numpy as np
import pytest

from pcns.lattice import TorusLattice
from pcns.littlewood_paley import DyadicPartition


@pytest.fixture(scope="session")
def lat8():
    return TorusLattice(8)


@pytest.fixture(scope="session")
def part8(lat8):
    return DyadicPartition(lat8)


@pytest.fixture(scope="session")
def lat16():
    return TorusLattice(16)


@pytest.fixture(scope="session")
def part16(lat16):
    return DyadicPartition(lat16)


def real_field(lat, rng, lead=(), decay=1.0):
    """Random real field on the dealiased box with amplitudes ~ (1 + |k|^2)^(-decay/2)."""
    M = lat.grid_points
    c = lat.from_grid(rng.standard_normal(lead + (M, M, M)))
    return c * (1.0 + lat.k2) ** (-decay / 2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion with its measured values."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py::test_criterion_" not in getattr(rep, "nodeid", "") or rep.when != "call":
                continue
            props = dict(rep.user_properties)
            name = rep.nodeid.split("::")[-1]
            lines.append((name, f"{outcome[:4].upper():4s} {name}  {props.get('detail', '')}"))
    if lines:
        terminalreporter.section("acceptance")
        for _, text in sorted(lines):
            terminalreporter.write_line(text)
