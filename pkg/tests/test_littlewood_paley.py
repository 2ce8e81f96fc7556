import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import real_field
from pcns.lattice import SpectralVectorField, TorusLattice
from pcns.littlewood_paley import (BesovIndex, DyadicPartition, besov_norm, block_lp_norms, chi,
                                   embedding_check, smooth_step, theta)


@pytest.mark.parametrize("N", [8, 16, 32])
def test_partition_of_unity(N):
    assert DyadicPartition(TorusLattice(N)).residual() < 1e-12


def test_supports():
    r = np.linspace(0, 4, 4001)
    assert np.all(chi(r[r >= 4 / 3]) == 0)
    assert np.all(chi(r[r <= 0.75]) == 1)
    t = theta(r)
    assert np.all(t[(r <= 0.75) | (r >= 8 / 3)] == 0)
    assert np.all(t >= 0)


def test_smooth_step_is_monotone():
    r = np.linspace(0, 2, 2001)
    s = smooth_step(r)
    assert np.all(np.diff(s) <= 1e-15)


def test_block_count(part16):
    assert part16.J == 5
    assert list(part16.indices) == list(range(-1, 6))


def test_blocks_sum_to_field(part8, rng):
    c = real_field(part8.lattice, rng, (3,))
    assert np.max(np.abs(part8.blocks(c).sum(axis=0) - c)) < 1e-13


def test_grid_low_matches_cumulative_blocks(part16, rng):
    c = real_field(part16.lattice, rng)
    blocks = part16.grid_blocks(c)
    rows = list(range(part16.J + 2))
    low = part16.grid_low(c, rows)
    for r in rows:
        ref = blocks[:max(r - 1, 0)].sum(axis=0)
        assert np.max(np.abs(low[r] - ref)) < 1e-12


def test_single_mode_besov_norm(lat16, part16):
    # a pure mode sits in one or two blocks; its norm scales like |k|^alpha
    k = np.array([8, 0, 0])
    u = SpectralVectorField.single_mode(lat16, k, [1.0, 0.0, 0.0]).coeffs[0]
    n0 = besov_norm(part16, u, 0.0)
    n1 = besov_norm(part16, u, 1.0)
    assert n0 > 0
    assert 4.0 <= n1 / n0 <= 16.0


def test_norm_monotone_in_alpha(part8, rng):
    c = real_field(part8.lattice, rng)
    a = [besov_norm(part8, c, x) for x in (-1.0, -0.5, 0.0, 0.5)]
    assert all(x <= y + 1e-15 for x, y in zip(a, a[1:]))


def test_linf_block_norms(part8, rng):
    c = real_field(part8.lattice, rng)
    n = block_lp_norms(part8, c)
    g = part8.grid_blocks(c)
    assert np.allclose(n, np.max(np.abs(g), axis=(-3, -2, -1)))


def test_embedding(part8, rng):
    c = real_field(part8.lattice, rng)
    # Bernstein: the B^0_{2,2} -> B^{-3/2}_{inf,inf} ratio is bounded independently of the field
    ratios = [embedding_check(part8, real_field(part8.lattice, rng, decay=d), 2.0, 2.0, np.inf, np.inf, 0.0)
              for d in (0.0, 1.0, 2.0)]
    assert max(ratios) < 2.0


def test_besov_index_validation():
    with pytest.raises(ValueError):
        BesovIndex(0.0, p=0.5)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(-2, 2), st.floats(0.1, 10))
def test_norm_homogeneity(seed, alpha, lam):
    lat = TorusLattice(4)
    part = DyadicPartition(lat)
    c = real_field(lat, np.random.default_rng(seed))
    assert np.isclose(besov_norm(part, lam * c, alpha), lam * besov_norm(part, c, alpha), rtol=1e-12)
