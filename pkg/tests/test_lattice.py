import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import real_field
from pcns.lattice import (NORM, LatticeMismatch, SpectralVectorField, TorusLattice, dealiased_product,
                          field_from_csv, field_to_csv, hermitian_defect, leray_project)


def test_grid_size_and_cutoff():
    lat = TorusLattice(16)
    assert lat.grid_points == 36
    assert lat.cutoff == 10
    assert 3 * lat.cutoff < lat.grid_points


def test_rejects_bad_sizes():
    with pytest.raises(ValueError):
        TorusLattice(1)
    with pytest.raises(ValueError):
        TorusLattice(8, grid_points=10)


def test_basis_normalization(lat8):
    # e_k = (2pi)^{-3/2} exp(i k.x): the coefficient of e_0 of the constant 1 is (2pi)^{3/2}
    c = lat8.from_grid(np.ones((lat8.grid_points,) * 3))
    assert abs(c[0, 0, 0] - 1 / NORM) < 1e-10
    assert abs(lat8.mean_value(c) - 1.0) < 1e-12


def test_roundtrip(lat8, rng):
    c = real_field(lat8, rng, (3,))
    assert np.max(np.abs(lat8.from_grid(lat8.to_grid(c)) - c)) < 1e-12
    assert hermitian_defect(lat8, c) < 1e-12


def test_leray_idempotent_and_divergence_free(lat8, rng):
    c = real_field(lat8, rng, (3,))
    p = lat8.leray(c)
    assert np.max(np.abs(lat8.leray(p) - p)) < 1e-13 * max(1.0, np.max(np.abs(p)))
    assert np.max(np.abs(lat8.divergence(p))) < 1e-13 * max(1.0, np.max(np.abs(p)))


def test_leray_component_matches_vector(lat8, rng):
    c = real_field(lat8, rng, (3,))
    p = lat8.leray(c)
    for i in range(3):
        q = sum(lat8.leray_component(c[j], i, j) for j in range(3))
        assert np.max(np.abs(q - p[i])) < 1e-13


def test_single_mode_product_is_exact(lat8):
    # cos(x) * cos(y) has coefficients at (+-1, +-1, 0)
    X = lat8.grid_coords()
    f = lat8.from_grid(np.cos(X[0]))
    g = lat8.from_grid(np.cos(X[1]))
    h = dealiased_product(lat8, f, g)
    ref = lat8.from_grid(np.cos(X[0]) * np.cos(X[1]))
    assert np.max(np.abs(h - ref)) < 1e-12


def test_product_is_alias_free(lat8, rng):
    # coefficient of the product equals the literal convolution sum on the box
    f = real_field(lat8, rng)
    g = real_field(lat8, rng)
    h = lat8.product(f, g)
    modes = lat8.modes()
    F = lat8.gather(f, modes)
    G = lat8.gather(g, modes)
    index = {tuple(m): n for n, m in enumerate(modes)}
    for k in [(0, 0, 0), (1, -2, 3), (5, 5, -5), (-3, 0, 1)]:
        s = 0.0
        for n, k1 in enumerate(modes):
            k2 = tuple(np.array(k) - k1)
            if k2 in index:
                s += F[n] * G[index[k2]]
        val = lat8.gather(h, np.array([k]))[0]
        assert abs(val - NORM * s) < 1e-10


def test_mismatch_detected(lat8):
    with pytest.raises(LatticeMismatch):
        dealiased_product(lat8, np.zeros(TorusLattice(16).shape), np.zeros(lat8.shape))


def test_csv_roundtrip(lat8, rng):
    u = leray_project(SpectralVectorField(lat8, real_field(lat8, rng, (3,)), 0.5))
    v = field_from_csv(field_to_csv(u, {"seed": 3}))
    assert v.lattice == lat8
    assert np.array_equal(v.coeffs, u.coeffs)
    assert v.time_tag == 0.5


def test_parseval(lat8, rng):
    c = real_field(lat8, rng)
    g = lat8.to_grid(c)
    assert abs(lat8.l2_norm(c) ** 2 - np.sum(g ** 2) * lat8.cell_volume) < 1e-9 * lat8.l2_norm(c) ** 2


@settings(max_examples=20, deadline=None)
@given(st.integers(-5, 5), st.integers(-5, 5), st.integers(-5, 5), st.floats(0.0, 2.0))
def test_heat_on_single_mode(a, b, c, t):
    lat = TorusLattice(8)
    k = np.array([a, b, c])
    u = SpectralVectorField.single_mode(lat, k, [1.0, 0.5j, -0.25])
    h = lat.heat(u.coeffs, t)
    assert np.allclose(h, np.exp(-(k @ k) * t) * u.coeffs, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_leray_properties(seed):
    lat = TorusLattice(4)
    c = real_field(lat, np.random.default_rng(seed), (3,))
    p = lat.leray(c)
    assert np.max(np.abs(lat.leray(p) - p)) < 1e-12
    assert np.max(np.abs(lat.divergence(p))) < 1e-12
    assert lat.l2_norm(p) <= lat.l2_norm(c) + 1e-12
