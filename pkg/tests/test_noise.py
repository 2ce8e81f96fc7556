import numpy as np
import pytest

from pcns.lattice import TorusLattice
from pcns.noise import (NoiseConfig, build_k_field, bump_profile, duhamel_linear, mollify,
                        profile_function, profile_multiplier, raw_gaussians, sample_ou_path)


@pytest.fixture(scope="module")
def lat():
    return TorusLattice(4)


def test_bump_profile_values():
    assert bump_profile(np.array([0.0]))[0] == 1.0
    assert bump_profile(np.array([1.0, 1.5]))[1] == 0.0
    assert np.all(np.diff(bump_profile(np.linspace(0, 1, 50))) <= 0)
    with pytest.raises(ValueError):
        profile_function("box")


def test_config_validation(lat):
    with pytest.raises(ValueError):
        NoiseConfig(0.0, 1, lat)
    with pytest.raises(ValueError):
        NoiseConfig(0.5, 1, lat, times=(0.0, 0.2, 0.1))
    c = NoiseConfig(0.5, 1, lat, T=0.5, steps=4)
    assert np.allclose(c.time_grid(), [0, 0.125, 0.25, 0.375, 0.5])


def test_gaussians_are_hermitian_and_deterministic(lat):
    a = raw_gaussians(lat, 7, 3)
    b = raw_gaussians(lat, 7, 3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, raw_gaussians(lat, 7, 4))
    assert not np.array_equal(a, raw_gaussians(lat, 7, 3, level=1))
    g = lat.to_grid(a)
    assert np.all(np.isreal(g))
    assert np.max(np.abs(lat.from_grid(g) - a)) < 1e-12


def test_path_is_divergence_free_exactly(lat):
    p = build_k_field(sample_ou_path(NoiseConfig(0.5, 2, lat, steps=4)))
    for m in range(len(p.times)):
        assert np.max(np.abs(lat.divergence(p.u1(m)))) < 1e-13
        assert np.max(np.abs(lat.divergence(p.K(m)))) < 1e-13


def test_k_not_built_raises(lat):
    p = sample_ou_path(NoiseConfig(0.5, 2, lat, steps=2))
    with pytest.raises(RuntimeError):
        p.K(1)


def test_coupling_across_eps(lat):
    p = sample_ou_path(NoiseConfig(0.5, 3, lat, steps=2))
    q = sample_ou_path(NoiseConfig(0.25, 3, lat, steps=2))
    assert np.array_equal(p.raw, q.raw)
    r = p.at_epsilon(0.25)
    assert np.array_equal(r.u1(2), q.u1(2))
    # modes where both cutoffs equal one another agree exactly
    both = profile_multiplier(lat, 0.5) == profile_multiplier(lat, 0.25)
    assert np.array_equal((p.u1(1) * both), (q.u1(1) * both))


def test_mollify_is_multiplier(lat):
    c = raw_gaussians(lat, 0, 0)
    assert np.array_equal(mollify(lat, 0.5, c), c * profile_multiplier(lat, 0.5))
    with pytest.raises(ValueError):
        mollify(lat, -1.0, c)


def stationary_variance(lat, eps):
    """f(eps k)^2 P^{ii}(k) / (2|k|^2) per component."""
    mult = profile_multiplier(lat, eps)
    P = np.eye(3)[:, :, None, None, None] - lat.k[:, None] * lat.k[None] * lat.inv_k2
    return mult ** 2 * np.array([P[i, i] for i in range(3)]) * np.where(lat.k2 > 0, 0.5 * lat.inv_k2, 0.0)


def independent_samples(lat, eps, lag, n):
    """u1 at times 0 and ``lag`` for n independent seeds."""
    x0, x1 = [], []
    for seed in range(n):
        p = sample_ou_path(NoiseConfig(eps, seed, lat, times=(0.0, lag)))
        x0.append(p.u1(0))
        x1.append(p.u1(1))
    return np.array(x0), np.array(x1)


MODES = [(1, 0, 0), (0, 1, 1), (1, 1, 1), (1, -1, 0)]


@pytest.fixture(scope="module")
def samples():
    lat = TorusLattice(2)
    return lat, independent_samples(lat, 0.3, 0.1, 10_000)


def test_stationary_variance(samples):
    lat, (x0, _) = samples
    var = stationary_variance(lat, 0.3)
    n = len(x0)
    for a, b, c in MODES:
        for i in range(3):
            v = var[i, a, b, c]
            x = x0[:, i, a, b, c]
            if v == 0:
                assert np.max(np.abs(x)) < 1e-14
                continue
            # |x|^2 is exponential with mean v, so its standard error is v / sqrt(n)
            assert abs(np.mean(np.abs(x) ** 2) - v) < 3 * v / np.sqrt(n)


def test_lag_covariance(samples):
    lat, (x0, x1) = samples
    var = stationary_variance(lat, 0.3)
    n = len(x0)
    for a, b, c in MODES:
        rho = np.exp(-lat.k2[a, b, c] * 0.1)
        for i in range(3):
            v = var[i, a, b, c]
            if v == 0:
                continue
            prod = x1[:, i, a, b, c] * np.conj(x0[:, i, a, b, c])
            sd = np.std(prod.real) / np.sqrt(n)
            assert abs(np.mean(prod.real) - rho * v) < 3 * sd


def test_bridge_refinement_keeps_nodes_and_statistics():
    lat = TorusLattice(2)
    p = sample_ou_path(NoiseConfig(0.3, 5, lat, T=1.0, steps=2))
    q = p.refine()
    assert len(q.times) == 5
    assert np.array_equal(q.raw[0::2], p.raw)
    assert q.config.refinement == 1
    assert np.array_equal(p.refine().raw, q.raw)
    assert q.refine().config.steps == 8


def test_bridge_midpoint_law():
    # midpoint variance and regression coefficients of the OU bridge, estimated over seeds
    lat = TorusLattice(2)
    h = 0.2
    k = (1, 0, 0)
    a, b, c = k
    k2 = 1.0
    rows = []
    for seed in range(2000):
        p = sample_ou_path(NoiseConfig(0.3, seed, lat, times=(0.0, 2 * h)))
        q = p.refine()
        rows.append([q.raw[m, 1, a, b, c] for m in range(3)])
    x = np.array(rows)
    s2 = 0.5 / k2
    e = np.exp(-k2 * h)
    resid = x[:, 1] - e * (x[:, 0] + x[:, 2]) / (1 + e * e)
    var = np.mean(np.abs(resid) ** 2)
    th = s2 * (1 - e * e) / (1 + e * e)
    assert abs(var - th) < 3 * th * np.sqrt(2.0 / len(rows))
    # the residual is uncorrelated with the endpoints
    assert abs(np.mean(resid * np.conj(x[:, 0]))) < 3 * np.sqrt(th * s2 / len(rows))
    # and the refined path has the stationary one-step covariance
    lag = np.mean(x[:, 1] * np.conj(x[:, 0])).real
    assert abs(lag - e * s2) < 3 * s2 * np.sqrt(2.0 / len(rows))


def test_k_solves_heat_equation(lat):
    p = build_k_field(sample_ou_path(NoiseConfig(0.5, 2, lat, steps=8)))
    ref = duhamel_linear(lat, p.times, p.raw)
    assert np.max(np.abs(ref - p.raw_K)) < 1e-14
    assert np.all(p.raw_K[0] == 0)
