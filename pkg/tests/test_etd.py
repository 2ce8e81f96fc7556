import mpmath as mp
import numpy as np
from hypothesis import given, settings, strategies as st

from pcns.etd import EtdCache, EtdStep


def _exact(lam, h, w, f0, f1):
    # w' = -lam w + f0 + (f1 - f0) s / h, in 50-digit arithmetic
    with mp.workdps(50):
        lam, h, w, f0, f1 = (mp.mpf(float(v)) for v in (lam, h, w, f0, f1))
        e = mp.exp(-lam * h)
        p1 = (1 - e) / lam
        p2 = (lam * h - 1 + e) / (lam ** 2 * h)
        return float(e * w + p1 * f0 + p2 * (f1 - f0))


def exact_linear(lam, h, w, f0, f1):
    return np.array([_exact(x, h, w, f0, f1) for x in np.atleast_1d(lam)])


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-2, 1e4), st.floats(1e-4, 1.0), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_exact_for_linear_forcing(lam, h, w, f0, f1):
    s = EtdStep.build(np.array([lam]), h)
    got = s.linear(np.array([w]), np.array([f0]), np.array([f1]))[0]
    assert np.isclose(got, exact_linear(lam, h, w, f0, f1)[0], rtol=1e-9, atol=1e-12)


def test_small_rate_series_is_continuous():
    lam = np.array([0.0, 1e-12, 1e-6, 1e-5, 2e-4, 1e-2])
    s = EtdStep.build(lam, 0.5)
    # lam -> 0: pure quadrature of the forcing
    assert np.isclose(s.a0[0], 0.25) and np.isclose(s.a1[0], 0.25) and np.isclose(s.phi1[0], 0.5)
    assert np.all(np.diff(s.phi1) <= 0)
    ref = exact_linear(lam[3:], 0.5, 1.0, 1.0, 2.0)
    assert np.allclose(s.linear(1.0, 1.0, 2.0)[3:], ref, rtol=1e-10)


def test_frozen_is_left_point():
    lam = np.array([3.0])
    s = EtdStep.build(lam, 0.1)
    assert np.isclose(s.frozen(1.0, 2.0)[0], s.linear(1.0, 2.0, 2.0)[0])


def test_cache_reuses_steps():
    c = EtdCache(np.array([1.0, 2.0]))
    assert c(0.1) is c(0.1)
    assert c(0.1) is not c(0.2)
