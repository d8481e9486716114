import numpy as np
import pytest
from hypothesis import given, strategies as st

from stocknet.errors import DataError, ValidationError
from stocknet.panel import ReturnPanel
from stocknet.parallel import substream
from stocknet.surrogates import (SurrogateSpec, ft_surrogate, ft_surrogate_panel, shared_phases,
                                 surrogate_ensemble, surrogate_member)
from stocknet.synthetic import var1_panel


def circular_xcorr(x):
    """Direct time-domain circular cross-covariance c[i, j, lag] = sum_t x_i(t) x_j(t + lag)."""
    N, T = x.shape
    return np.array([[[np.dot(x[i], np.roll(x[j], -lag)) for lag in range(T)] for j in range(N)]
                     for i in range(N)])


@given(st.integers(4, 33), st.integers(0, 2**31))
def test_spectrum_mean_and_cross_structure_preserved(T, seed):
    x = np.random.default_rng(seed).standard_normal((3, T))
    s = ft_surrogate(x, np.random.default_rng(seed + 1))
    assert np.isrealobj(s)
    np.testing.assert_allclose(np.abs(np.fft.rfft(s)) ** 2, np.abs(np.fft.rfft(x)) ** 2, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(s.mean(axis=1), x.mean(axis=1), atol=1e-10)
    # same phase offset at every frequency for every series: all lagged cross-products survive
    np.testing.assert_allclose(circular_xcorr(s), circular_xcorr(x), atol=1e-9)


def test_phase_constraints():
    ph = shared_phases(10, np.random.default_rng(0))
    assert ph.size == 6 and ph[0] == 0.0 and ph[-1] in (0.0, np.pi)
    ph = shared_phases(11, np.random.default_rng(0))
    assert ph.size == 6 and ph[0] == 0.0


def test_phases_actually_randomize():
    x = np.random.default_rng(1).standard_normal((2, 64))
    s = ft_surrogate(x, np.random.default_rng(2))
    assert not np.allclose(s, x)


def test_zero_lag_correlation_preserved_in_ensemble():
    T = 1000
    panel = var1_panel(5, T, np.random.default_rng(4))
    c0 = np.corrcoef(panel.returns)
    diffs = [np.abs(np.corrcoef(s.returns) - c0).max()
             for s in surrogate_ensemble(panel, SurrogateSpec(25, 3))]
    assert np.median(diffs) <= 4 / np.sqrt(T)


def test_twice_keeps_invariants():
    x = np.random.default_rng(5).standard_normal((2, 40))
    s2 = ft_surrogate(ft_surrogate(x, np.random.default_rng(1)), np.random.default_rng(2))
    np.testing.assert_allclose(np.abs(np.fft.rfft(s2)), np.abs(np.fft.rfft(x)), rtol=1e-8)


def test_ensemble_seeding():
    panel = ReturnPanel.from_array(np.random.default_rng(6).standard_normal((3, 50)))
    one = list(surrogate_ensemble(panel, SurrogateSpec(1, 9)))
    assert len(one) == 1
    np.testing.assert_array_equal(one[0].returns, ft_surrogate_panel(panel, substream(9, 0)).returns)
    a = [s.returns for s in surrogate_ensemble(panel, SurrogateSpec(5, 9))]
    b = [s.returns for s in surrogate_ensemble(panel, SurrogateSpec(5, 9))]
    assert all(np.array_equal(u, v) for u, v in zip(a, b))
    # members do not depend on evaluation order
    np.testing.assert_array_equal(surrogate_member(panel, SurrogateSpec(5, 9), 3).returns, a[3])


def test_errors():
    with pytest.raises(ValidationError):
        SurrogateSpec(0)
    with pytest.raises(DataError):
        ft_surrogate(np.zeros((2, 3)), np.random.default_rng(0))
    with pytest.raises(DataError):
        ft_surrogate(np.array([[0.0, np.inf, 1.0, 2.0]]), np.random.default_rng(0))
