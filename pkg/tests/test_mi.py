import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import isotonic_regression

from _oracles import binned_gaussian_mi
from stocknet.dependence import DependenceMatrix, gaussian_mi, gaussian_mi_value, pearson_matrix
from stocknet.errors import DataError, ValidationError
from stocknet.mi import (BiasCalibration, BinningSpec, bin_sizes, build_bias_calibration, equiquantize,
                         extranormal_matrix, isotonic_increasing, mi_binned_raw, mi_corrected, mi_matrix)
from stocknet.panel import ReturnPanel
from stocknet.parallel import substream
from stocknet.synthetic import gaussian_factor_panel


@pytest.fixture(scope="module")
def calib_2608():
    return build_bias_calibration(BinningSpec(4, 2608), replicates=200, seed=1)


def gaussian_pair(rho, T, rng):
    z = rng.standard_normal((2, T))
    return z[0], rho * z[0] + math.sqrt(1 - rho * rho) * z[1]


# -- binning ------------------------------------------------------------------------

def test_equiquantize_rank_quartiles():
    np.testing.assert_array_equal(equiquantize([5, 1, 7, 3, 8, 2, 6, 4], 4), [2, 0, 3, 1, 3, 0, 2, 1])


def test_remainder_goes_to_lowest_bins():
    np.testing.assert_array_equal(bin_sizes(5, 4), [2, 1, 1, 1])
    codes = equiquantize([10, 20, 30, 40, 50], 4)
    np.testing.assert_array_equal(codes, [0, 0, 1, 2, 3])


def test_equiquantize_constant_errors():
    with pytest.raises(DataError):
        equiquantize([3.0] * 10, 2)


@given(arrays(float, st.integers(8, 60), elements=st.floats(-1e6, 1e6)), st.integers(2, 8))
def test_equiquantize_balanced_and_monotone(x, Q):
    if x.size < Q or np.ptp(x) == 0:
        return
    c = equiquantize(x, Q)
    counts = np.bincount(c, minlength=Q)
    assert counts.max() - counts.min() <= 1
    order = np.argsort(x, kind="stable")
    assert np.all(np.diff(c[order]) >= 0)


def test_bin_bound():
    assert BinningSpec(13, 2608).bound == pytest.approx(13.765, abs=1e-3)
    with pytest.raises(ValidationError, match="13.765"):
        BinningSpec(14, 2608)
    with pytest.raises(ValidationError):
        BinningSpec(4, 64)                  # equality is excluded
    BinningSpec(4, 65)


# -- raw MI ---------------------------------------------------------------------------

def test_identical_and_reversed_give_log_q(rng):
    x = rng.standard_normal(100)
    spec = BinningSpec(4, 100)
    assert mi_binned_raw(x, x, spec, "bits") == pytest.approx(2.0, abs=1e-12)
    assert mi_binned_raw(x, -x ** 3, spec) == pytest.approx(math.log(4), abs=1e-12)


def test_length_mismatch():
    with pytest.raises(DataError):
        mi_binned_raw(np.arange(100.0), np.arange(99.0), BinningSpec(4, 100))


def test_independent_bias_matches_chi_square_approximation():
    T, Q = 2608, 4
    spec = BinningSpec(Q, T)
    vals = [mi_binned_raw(*substream(7, r).random((2, T)), spec, "bits") for r in range(300)]
    approx = (Q - 1) ** 2 / (2 * T * math.log(2))
    assert np.mean(vals) > 0
    assert np.mean(vals) == pytest.approx(approx, rel=0.1)


# -- calibration -----------------------------------------------------------------------

def test_isotonic_matches_scipy():
    rng = np.random.default_rng(3)
    for _ in range(50):
        y = rng.standard_normal(15)
        w = rng.random(15) + 0.1
        np.testing.assert_allclose(isotonic_increasing(y, w), isotonic_regression(y, weights=w).x, atol=1e-12)


def test_calibration_basic_properties(calib_500):
    c = calib_500
    assert c.raw_mean[0] > 0
    assert np.all(np.diff(c.raw_mean) > 0)
    again = build_bias_calibration(BinningSpec(4, 500), replicates=200, seed=0)
    assert again.raw_mean == c.raw_mean


def test_calibration_json_round_trip(calib_500, tmp_path):
    calib_500.save(tmp_path / "c.json")
    assert BiasCalibration.load(tmp_path / "c.json") == calib_500


def test_calibration_matches_population_binned_mi(calib_2608):
    """The ensemble mean at rho tracks the exact binned MI of the Gaussian plus the null bias."""
    c = calib_2608
    for rho in (0.5, 0.9):
        i = c.rho_grid.index(rho)
        se = c.raw_sd[i] / math.sqrt(c.replicates)
        expected = binned_gaussian_mi(rho, 4) + c.raw_mean[0]
        assert abs(c.raw_mean[i] - expected) < 4 * se + 2e-4


def test_calibration_is_not_continuous_mi_plus_bias(calib_2608):
    # binning loses information: at rho=0.9 the raw mean sits far below I_G(0.9) + bias
    c = calib_2608
    i = c.rho_grid.index(0.9)
    assert gaussian_mi_value(0.9) + c.raw_mean[0] - c.raw_mean[i] > 0.2


def test_corrected_gaussian_ensembles(calib_2608):
    spec = BinningSpec(4, 2608)
    half = [mi_corrected(*gaussian_pair(0.5, 2608, substream(99, r)), spec, calib_2608) for r in range(100)]
    null = [mi_corrected(*gaussian_pair(0.0, 2608, substream(98, r)), spec, calib_2608) for r in range(100)]
    assert np.mean(half) == pytest.approx(0.14384, abs=0.01)
    assert abs(np.mean(null)) < 0.005


def test_correction_anchor_and_clamp(calib_500):
    c = calib_500
    v, cl = c.correct(c.raw_mean[0])
    assert v == 0.0 and not cl
    v, cl = c.correct(c.raw_mean[0], mode="subtract")
    assert v == 0.0
    v, cl = c.correct(math.log(4))
    assert cl and v == pytest.approx(gaussian_mi_value(c.rho_grid[-1]))


def test_wrong_calibration_rejected(calib_500, rng):
    with pytest.raises(ValidationError):
        mi_corrected(rng.random(600), rng.random(600), BinningSpec(4, 600), calib_500)


# -- matrices --------------------------------------------------------------------------

def test_mi_matrix_two_series(rng, calib_500):
    p = ReturnPanel.from_array(rng.standard_normal((2, 500)))
    m = mi_matrix(p, calib=calib_500)
    assert m.values[0, 1] == m.values[1, 0]
    assert m.values[0, 0] == 0.0


def test_duplicated_row(rng, calib_500):
    x = rng.standard_normal((3, 500))
    x[2] = x[0]
    p = ReturnPanel.from_array(x)
    raw = mi_matrix(p, base="bits")
    assert raw.values[0, 2] == pytest.approx(2.0, abs=1e-12)
    corrected = mi_matrix(p, calib=calib_500)
    assert corrected.meta["clamped"][0, 2] and corrected.meta["n_clamped"] == 1


def test_mi_matrix_pairs_match_scalar(rng, calib_500):
    p = ReturnPanel.from_array(rng.standard_normal((4, 500)))
    m = mi_matrix(p, calib=calib_500, base="bits")
    spec = calib_500.spec
    for i in range(4):
        for j in range(i + 1, 4):
            assert m.values[i, j] == pytest.approx(
                mi_corrected(p.returns[i], p.returns[j], spec, calib_500, "bits"), abs=1e-14)


def test_mi_matrix_tracks_gaussian_mi_on_average(calib_500):
    diffs = []
    for r in range(40):
        p = gaussian_factor_panel(6, 500, substream(5, r))
        diffs.append(mi_matrix(p, calib=calib_500).offdiag() - gaussian_mi(pearson_matrix(p)).offdiag())
    assert np.all(np.abs(np.mean(diffs, axis=0)) < 0.01)


def test_extranormal(rng, calib_500):
    p = gaussian_factor_panel(5, 500, rng)
    ig = gaussian_mi(pearson_matrix(p))
    mi = DependenceMatrix("mi", ig.values, ig.tickers, "nats")
    assert not extranormal_matrix(mi, ig).values.any()
    with pytest.raises(ValidationError):
        extranormal_matrix(mi_matrix(p, calib=calib_500, base="bits"), ig)
    with pytest.raises(ValidationError):
        extranormal_matrix(ig, mi)
    other = DependenceMatrix("mi", ig.values, tuple("vwxyz"), "nats")
    with pytest.raises(ValidationError):
        extranormal_matrix(other, ig)


def test_extranormal_gaussian_ensemble_is_near_zero(calib_500):
    vals = []
    for r in range(40):
        p = gaussian_factor_panel(5, 500, substream(6, r))
        ie = extranormal_matrix(mi_matrix(p, calib=calib_500), gaussian_mi(pearson_matrix(p)))
        vals.append(ie.offdiag())
    assert abs(np.mean(vals)) < 0.005
