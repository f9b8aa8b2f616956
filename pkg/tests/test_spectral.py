import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from afms.model import AFMSParams, synthesize
from afms.spectral import (
    LPModel,
    ModifiedCovarianceLP,
    dft_magnitude,
    line_spectrum,
    lp_spectrum,
    modcov_fit,
    pef_roots,
)


def test_single_cosine_coefficients():
    x = np.cos(0.7 * np.arange(50) + 0.2)
    model = modcov_fit(x, 2)
    np.testing.assert_allclose(model.coefficients, [-2 * math.cos(0.7), 1.0], atol=1e-12)
    assert model.residual_power < 1e-20


def test_two_sinusoids_exact():
    n = np.arange(64)
    x = np.cos(0.4 * n + 0.3) + 0.5 * np.cos(1.1 * n - 1.0)
    t0 = time.perf_counter()
    roots = pef_roots(modcov_fit(x, 4))
    assert time.perf_counter() - t0 < 0.1
    freqs = sorted(r.frequency for r in roots)
    np.testing.assert_allclose(freqs, [0.4, 1.1], atol=1e-6)
    np.testing.assert_allclose([r.radius for r in roots], 1.0, atol=1e-6)


@pytest.mark.parametrize("order, length", [(0, 10), (10, 10), (9, 12)])
def test_order_feasibility(order, length):
    with pytest.raises(ValueError):
        modcov_fit(np.random.default_rng(0).normal(size=length), order)


def test_zero_input_is_degenerate():
    model = modcov_fit(np.zeros(20), 3)
    assert model.degenerate
    np.testing.assert_array_equal(model.coefficients, 0.0)


def test_pef_and_order():
    model = LPModel([0.5, -0.25], 1.0)
    assert model.order == 2
    np.testing.assert_array_equal(model.pef, [1.0, 0.5, -0.25])


def test_roots_of_known_polynomial():
    # 1 - 2 r cos(w) z^-1 + r^2 z^-2 has zeros r exp(+-jw)
    r, w = 0.9, 0.8
    roots = pef_roots(LPModel([-2 * r * math.cos(w), r * r], 1.0))
    assert len(roots) == 1
    assert roots[0].frequency == pytest.approx(w)
    assert roots[0].radius == pytest.approx(r)


def test_lp_spectrum_peaks_at_line():
    x = np.cos(0.9 * np.arange(80))
    spec = lp_spectrum(modcov_fit(x + 1e-3 * np.random.default_rng(1).normal(size=80), 4), 4097)
    assert spec.grid[np.argmax(spec.magnitude)] == pytest.approx(0.9, abs=5e-3)


def test_line_spectrum_heights_follow_magnitudes():
    spec = line_spectrum([(1.0, 2.0), (2.0, 0.5)], 8193, 0.01)
    peaks = spec.local_maxima()
    assert len(peaks) == 2
    np.testing.assert_allclose(spec.magnitude[peaks], [2.0, 0.5], rtol=1e-3)


def test_dft_peak_of_cosine():
    b = synthesize(AFMSParams(A=1.0, omega_c=0.61), 41)
    spec = dft_magnitude(b, 4096)
    # the image at -wc drags the peak of a short real cosine by a few padded
    # bins, but it stays within one bin of the record's own resolution
    assert abs(spec.grid[np.argmax(spec.magnitude)] - 0.61) <= 2 * np.pi / 41
    with pytest.raises(ValueError):
        dft_magnitude(b, 20)


def test_dft_peak_of_complex_exponential():
    x = np.exp(1j * 0.61 * np.arange(-20, 21))
    mag = np.abs(np.fft.fft(x, 4096))
    grid = 2 * np.pi * np.arange(4096) / 4096
    assert abs(grid[np.argmax(mag)] - 0.61) <= grid[1]


def test_estimator_wrapper():
    x = np.cos(0.5 * np.arange(40))
    est = ModifiedCovarianceLP(order=2).fit(x)
    np.testing.assert_allclose(est.frequencies(min_radius=0.99), [0.5], atol=1e-9)
    np.testing.assert_allclose(est.predict(x), x[2:], atol=1e-9)
    assert est.get_params() == {"order": 2, "rcond": None}


@settings(max_examples=40, deadline=None)
@given(w1=st.floats(0.2, 1.3), gap=st.floats(0.3, 1.5), phase=st.floats(-3.0, 3.0))
def test_modcov_recovers_two_lines(w1, gap, phase):
    w2 = w1 + gap
    if w2 > 3.0:
        return
    n = np.arange(64)
    x = np.cos(w1 * n + phase) + 0.7 * np.cos(w2 * n)
    freqs = sorted(r.frequency for r in pef_roots(modcov_fit(x, 4)))
    np.testing.assert_allclose(freqs, [w1, w2], atol=1e-6)
