import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import voigt_profile

from cqadsim.analysis import (
    FitResult,
    SpectrumTrace,
    WignerMap,
    beta_decay_ratio,
    calibration_fit,
    decay_fit,
    parity_from_populations,
    poisson_fit,
    voigt_sum_fit,
    wigner_assemble,
)
from cqadsim.exceptions import ValidationError


def synth_spectrum(populations, spacing, center, sigma, gamma, baseline=0.0, span_pad=4.0):
    n = len(populations)
    lo = center + (n - 1) * spacing - span_pad * abs(spacing) / 2
    hi = center + span_pad * abs(spacing) / 2
    x = np.arange(min(lo, hi), max(lo, hi), abs(spacing) / 25.0)
    y = np.full_like(x, baseline)
    peak = voigt_profile(0.0, sigma, gamma)
    for k, h in enumerate(populations):
        y = y + h * voigt_profile(x - (center + k * spacing), sigma, gamma) / peak
    return SpectrumTrace(x, y)


def test_trace_validation():
    with pytest.raises(ValidationError):
        SpectrumTrace(np.array([1.0, 0.5]), np.array([0.0, 0.0]))
    with pytest.raises(ValidationError):
        SpectrumTrace(np.array([0.0, 1.0, 2.0]), np.array([0.0, 0.0]))


def test_voigt_single_peak_recovery():
    tr = synth_spectrum([0.3], -150e3, -0.9e6, 6e3, 8e3)
    fit, pops = voigt_sum_fit(tr, 1, -150e3, center_hint=-0.9e6)
    assert fit.converged
    fwhm = fit.metadata["fwhm"]
    assert abs(fit.parameters["center"] + 0.9e6) < 0.01 * fwhm
    assert pops[0] == pytest.approx(1.0)


def test_voigt_four_peak_poisson_recovery():
    # Poisson(nbar=1) heights, paper-like spacing and widths
    nbar = 1.0
    pops_true = np.exp(-nbar) * nbar ** np.arange(4) / [1, 1, 2, 6]
    pops_true = pops_true / pops_true.sum()
    tr = synth_spectrum(pops_true * 0.3, -147e3, -0.85e6, 5e3, 7.5e3)
    fit, pops = voigt_sum_fit(tr, 4, -147e3, center_hint=-0.85e6)
    assert fit.converged
    assert np.abs(pops - pops_true).max() < 0.02
    assert fit.parameters["spacing"] == pytest.approx(-147e3, rel=0.01)


def test_voigt_zero_trace_flagged():
    x = np.linspace(0, 1e6, 200)
    tr = SpectrumTrace(x, np.zeros_like(x))
    fit, pops = voigt_sum_fit(tr, 2, -100e3)
    assert not fit.converged


def test_voigt_overlap_degenerate_flag():
    tr = synth_spectrum([0.2, 0.2], -8e3, -0.5e6, 5e3, 7e3)
    fit, _ = voigt_sum_fit(tr, 2, -8e3, center_hint=-0.5e6)
    assert fit.metadata["overlap_degenerate"]


def test_voigt_roundtrip_with_noise_band():
    rng = np.random.default_rng(0)
    nbar = 1.4
    pops_true = np.exp(-nbar) * nbar ** np.arange(6) / [1, 1, 2, 6, 24, 120]
    pops_true = pops_true / pops_true.sum()
    tr0 = synth_spectrum(pops_true * 0.25, -110e3, -1.2e6, 6e3, 8e3, baseline=0.01)
    noisy = SpectrumTrace(tr0.frequencies,
                          tr0.populations + rng.normal(0, 0.002, tr0.populations.size))
    fit, pops = voigt_sum_fit(noisy, 6, -110e3, center_hint=-1.2e6)
    assert fit.converged
    assert np.abs(pops - pops_true).max() < 0.03


def test_poisson_fit_exact():
    assert poisson_fit([1.0, 0.0, 0.0]).parameters["nbar"] == pytest.approx(0.0, abs=1e-9)
    nbar = 1.0
    p = np.exp(-nbar) * nbar ** np.arange(14) / [math.factorial(k) for k in range(14)]
    fit = poisson_fit(p / p.sum())
    assert fit.parameters["nbar"] == pytest.approx(1.0, abs=1e-6)
    assert fit.parameters["beta"] == pytest.approx(1.0, abs=1e-6)


def test_poisson_fit_validation():
    with pytest.raises(ValidationError):
        poisson_fit([0.0, 0.0])
    with pytest.raises(ValidationError):
        poisson_fit([0.5, 0.1])  # not normalized


def test_beta_decay_ratio_values():
    assert beta_decay_ratio(3.2e3, 15e-6) == pytest.approx(0.863, abs=0.002)
    assert beta_decay_ratio(0.0, 15e-6) == 1.0
    assert beta_decay_ratio(1e9, 15e-6) < 1e-4


@settings(max_examples=30)
@given(st.floats(min_value=1.0, max_value=1e6), st.floats(min_value=1.1, max_value=100.0))
def test_beta_decay_ratio_monotone(kappa, factor):
    assert beta_decay_ratio(kappa * factor, 15e-6) < beta_decay_ratio(kappa, 15e-6)


def test_calibration_fit_exact_line():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    fit = calibration_fit(a, 0.8 * a + 0.01)
    assert fit.parameters["slope"] == pytest.approx(0.8)
    assert fit.parameters["intercept"] == pytest.approx(0.01)
    assert fit.parameters["r_squared"] == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        calibration_fit([1.0, 2.0], [0.1, 0.2])


def test_parity_from_populations():
    assert parity_from_populations([1.0, 0.0]) == 1.0
    assert parity_from_populations([0.0, 1.0]) == -1.0
    nbar = 1.0
    p = np.exp(-nbar) * nbar ** np.arange(12) / [math.factorial(k) for k in range(12)]
    assert parity_from_populations(p / p.sum()) == pytest.approx(math.exp(-2.0), abs=1e-4)
    with pytest.raises(ValidationError):
        parity_from_populations([0.4, 0.4])


@settings(max_examples=30)
@given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=8))
def test_parity_bounded_property(raw):
    total = sum(raw)
    if total <= 0:
        return
    p = np.array(raw) / total
    val = parity_from_populations(p)
    assert -1.0 - 1e-12 <= val <= 1.0 + 1e-12


def test_decay_fit_exponential_roundtrip():
    t = np.linspace(0, 250e-6, 40)
    y = 0.9 * np.exp(-t / 81e-6) + 0.05
    fit = decay_fit(t, y, "exponential")
    assert fit.converged
    assert fit.parameters["t_decay"] == pytest.approx(81e-6, rel=0.01)


def test_decay_fit_exponential_sine_roundtrip():
    t = np.linspace(0, 400e-6, 120)
    y = 0.45 * np.exp(-t / 138e-6) * np.cos(2 * math.pi * 15e3 * t + 0.3) + 0.5
    fit = decay_fit(t, y, "exponential_sine")
    assert fit.converged
    assert fit.parameters["t_decay"] == pytest.approx(138e-6, rel=0.02)
    assert fit.parameters["frequency"] == pytest.approx(15e3, rel=0.01)


def test_decay_fit_constant_trace_flagged():
    t = np.linspace(0, 1e-4, 20)
    fit = decay_fit(t, np.full_like(t, 0.4), "exponential")
    assert not fit.converged


def test_decay_fit_divergent_sentinel():
    t = np.linspace(0, 1e-4, 30)
    y = 0.5 + 0.2 * np.cos(2 * math.pi * 40e3 * t)  # no damping
    fit = decay_fit(t, y, "exponential_sine")
    assert fit.metadata.get("divergent")
    assert math.isinf(fit.parameters["t_decay"])


def test_decay_fit_uncertainty_scales_with_noise():
    rng = np.random.default_rng(1)
    t = np.linspace(0, 250e-6, 60)
    clean = 0.9 * np.exp(-t / 80e-6) + 0.05
    sigmas = []
    for noise_level in (0.02, 0.01):
        reps = []
        for k in range(4):
            y = clean + rng.normal(0, noise_level, t.size)
            fit = decay_fit(t, y, "exponential", seed=k)
            reps.append(fit.uncertainties["t_decay"])
        sigmas.append(np.mean(reps))
    assert sigmas[1] < sigmas[0]


def test_fit_result_validation():
    with pytest.raises(ValidationError):
        FitResult({"a": 1.0}, {"a": -0.1}, 0.0, True)


def test_wigner_assemble():
    axis = np.linspace(-1, 1, 5)
    grid = axis[None, :] + 1j * axis[:, None]
    parities = np.ones(grid.shape)
    wm = wigner_assemble(grid, parities)
    assert np.allclose(wm.values, 2.0 / math.pi)
    scaled = wigner_assemble(grid, parities, calibration_scale=0.9)
    assert scaled.beta_grid[0, 0] == pytest.approx(grid[0, 0] * 0.9)
    with pytest.raises(ValidationError):
        wigner_assemble(grid, np.full(grid.shape, np.nan))
    with pytest.raises(ValidationError):
        WignerMap(grid, np.full(grid.shape, 1.0))  # exceeds 2/pi + slack


def test_wigner_vacuum_gaussian_closed_form():
    # assemble from exact displaced-parity values of the vacuum
    axis = np.linspace(-1.5, 1.5, 7)
    grid = axis[None, :] + 1j * axis[:, None]
    parities = np.exp(-2.0 * np.abs(grid) ** 2)
    wm = wigner_assemble(grid, parities)
    expected = (2.0 / math.pi) * np.exp(-2.0 * np.abs(grid) ** 2)
    assert np.abs(wm.values - expected).max() < 1e-12
