"""Spectral models, thermal occupation, golden-rule rate function."""

import math

import numpy as np
import pytest

from qswalk.bath import SpectralModel, occupation, thermal_rate


def test_density_values():
    ohmic = SpectralModel("ohmic", 0.4, 2.0)
    np.testing.assert_allclose(ohmic.density(1.0), 0.4 * 1.0 * math.exp(-0.5))
    np.testing.assert_allclose(ohmic.density(0.0), 0.0)
    flat = SpectralModel("flat", 0.7, 3.0)
    np.testing.assert_allclose(flat.density([0.0, 3.0]),
                               [0.7, 0.7 * math.exp(-1.0)])
    with pytest.raises(ValueError):
        ohmic.density(-0.1)
    with pytest.raises(ValueError):
        SpectralModel("lorentzian", 1.0, 1.0)
    with pytest.raises(ValueError):
        SpectralModel("ohmic", -1.0, 1.0)
    with pytest.raises(ValueError):
        SpectralModel("ohmic", 1.0, 0.0)


def test_occupation():
    np.testing.assert_allclose(occupation(1.0, 0.0), 0.0)
    np.testing.assert_allclose(occupation(0.5, 1.0), 1.0 / math.expm1(0.5))
    # high-frequency tail must underflow cleanly, not overflow
    assert occupation(1e6, 1.0) == 0.0
    with pytest.raises(ValueError):
        occupation(0.0, 1.0)


def test_thermal_rate_detailed_balance():
    rng = np.random.default_rng(11)
    model = SpectralModel("ohmic", 0.25, 4.0)
    for _ in range(50):
        w = float(rng.uniform(0.05, 5.0))
        T = float(rng.uniform(0.2, 3.0))
        down = thermal_rate(model, w, T)
        up = thermal_rate(model, -w, T)
        np.testing.assert_allclose(down / up, math.exp(w / T), rtol=1e-12)


def test_thermal_rate_zero_temperature_absorption():
    model = SpectralModel("ohmic", 0.3, 5.0)
    w = np.array([-2.0, -0.1, 0.0, 0.1, 2.0])
    rates = thermal_rate(model, w, 0.0)
    np.testing.assert_allclose(rates[:3], 0.0, atol=0)
    np.testing.assert_allclose(rates[3:], 2.0 * math.pi * model.density(w[3:]))
    with pytest.raises(ValueError):
        thermal_rate(model, 1.0, -0.5)


def test_zero_frequency_rate():
    ohmic = SpectralModel("ohmic", 0.3, 6.0)
    np.testing.assert_allclose(ohmic.zero_frequency_rate(1.5),
                               2.0 * math.pi * 0.3 * 1.5)
    np.testing.assert_allclose(ohmic.zero_frequency_rate(0.0), 0.0)
    flat = SpectralModel("flat", 0.2, 1.0)
    np.testing.assert_allclose(flat.zero_frequency_rate(0.0), 2.0 * math.pi * 0.2)
    with pytest.raises(ValueError):
        flat.zero_frequency_rate(0.5)
