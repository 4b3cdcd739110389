import numpy as np
import pytest

from qsatlink.core.exceptions import InvalidParameterError
from qsatlink.core.models import ProtocolParams, ProtocolVariant
from qsatlink.qkd.detection import (
    SP_SIFTING, click_probability, detection_rates, pulses_for_block,
    expected_observations, simulate_observations,
)


def test_single_photon_rates(sp_params):
    x_rate, z_rate, error_rate = detection_rates(0.1, 0.0, sp_params)
    assert x_rate.shape == (1,)
    assert x_rate[0] == pytest.approx(SP_SIFTING * 0.1 * 0.5 * 0.8)
    assert z_rate[0] == 0.0
    assert error_rate[0] == pytest.approx(0.02)


def test_wcp_rates_split_by_intensity_and_basis(wcp_params):
    x_rate, z_rate, _ = detection_rates(np.array([0.05, 0.2]), 1e-6, wcp_params)
    assert x_rate.shape == (3, 2)
    ratio = x_rate / z_rate
    expected = (wcp_params.basis_prob / (1.0 - wcp_params.basis_prob)) ** 2
    np.testing.assert_allclose(ratio, expected)
    # Сигнальное состояние даёт больше отсчётов, чем ложное и вакуумное
    assert np.all(x_rate[0] > x_rate[1]) and np.all(x_rate[1] > x_rate[2])


def test_noise_adds_clicks():
    assert click_probability(0.0, 1e-3) == pytest.approx(1e-3)
    assert click_probability(0.5, 0.5) == pytest.approx(0.75)


def test_pulses_fill_the_block(sp_params):
    pulses = pulses_for_block(0.1, 0.0, sp_params)
    x_rate, _, _ = detection_rates(0.1, 0.0, sp_params)
    assert pulses * x_rate.sum(axis=0) == pytest.approx(sp_params.block_n + sp_params.pe_bits)
    assert np.isinf(pulses_for_block(0.0, 0.0, sp_params))


def test_expected_observations_scale_with_pulses(wcp_params):
    one = expected_observations(0.1, 1e-6, wcp_params, 1e6)
    ten = expected_observations(0.1, 1e-6, wcp_params, 1e7)
    np.testing.assert_allclose(ten.n_x, 10 * one.n_x)
    assert one.qber_x == pytest.approx(ten.qber_x)
    assert one.single_photon_x is None


def test_simulated_counts_match_expectation(wcp_params):
    pulses = 10 ** 7
    expected = expected_observations(0.1, 1e-5, wcp_params, pulses)
    simulated = simulate_observations(0.1, 1e-5, wcp_params, pulses, seed=9)
    # Вакуумоподобное состояние даёт единицы отсчётов, сравниваются сигнал и ложное
    np.testing.assert_allclose(simulated.n_x[:2], expected.n_x[:2], rtol=0.05)
    assert simulated.single_photon_x < simulated.total_x
    assert simulated.errors_x <= simulated.total_x


def test_simulation_is_reproducible(sp_params):
    a = simulate_observations(0.2, 1e-5, sp_params, 10 ** 5, seed=1)
    b = simulate_observations(0.2, 1e-5, sp_params, 10 ** 5, seed=1)
    np.testing.assert_array_equal(a.n_x, b.n_x)
    np.testing.assert_array_equal(a.m_x, b.m_x)


def test_invalid_inputs(sp_params):
    with pytest.raises(InvalidParameterError):
        detection_rates(1.5, 0.0, sp_params)
    with pytest.raises(InvalidParameterError):
        detection_rates(0.5, -1.0, sp_params)
    with pytest.raises(InvalidParameterError):
        expected_observations(0.1, 0.0, sp_params, 10, mode="guess")
    with pytest.raises(InvalidParameterError):
        ProtocolParams(variant=ProtocolVariant.DECOY_WCP, block_n=10, intensities=(0.1, 0.5, 0.0))
