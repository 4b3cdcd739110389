import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsatlink.core.exceptions import InvalidParameterError
from qsatlink.core.models import ApertureSpec, TransmittanceDistribution, loss_db
from qsatlink.physics.beam_stats import beam_moments, distribution_for
from qsatlink.physics.link_geometry import link_geometry
from qsatlink.physics.pdt_sampler import (
    CHUNK_SIZE, chunk_generator, draw_beam_parameters, sample_transmittances,
    sample_pdt, scenario_pdt, sweep_mean_transmittance,
)


@pytest.fixture
def down_distribution(micius_down, night1):
    return distribution_for(micius_down, night1, link_geometry(micius_down, night1))


def test_chunk_streams_are_independent():
    a = chunk_generator(7, 0).standard_normal(4)
    b = chunk_generator(7, 1).standard_normal(4)
    c = chunk_generator(7, 0, stream=(3,)).standard_normal(4)
    again = chunk_generator(7, 0).standard_normal(4)
    assert not np.allclose(a, b)
    assert not np.allclose(a, c)
    np.testing.assert_array_equal(a, again)


def test_drawn_parameters_follow_distribution(down_distribution):
    params = draw_beam_parameters(down_distribution, chunk_generator(1, 0), 20000)
    assert np.all(params['W1'] > 0) and np.all(params['W2'] > 0)
    assert params['phi0'].min() >= 0.0 and params['phi0'].max() <= math.pi / 2
    assert np.std(params['x0']) == pytest.approx(0.6, rel=0.03)
    theta = 2.0 * np.log(params['W1'] / down_distribution.W0)
    assert np.mean(theta) == pytest.approx(down_distribution.mean[2], abs=0.01)


def test_result_does_not_depend_on_worker_count(down_distribution, coarse_quadrature):
    aperture = ApertureSpec(radius=0.5, chi_ext=0.5)
    M = CHUNK_SIZE + 300
    serial = sample_transmittances(down_distribution, aperture, M, seed=11, workers=1,
                                   settings=coarse_quadrature)
    parallel = sample_transmittances(down_distribution, aperture, M, seed=11, workers=3,
                                     settings=coarse_quadrature)
    assert serial.shape == (M,)
    np.testing.assert_array_equal(serial, parallel)


def test_stream_and_seed_change_samples(down_distribution, coarse_quadrature):
    aperture = ApertureSpec(radius=0.5)
    base = sample_transmittances(down_distribution, aperture, 200, seed=5, settings=coarse_quadrature)
    other_seed = sample_transmittances(down_distribution, aperture, 200, seed=6, settings=coarse_quadrature)
    other_stream = sample_transmittances(down_distribution, aperture, 200, seed=5, stream=(1,),
                                         settings=coarse_quadrature)
    assert not np.array_equal(base, other_seed)
    assert not np.array_equal(base, other_stream)


def test_histogram_is_normalized(down_distribution, coarse_quadrature):
    pdt = sample_pdt(down_distribution, ApertureSpec(radius=0.5, chi_ext=0.5), M=500, n_bins=50,
                     settings=coarse_quadrature)
    assert pdt.bin_prob.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(pdt.bin_prob >= 0)
    # При χ_ext = 0.5 верхняя половина интервала пуста
    assert pdt.bin_prob[25:].sum() == 0.0
    assert pdt.sample_count == 500
    assert pdt.mean_loss_db == pytest.approx(loss_db(pdt.mean_eta))


def test_invalid_sampling_arguments(down_distribution):
    aperture = ApertureSpec(radius=0.5)
    with pytest.raises(InvalidParameterError):
        sample_transmittances(down_distribution, aperture, 0)
    with pytest.raises(InvalidParameterError):
        sample_pdt(down_distribution, aperture, M=10, n_bins=1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=300),
       st.integers(min_value=2, max_value=300))
def test_from_samples_invariants(etas, n_bins):
    pdt = TransmittanceDistribution.from_samples(np.array(etas), n_bins=n_bins)
    assert pdt.bin_prob.sum() == pytest.approx(1.0, abs=1e-12)
    assert pdt.mean_eta == pytest.approx(float(np.mean(etas)))
    occupied = pdt.occupied
    centers = pdt.evaluation_points("mean")[occupied]
    edges = pdt.bin_edges
    assert np.all(centers >= edges[:-1][occupied] - 1e-12)
    assert np.all(centers <= edges[1:][occupied] + 1e-12)


def test_unit_transmittance_lands_in_last_bin():
    pdt = TransmittanceDistribution.from_samples(np.array([1.0, 1.0, 0.0]), n_bins=10)
    assert pdt.bin_prob[-1] == pytest.approx(2 / 3)
    assert pdt.bin_prob[0] == pytest.approx(1 / 3)


def test_mixture_of_distributions():
    low = TransmittanceDistribution.from_samples(np.full(10, 0.05), n_bins=10)
    high = TransmittanceDistribution.from_samples(np.full(10, 0.85), n_bins=10)
    mix = low.mixture(high, 0.25)
    assert mix.bin_prob[0] == pytest.approx(0.25)
    assert mix.bin_prob[8] == pytest.approx(0.75)
    assert mix.mean_eta == pytest.approx(0.25 * 0.05 + 0.75 * 0.85)
    assert mix.bin_mean_eta[8] == pytest.approx(0.85)


@pytest.mark.slow
def test_micius_downlink_mean_transmittance(micius_down, night1):
    pdt = scenario_pdt(micius_down, night1, M=1000, seed=0)
    assert 0.06 < pdt.mean_eta < 0.14
    assert 8.5 < pdt.mean_loss_db < 12.5


@pytest.mark.slow
def test_cubesat_aperture_penalty(registry, night1):
    """Меньшая оптика спутника: потери растут на ≈5 дБ вниз и на ≈9.5 дБ вверх"""
    deltas = {}
    for direction in ('down', 'up'):
        micius = scenario_pdt(registry.scenario(f"micius-{direction}"), night1, M=1000, seed=2)
        cubesat = scenario_pdt(registry.scenario(f"cubesat-{direction}"), night1, M=1000, seed=2)
        deltas[direction] = cubesat.mean_loss_db - micius.mean_loss_db
    assert 3.5 < deltas['down'] < 6.5
    assert 9.0 < deltas['up'] < 10.0


def test_uplink_is_less_spread_than_downlink(micius_down, micius_up, night1):
    down = scenario_pdt(micius_down, night1, M=1000, seed=4)
    up = scenario_pdt(micius_up, night1, M=1000, seed=4)
    assert up.mean_eta < down.mean_eta
    assert up.median_eta < down.median_eta
    assert up.std_eta / up.mean_eta < down.std_eta / down.mean_eta


def test_sweep_rows_follow_grid(micius_down, night1, coarse_quadrature):
    table = sweep_mean_transmittance(micius_down, night1, [0.0, 40.0, 80.0], M=200, workers=2,
                                     settings=coarse_quadrature)
    assert list(table['zenith_deg']) == [0.0, 40.0, 80.0]
    assert table['L_m'].is_monotonic_increasing
    assert table['mean_eta'].iloc[0] > table['mean_eta'].iloc[-1]


def test_density_integrates_to_one():
    pdt = TransmittanceDistribution.from_samples(np.linspace(0.01, 0.4, 300), n_bins=40)
    width = np.diff(pdt.bin_edges)
    density = pdt.density()
    assert float(np.sum(density * width)) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(density[pdt.occupied] * width[pdt.occupied], pdt.bin_prob[pdt.occupied])


@pytest.mark.slow
@pytest.mark.parametrize("name", ["micius-down", "micius-up"])
@pytest.mark.parametrize("zenith_deg", [0.0, 60.0])
def test_sampled_moments_match_analytic(registry, night1, name, zenith_deg):
    scenario = registry.scenario(name, zenith=math.radians(zenith_deg))
    geometry = link_geometry(scenario, night1)
    moments = beam_moments(scenario, night1, geometry)
    dist = distribution_for(scenario, night1, geometry)

    M = 10 ** 6
    params = draw_beam_parameters(dist, chunk_generator(3, 0), M)
    x2 = params['x0'] ** 2
    w1, w2 = params['W1'] ** 2, params['W2'] ** 2
    cross = (w1 - w1.mean()) * (w2 - w2.mean())

    def within_error(sample, expected):
        return abs(sample.mean() - expected) <= 4.0 * sample.std() / math.sqrt(M)

    assert within_error(x2, moments.var_x0)
    assert within_error(w1, moments.mean_W2)
    assert within_error(w2, moments.mean_W2)
    assert within_error((w1 - w1.mean()) ** 2, moments.cov_W2[0, 0])
    assert within_error(cross, moments.cov_W2[0, 1])


@pytest.mark.slow
def test_downlink_pdt_has_deep_fades(micius_down, night1):
    pdt = scenario_pdt(micius_down, night1, M=2000, seed=0)
    low = pdt.bin_edges[1:] <= 0.05
    assert pdt.bin_prob[low].sum() > 0


@pytest.mark.slow
@pytest.mark.parametrize("weather_name", ["night1", "night2", "night3", "day1", "day2", "day3"])
def test_uplink_loses_more_than_downlink_along_the_pass(registry, weather_name):
    weather = registry.weather(weather_name)
    grid = [0.0, 20.0, 40.0, 60.0, 80.0]
    down = sweep_mean_transmittance(registry.scenario("micius-down"), weather, grid, M=20000, seed=1)
    up = sweep_mean_transmittance(registry.scenario("micius-up"), weather, grid, M=1000, seed=1)

    assert np.all(up['loss_db'].to_numpy() > down['loss_db'].to_numpy())

    mean = down['mean_eta'].to_numpy()
    error = down['std_eta'].to_numpy() / math.sqrt(20000)
    slack = 2.0 * np.hypot(error[1:], error[:-1])
    assert np.all(np.diff(mean) <= slack)
