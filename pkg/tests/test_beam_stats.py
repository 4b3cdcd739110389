import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsatlink.core.exceptions import InvalidParameterError, MomentMatchingError
from qsatlink.core.models import BeamMoments, LinkDirection, SlantGeometry, WeatherCondition
from qsatlink.physics.beam_stats import (
    rytov_variance, fresnel_number, focusing_factor, moments_uplink, moments_downlink,
    beam_moments, lognormal_match, build_distribution, distribution_for,
)
from qsatlink.physics.link_geometry import link_geometry


def test_vacuum_limit_downlink(micius_down, calm):
    geometry = link_geometry(micius_down, calm)
    moments = moments_downlink(micius_down, calm, geometry)
    omega = fresnel_number(micius_down.wavenumber, micius_down.transmitter_waist, geometry.L)

    assert moments.rytov == 0.0
    assert moments.mean_W2 == pytest.approx(micius_down.transmitter_waist ** 2 / omega ** 2)
    assert np.all(moments.cov_W2 == 0.0)
    # Остаётся только ошибка наведения: 1.2 мкрад на 500 км
    assert math.sqrt(moments.var_x0) == pytest.approx(0.6, rel=1e-9)


def test_vacuum_limit_uplink(micius_up, calm):
    geometry = link_geometry(micius_up, calm)
    moments = moments_uplink(micius_up, calm, geometry)
    omega = fresnel_number(micius_up.wavenumber, micius_up.transmitter_waist, geometry.L)

    assert moments.var_x0 == 0.0
    assert moments.mean_W2 == pytest.approx(micius_up.transmitter_waist ** 2 / omega ** 2)
    assert np.all(moments.cov_W2 == 0.0)


def test_rytov_variance_night1(micius_down, night1):
    geometry = link_geometry(micius_down, night1)
    sigma2 = rytov_variance(night1.cn2, micius_down.wavenumber, geometry.L)
    assert sigma2 == pytest.approx(435.0, rel=0.02)


def test_direction_dispatch(micius_down, micius_up, night1):
    down = beam_moments(micius_down, night1, link_geometry(micius_down, night1))
    up = beam_moments(micius_up, night1, link_geometry(micius_up, night1))
    # Турбулентность у передатчика расширяет пучок на восходящей линии сильнее
    assert up.mean_W2 / micius_up.transmitter_waist ** 2 > down.mean_W2 / micius_down.transmitter_waist ** 2

    with pytest.raises(InvalidParameterError):
        moments_uplink(micius_down, night1, link_geometry(micius_down, night1))


def test_turbulence_widens_beam(micius_down, night1, calm):
    geometry = link_geometry(micius_down, night1)
    vacuum = moments_downlink(micius_down, calm, geometry)
    turbulent = moments_downlink(micius_down, night1, geometry)
    assert turbulent.mean_W2 > vacuum.mean_W2
    assert turbulent.cov_W2[0, 0] > 0
    assert turbulent.cov_W2[0, 1] < 0


def test_focusing_factor():
    assert focusing_factor(0.2, 5e5, None) == 1.0
    assert focusing_factor(0.2, 5e5, 5e5) == pytest.approx(1.0)
    assert focusing_factor(0.2, 5e5, 2.5e5) == pytest.approx(1.04)


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=0.05, max_value=50.0),
       st.floats(min_value=0.0, max_value=0.3),
       st.floats(min_value=0.2, max_value=1.0))
def test_lognormal_match_reproduces_moments(scale, spread, correlation):
    W0 = 0.5
    mean_W2 = scale * W0 ** 2
    var = (spread * mean_W2) ** 2
    cov_W2 = np.array([[var, -correlation * var * 0.6], [-correlation * var * 0.6, var]])

    mean_theta, cov_theta = lognormal_match(mean_W2, cov_W2, W0)

    first = W0 ** 2 * np.exp(mean_theta + 0.5 * np.diag(cov_theta))
    np.testing.assert_allclose(first, mean_W2, rtol=1e-10)

    level = mean_theta[:, None] + mean_theta[None, :] + 0.5 * (np.diag(cov_theta)[:, None] + np.diag(cov_theta)[None, :])
    second = W0 ** 4 * np.exp(level) * np.expm1(cov_theta)
    np.testing.assert_allclose(second, cov_W2, rtol=1e-8, atol=1e-12 * mean_W2 ** 2)


def test_lognormal_match_without_fluctuations():
    mean_theta, cov_theta = lognormal_match(2.0, np.zeros((2, 2)), 1.0)
    np.testing.assert_allclose(mean_theta, math.log(2.0))
    np.testing.assert_allclose(cov_theta, 0.0)


def test_lognormal_match_impossible_moments():
    with pytest.raises(MomentMatchingError):
        lognormal_match(1.0, np.array([[1.0, -2.0], [-2.0, 1.0]]), 1.0)


def test_distribution_factor_reproduces_covariance(micius_down, night1):
    dist = distribution_for(micius_down, night1, link_geometry(micius_down, night1))
    np.testing.assert_allclose(dist.factor @ dist.factor.T, dist.cov, rtol=1e-10, atol=1e-14)
    assert dist.mean[0] == dist.mean[1] == 0.0
    assert dist.cov[0, 2] == 0.0
    assert dist.phi0_range == (0.0, math.pi / 2)


def test_degenerate_covariance_gets_a_factor():
    moments = BeamMoments(var_x0=0.0, mean_W2=1.0, cov_W2=np.zeros((2, 2)), rytov=0.0, fresnel=1.0)
    dist = build_distribution(moments, 1.0)
    assert dist.is_deterministic
    np.testing.assert_allclose(dist.mean[2:], 0.0, atol=1e-15)


def _corrections(moments, scenario, L):
    """Относительный вклад атмосферы в ⟨W²⟩ сверх дифракции"""
    omega = fresnel_number(scenario.wavenumber, scenario.transmitter_waist, L)
    return moments.mean_W2 / (scenario.transmitter_waist ** 2 / omega ** 2) - 1.0


@pytest.mark.parametrize("direction, turbulence_power, scatter_power", [
    ("up", 1.0, 1.0),
    ("down", 8.0 / 3.0, 3.0),
])
def test_moments_scale_with_atmospheric_fraction(registry, night1, direction, turbulence_power,
                                                 scatter_power):
    scenario = registry.scenario(f"micius-{direction}")
    L, h1, h2 = 1.0e6, 2.0e4, 4.0e4
    turbulence = WeatherCondition(cn2=night1.cn2, n0=0.0)
    scatter = WeatherCondition(cn2=0.0, n0=night1.n0)

    thin = beam_moments(scenario, turbulence, SlantGeometry(L=L, h=h1))
    thick = beam_moments(scenario, turbulence, SlantGeometry(L=L, h=h2))
    factor = (h2 / h1) ** turbulence_power
    assert _corrections(thick, scenario, L) / _corrections(thin, scenario, L) == pytest.approx(factor, rel=1e-10)
    assert thick.cov_W2[0, 0] / thin.cov_W2[0, 0] == pytest.approx(factor, rel=1e-10)
    if direction == "up":
        assert thick.var_x0 / thin.var_x0 == pytest.approx(factor, rel=1e-10)
    else:
        assert thick.var_x0 == thin.var_x0

    thin = beam_moments(scenario, scatter, SlantGeometry(L=L, h=h1))
    thick = beam_moments(scenario, scatter, SlantGeometry(L=L, h=h2))
    assert _corrections(thick, scenario, L) / _corrections(thin, scenario, L) == pytest.approx(
        (h2 / h1) ** scatter_power, rel=1e-10)


@pytest.mark.parametrize("name", ["micius-up", "micius-down", "cubesat-up", "cubesat-down"])
def test_semi_axes_are_anticorrelated(registry, night1, name):
    scenario = registry.scenario(name, zenith=math.radians(30.0))
    moments = beam_moments(scenario, night1, link_geometry(scenario, night1))
    assert moments.cov_W2[0, 1] / moments.cov_W2[0, 0] == pytest.approx(-2.0 / 3.0, rel=1e-12)
    assert moments.cov_W2[1, 1] == moments.cov_W2[0, 0]


def test_whole_path_in_atmosphere(micius_down, micius_up, night1):
    L = 2.0e4
    geometry = SlantGeometry(L=L, h=L)
    for scenario, turbulence, scatter, amplitude in ((micius_up, 2.6, math.pi / 8.0, 1.0),
                                                     (micius_down, 1.6, math.pi / 24.0, 0.375)):
        W0, k = scenario.transmitter_waist, scenario.wavenumber
        sigma2 = rytov_variance(night1.cn2, k, L)
        omega = fresnel_number(k, W0, L)
        medium = scatter * L * night1.n0 * W0 ** 2

        moments = beam_moments(scenario, night1, geometry)
        assert moments.mean_W2 == pytest.approx(
            W0 ** 2 / omega ** 2 * (1.0 + medium + turbulence * sigma2 * omega ** (5.0 / 6.0)), rel=1e-12)
        assert moments.cov_W2[0, 0] == pytest.approx(
            1.2 * amplitude * W0 ** 4 / omega ** (19.0 / 6.0) * (1.0 + medium) * sigma2, rel=1e-12)


@pytest.mark.parametrize("zenith_deg", [0.0, 45.0, 70.0])
def test_uplink_corrections_exceed_downlink(micius_down, night1, zenith_deg):
    down = micius_down.at_zenith(math.radians(zenith_deg))
    up = replace(down, direction=LinkDirection.UPLINK)
    geometry = link_geometry(down, night1)

    up_moments = beam_moments(up, night1, geometry)
    down_moments = beam_moments(down, night1, geometry)
    assert _corrections(up_moments, up, geometry.L) > _corrections(down_moments, down, geometry.L)
    assert up_moments.cov_W2[0, 0] > down_moments.cov_W2[0, 0]


@pytest.mark.parametrize("name", ["micius-up", "micius-down"])
def test_moments_grow_with_turbulence_and_scatterers(registry, name):
    scenario = registry.scenario(name, zenith=math.radians(40.0))
    geometry = link_geometry(scenario, WeatherCondition(cn2=0.0, n0=0.0))

    def stacked(weathers):
        moments = [beam_moments(scenario, w, geometry) for w in weathers]
        return (np.array([m.mean_W2 for m in moments]), np.array([m.cov_W2[0, 0] for m in moments]),
                np.array([m.var_x0 for m in moments]))

    levels = [0.0, 1e-17, 1e-16, 1.5e-16, 1e-15]
    for series in stacked([WeatherCondition(cn2=c, n0=0.61) for c in levels]):
        assert np.all(np.diff(series) >= 0)
    for series in stacked([WeatherCondition(cn2=1.5e-16, n0=n) for n in (0.0, 0.01, 0.1, 0.61, 3.0)]):
        assert np.all(np.diff(series) >= 0)
