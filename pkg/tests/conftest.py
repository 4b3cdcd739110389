import math

import numpy as np
import pytest

from qsatlink.core.models import (
    TransmittanceDistribution, WeatherCondition, ProtocolParams, ProtocolVariant,
)
from qsatlink.core.presets import default_registry
from qsatlink.physics.transmittance import QuadratureSettings


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture
def micius_down(registry):
    return registry.scenario("micius-down")


@pytest.fixture
def micius_up(registry):
    return registry.scenario("micius-up")


@pytest.fixture
def night1(registry):
    return registry.weather("night1")


@pytest.fixture
def calm():
    """Вакуум: нет ни турбулентности, ни рассеивателей"""
    return WeatherCondition(cn2=0.0, n0=0.0, beta=0.0, label="vacuum")


@pytest.fixture
def coarse_quadrature():
    """Грубая сетка для тестов, где точность η не проверяется"""
    return QuadratureSettings(n_rho=16, n_theta=32, tolerance=1e-3, max_n_rho=64)


@pytest.fixture
def sp_params():
    return ProtocolParams(variant=ProtocolVariant.SINGLE_PHOTON, block_n=10 ** 6)


@pytest.fixture
def wcp_params():
    return ProtocolParams(variant=ProtocolVariant.DECOY_WCP, block_n=10 ** 8, rep_rate=1e9)


@pytest.fixture
def spread_pdt():
    """Синтетическая PDT: η равномерно в [0.02, 0.2]"""
    etas = np.linspace(0.02, 0.2, 400)
    return TransmittanceDistribution.from_samples(etas, n_bins=200, seed=0)


def zenith(deg: float) -> float:
    return math.radians(deg)
