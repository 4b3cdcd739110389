"""
Моменты параметров эллиптического пучка и закон их распределения
"""

import math
import logging
from typing import Tuple

import numpy as np

from ..core.exceptions import InvalidParameterError, MomentMatchingError
from ..core.models import (
    LinkScenario, LinkDirection, WeatherCondition, SlantGeometry,
    BeamMoments, EllipticBeamDistribution,
)

logger = logging.getLogger(__name__)

# Структура (2δ_ij − 0.8) ковариации W_i²
_COV_STRUCTURE = np.array([[1.2, -0.8], [-0.8, 1.2]])

# Относительный порог, ниже которого отрицательные собственные числа считаются округлением
_PSD_ROUNDING = 1e-9


def rytov_variance(cn2: float, wavenumber: float, L: float) -> float:
    """σ_R² = 1.23·C_n²·k^(7/6)·L^(11/6)"""
    return 1.23 * cn2 * wavenumber ** (7.0 / 6.0) * L ** (11.0 / 6.0)


def fresnel_number(wavenumber: float, W0: float, L: float) -> float:
    """Ω = k·W0²/(2L)"""
    return wavenumber * W0 ** 2 / (2.0 * L)


def focusing_factor(fresnel: float, L: float, focal_length) -> float:
    """1 + Ω²(1 − L/F)²; равен 1 для пучка, сфокусированного на приёмник"""
    if focal_length is None:
        return 1.0
    return 1.0 + fresnel ** 2 * (1.0 - L / focal_length) ** 2


def _check_inputs(scenario: LinkScenario, geometry: SlantGeometry, expected: LinkDirection):
    if scenario.direction != expected:
        raise InvalidParameterError(
            f"Ожидалось направление {expected.value}, получено {scenario.direction.value}"
        )
    if geometry.L <= 0 or scenario.transmitter_waist <= 0 or scenario.wavelength <= 0:
        raise InvalidParameterError("L, W0 и λ должны быть > 0")


def _diffraction_term(scenario: LinkScenario, fresnel: float, L: float) -> float:
    factor = focusing_factor(fresnel, L, scenario.focal_length)
    if factor != 1.0:
        logger.warning(
            f"Несфокусированный пучок (F={scenario.focal_length:.3e} м, L={L:.3e} м): "
            f"экспериментальный режим, дифракционный множитель {factor:.4f}"
        )
    return factor


def moments_uplink(scenario: LinkScenario, weather: WeatherCondition,
                   geometry: SlantGeometry) -> BeamMoments:
    """Моменты пучка для линии земля-спутник"""
    _check_inputs(scenario, geometry, LinkDirection.UPLINK)

    k = scenario.wavenumber
    W0 = scenario.transmitter_waist
    L = geometry.L
    ratio = geometry.h_over_L

    sigma2 = rytov_variance(weather.cn2, k, L)
    omega = fresnel_number(k, W0, L)
    scatter = (math.pi / 8.0) * L * weather.n0 * W0 ** 2 * ratio

    var_x0 = 0.419 * sigma2 * W0 ** 2 * omega ** (-7.0 / 6.0) * ratio
    mean_W2 = (W0 ** 2 / omega ** 2) * (
        _diffraction_term(scenario, omega, L) + scatter + 2.6 * sigma2 * omega ** (5.0 / 6.0) * ratio
    )
    amplitude = (W0 ** 4 / omega ** (19.0 / 6.0)) * (1.0 + scatter) * sigma2 * ratio
    cov_W2 = _COV_STRUCTURE * amplitude

    logger.debug(f"Up-link: σ_R²={sigma2:.4e}, Ω={omega:.4e}, ⟨W²⟩={mean_W2:.4e} м²")
    return BeamMoments(var_x0=var_x0, mean_W2=mean_W2, cov_W2=cov_W2, rytov=sigma2, fresnel=omega)


def moments_downlink(scenario: LinkScenario, weather: WeatherCondition,
                     geometry: SlantGeometry) -> BeamMoments:
    """Моменты пучка для линии спутник-земля"""
    _check_inputs(scenario, geometry, LinkDirection.DOWNLINK)

    k = scenario.wavenumber
    W0 = scenario.transmitter_waist
    L = geometry.L
    ratio = geometry.h_over_L

    sigma2 = rytov_variance(weather.cn2, k, L)
    omega = fresnel_number(k, W0, L)
    scatter = (math.pi / 24.0) * L * weather.n0 * W0 ** 2 * ratio ** 3
    turbulence_weight = ratio ** (8.0 / 3.0)

    # Смещение центра: угловая ошибка наведения, умноженная на дальность
    var_x0 = (scenario.pointing_error * L) ** 2
    mean_W2 = (W0 ** 2 / omega ** 2) * (
        _diffraction_term(scenario, omega, L) + scatter
        + 1.6 * sigma2 * omega ** (5.0 / 6.0) * turbulence_weight
    )
    amplitude = 0.375 * (W0 ** 4 / omega ** (19.0 / 6.0)) * (1.0 + scatter) * sigma2 * turbulence_weight
    cov_W2 = _COV_STRUCTURE * amplitude

    logger.debug(f"Down-link: σ_R²={sigma2:.4e}, Ω={omega:.4e}, ⟨W²⟩={mean_W2:.4e} м²")
    return BeamMoments(var_x0=var_x0, mean_W2=mean_W2, cov_W2=cov_W2, rytov=sigma2, fresnel=omega)


def beam_moments(scenario: LinkScenario, weather: WeatherCondition,
                 geometry: SlantGeometry) -> BeamMoments:
    if scenario.direction == LinkDirection.UPLINK:
        return moments_uplink(scenario, weather, geometry)
    return moments_downlink(scenario, weather, geometry)


def lognormal_match(mean_W2: float, cov_W2: np.ndarray, W0: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Логнормальное сопоставление моментов W_i² с гауссовыми Θ_i = ln(W_i²/W0²)

    Returns:
        (mean_Θ, cov_Θ)
    """
    if mean_W2 <= 0 or W0 <= 0:
        raise InvalidParameterError("mean_W2 и W0 должны быть > 0")
    cov_W2 = np.asarray(cov_W2, dtype=float)

    ratio = 1.0 + cov_W2 / mean_W2 ** 2
    if np.any(ratio <= 0):
        raise MomentMatchingError(
            f"1 + cov/⟨W²⟩² <= 0: логнормальное сопоставление невозможно ({ratio.tolist()})"
        )

    m = mean_W2 / W0 ** 2
    c = np.diag(cov_W2) / W0 ** 4
    mean_theta = np.log(m ** 2 / np.sqrt(c + m ** 2))
    cov_theta = np.log(ratio)

    eigvals = np.linalg.eigvalsh(cov_theta)
    if eigvals.min() < 0:
        logger.warning(
            f"Ковариация Θ не является PSD: минимальное собственное число {eigvals.min():.3e}"
        )
    return mean_theta, cov_theta


def _repair_psd(cov: np.ndarray) -> np.ndarray:
    """Обнуляет отрицательные собственные числа и симметризует матрицу"""
    sym = 0.5 * (cov + cov.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    if eigvals.min() >= 0:
        return sym
    scale = max(float(np.abs(eigvals).max()), np.finfo(float).tiny)
    relative = -eigvals.min() / scale
    if relative > _PSD_ROUNDING:
        logger.warning(f"PSD-коррекция ковариации: относительная величина {relative:.3e}")
    else:
        logger.debug(f"PSD-коррекция округления: {relative:.3e}")
    repaired = (eigvecs * np.maximum(eigvals, 0.0)) @ eigvecs.T
    return 0.5 * (repaired + repaired.T)


def _lower_factor(cov: np.ndarray) -> np.ndarray:
    """Множитель F с cov = F·Fᵀ: Холецкий, для вырожденных матриц спектральный корень"""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        eigvals, eigvecs = np.linalg.eigh(cov)
        return eigvecs * np.sqrt(np.maximum(eigvals, 0.0))


def build_distribution(moments: BeamMoments, W0: float) -> EllipticBeamDistribution:
    """Собирает 4-мерный гауссов закон (x0, y0, Θ1, Θ2)"""
    mean_theta, cov_theta = lognormal_match(moments.mean_W2, moments.cov_W2, W0)

    mean = np.array([0.0, 0.0, mean_theta[0], mean_theta[1]])
    cov = np.zeros((4, 4))
    cov[0, 0] = cov[1, 1] = moments.var_x0
    cov[2:, 2:] = cov_theta
    cov = _repair_psd(cov)

    return EllipticBeamDistribution(mean=mean, cov=cov, W0=W0, factor=_lower_factor(cov))


def distribution_for(scenario: LinkScenario, weather: WeatherCondition,
                     geometry: SlantGeometry) -> EllipticBeamDistribution:
    return build_distribution(beam_moments(scenario, weather, geometry), scenario.transmitter_waist)
