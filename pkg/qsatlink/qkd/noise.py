"""
Паразитные фотоны и модель QBER
"""

import logging

import numpy as np
from scipy import constants

from ..core.exceptions import InvalidParameterError, NoSignalError
from ..core.models import NoiseEnvironment, LinkScenario, LinkDirection

logger = logging.getLogger(__name__)


def photon_energy(wavelength: float) -> float:
    """hν = hc/λ, Дж"""
    if wavelength <= 0:
        raise InvalidParameterError("Длина волны должна быть > 0")
    return constants.h * constants.c / wavelength


def stray_photons_downlink(env: NoiseEnvironment, a: float, wavelength: float) -> float:
    """Фотоны фона неба за окно детектирования: (H_b/hν)·Ω_fov·πa²·B_f·Δt"""
    if a <= 0:
        raise InvalidParameterError("Радиус апертуры должен быть > 0")
    return (env.H_b / photon_energy(wavelength)) * env.omega_fov * np.pi * a ** 2 * env.B_f * env.delta_t


def stray_photons_uplink_night(env: NoiseEnvironment, a: float) -> float:
    """Солнечный свет, отражённый Луной и затем Землёй, на приёмнике спутника"""
    if a <= 0:
        raise InvalidParameterError("Радиус апертуры должен быть > 0")
    return (env.A_E * env.A_M * env.R_M ** 2 * a ** 2 * (env.omega_fov / env.d_EM ** 2)
            * env.B_f * env.delta_t * env.H_sun)


def stray_photons_uplink_day(env: NoiseEnvironment, a: float) -> float:
    """Дневной свет, рассеянный Землёй в поле зрения спутника: A_E·H_sun·Ω_fov·a²·B_f·Δt"""
    if a <= 0:
        raise InvalidParameterError("Радиус апертуры должен быть > 0")
    return env.A_E * env.H_sun * env.omega_fov * a ** 2 * env.B_f * env.delta_t


def stray_photons(env: NoiseEnvironment, scenario: LinkScenario) -> float:
    """Шумовые фотоны за окно для направления линии; от положения спутника не зависят"""
    a = scenario.receiver_radius
    if scenario.direction == LinkDirection.DOWNLINK:
        count = stray_photons_downlink(env, a, scenario.wavelength)
    elif env.daytime:
        count = stray_photons_uplink_day(env, a)
    else:
        count = stray_photons_uplink_night(env, a)
    logger.debug(f"Шум {env.label or 'custom'} ({scenario.direction.value}): {count:.4e} фотонов/окно")
    return float(count)


def qber(n_noise, n_sig, q0: float = 0.02):
    """
    QBER = Q0 + ½·N_noise/(N_noise + N_sig)

    Шумовые фотоны считаются полностью неполяризованными.
    """
    n_noise = np.asarray(n_noise, dtype=float)
    n_sig = np.asarray(n_sig, dtype=float)
    if np.any(n_noise < 0) or np.any(n_sig < 0):
        raise InvalidParameterError("Число фотонов должно быть >= 0")
    total = n_noise + n_sig
    if np.any(total <= 0):
        raise NoSignalError("QBER не определён: N_sig = N_noise = 0")
    result = q0 + 0.5 * n_noise / total
    return float(result) if result.ndim == 0 else result


def signal_single_photon(eta, detector_efficiency: float, optics_transmittance: float):
    """N_sig = η·η_det·T_opt для однофотонного источника"""
    return np.asarray(eta, dtype=float) * detector_efficiency * optics_transmittance


def signal_wcp(eta, mu, detector_efficiency: float, optics_transmittance: float):
    """Вероятность срабатывания от сигнала для когерентного импульса: 1 − exp(−μ·η·η_det·T_opt)"""
    return -np.expm1(-np.asarray(mu, dtype=float) * np.asarray(eta, dtype=float)
                     * detector_efficiency * optics_transmittance)


def noise_click_probability(n_noise: float) -> float:
    """Вероятность срабатывания от пуассоновского шума"""
    return float(-np.expm1(-n_noise))
