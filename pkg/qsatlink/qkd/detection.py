"""
Прямая модель детектирования: отсчёты и ошибки по интенсивностям и базисам
"""

import logging
from typing import Optional

import numpy as np
from scipy import stats

from ..core.exceptions import InvalidParameterError
from ..core.models import ProtocolParams, ProtocolVariant, ObservedCounts
from .noise import qber, signal_single_photon, signal_wcp, noise_click_probability

logger = logging.getLogger(__name__)

# Симметричный выбор базисов для однофотонного варианта
SP_SIFTING = 0.5

# Хвост пуассоновского распределения фотонов сливается в последний класс
MAX_PHOTONS = 12


def click_probability(n_sig, p_noise: float):
    """P = 1 − (1 − N_sig)(1 − p_noise)"""
    return 1.0 - (1.0 - np.asarray(n_sig, dtype=float)) * (1.0 - p_noise)


def _qber_safe(n_noise: float, n_sig, q0: float):
    n_sig = np.asarray(n_sig, dtype=float)
    if n_noise > 0:
        return qber(n_noise, n_sig, q0)
    # без шума QBER равен Q0; при нулевом сигнале отсчётов нет и значение не используется
    return np.full_like(n_sig, q0)


def signal_expectation(eta, params: ProtocolParams, detector_efficiency: float,
                       optics_transmittance: float) -> np.ndarray:
    """
    Ожидаемый сигнал на импульс: η·η_det·T_opt для SP или вектор
    1 − exp(−μ_k·η·η_det·T_opt) по интенсивностям для WCP (форма (K, ...))
    """
    eta = np.asarray(eta, dtype=float)
    if params.variant == ProtocolVariant.SINGLE_PHOTON:
        return signal_single_photon(eta, detector_efficiency, optics_transmittance)[None, ...]
    mu = np.asarray(params.intensities).reshape((-1,) + (1,) * eta.ndim)
    return signal_wcp(eta[None, ...], mu, detector_efficiency, optics_transmittance)


def detection_rates(eta, n_noise: float, params: ProtocolParams, q0: float = 0.02,
                    detector_efficiency: float = 0.5, optics_transmittance: float = 0.8):
    """
    Вероятности на один посланный импульс

    Returns:
        (x_rate, z_rate, qber_k): отсчёты в базисах X и Z и QBER по интенсивностям,
        массивы формы (K, ...) где K = 1 для SP и 3 для WCP
    """
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0) or np.any(eta > 1):
        raise InvalidParameterError("η должен лежать в [0, 1]")
    if n_noise < 0:
        raise InvalidParameterError("N_noise должен быть >= 0")

    signal = signal_expectation(eta, params, detector_efficiency, optics_transmittance)
    clicks = click_probability(signal, noise_click_probability(n_noise))
    error_rate = _qber_safe(n_noise, signal, q0)

    if params.variant == ProtocolVariant.SINGLE_PHOTON:
        x_rate = clicks * SP_SIFTING
        z_rate = np.zeros_like(x_rate)
    else:
        probs = np.asarray(params.intensity_probs).reshape((-1,) + (1,) * eta.ndim)
        x_rate = probs * params.basis_prob ** 2 * clicks
        z_rate = probs * (1.0 - params.basis_prob) ** 2 * clicks
    return x_rate, z_rate, error_rate


def pulses_for_block(eta, n_noise: float, params: ProtocolParams, **link) -> np.ndarray:
    """
    Число посланных импульсов, нужное для заполнения блока

    SP: (n + k)/(p_sift·P_det); WCP: block_n отсчётов в базисе X.
    """
    x_rate, _, _ = detection_rates(eta, n_noise, params, **link)
    per_pulse = x_rate.sum(axis=0)
    needed = params.block_n + params.pe_bits if params.variant == ProtocolVariant.SINGLE_PHOTON else params.block_n
    with np.errstate(divide='ignore'):
        return np.where(per_pulse > 0, needed / np.where(per_pulse > 0, per_pulse, 1.0), np.inf)


def expected_observations(eta: float, n_noise: float, params: ProtocolParams, pulses: float,
                          q0: float = 0.02, detector_efficiency: float = 0.5,
                          optics_transmittance: float = 0.8, mode: str = "expected",
                          seed: Optional[int] = None) -> ObservedCounts:
    """
    Отсчёты и ошибки по интенсивностям для заданного числа импульсов

    Args:
        eta: Пропускание канала
        n_noise: Шумовые фотоны за окно
        params: Параметры протокола
        pulses: Число посланных импульсов
        mode: "expected" - математические ожидания, "stochastic" - розыгрыш числа фотонов
        seed: Зерно для стохастического режима
    """
    if pulses < 0:
        raise InvalidParameterError("Число импульсов должно быть >= 0")
    link = dict(q0=q0, detector_efficiency=detector_efficiency, optics_transmittance=optics_transmittance)

    if mode == "stochastic":
        return simulate_observations(eta, n_noise, params, int(pulses), seed=seed, **link)
    if mode != "expected":
        raise InvalidParameterError(f"Неизвестный режим: {mode}")

    x_rate, z_rate, error_rate = detection_rates(float(eta), n_noise, params, **link)
    n_x = pulses * x_rate
    n_z = pulses * z_rate
    return ObservedCounts(n_x=n_x, m_x=n_x * error_rate, n_z=n_z, m_z=n_z * error_rate, pulses=pulses)


def simulate_observations(eta: float, n_noise: float, params: ProtocolParams, pulses: int,
                          seed: Optional[int] = None, q0: float = 0.02,
                          detector_efficiency: float = 0.5,
                          optics_transmittance: float = 0.8) -> ObservedCounts:
    """
    Стохастический розыгрыш: число импульсов по интенсивностям и базисам,
    число фотонов по Пуассону, срабатывания и ошибки по биному

    Для WCP возвращает также истинное число однофотонных отсчётов в каждом базисе.
    """
    rng = np.random.default_rng(seed)
    p_noise = noise_click_probability(n_noise)
    t = float(eta) * detector_efficiency * optics_transmittance

    if params.variant == ProtocolVariant.SINGLE_PHOTON:
        signal = np.array([t])
        sifted = rng.binomial(pulses, SP_SIFTING)
        clicks = rng.binomial(sifted, float(click_probability(t, p_noise)))
        error_rate = float(_qber_safe(n_noise, signal, q0)[0])
        errors = rng.binomial(clicks, error_rate)
        zero = np.zeros(1)
        return ObservedCounts(n_x=np.array([clicks], dtype=float), m_x=np.array([errors], dtype=float),
                              n_z=zero, m_z=zero, pulses=float(pulses))

    probs = np.asarray(params.intensity_probs)
    p_x = params.basis_prob
    basis = np.array([p_x ** 2, (1.0 - p_x) ** 2, 1.0 - p_x ** 2 - (1.0 - p_x) ** 2])
    allocation = rng.multinomial(pulses, np.outer(probs, basis).ravel()).reshape(len(probs), 3)

    photons = np.arange(MAX_PHOTONS + 1)
    photon_signal = -np.expm1(photons * np.log1p(-t)) if t < 1 else (photons > 0).astype(float)
    photon_clicks = click_probability(photon_signal, p_noise)
    photon_errors = np.clip(_qber_safe(n_noise, photon_signal, q0), 0.0, 1.0)

    counts = np.zeros((2, len(probs)))
    errors = np.zeros((2, len(probs)))
    single = np.zeros(2)
    for k, mu in enumerate(params.intensities):
        pmf = stats.poisson.pmf(photons, mu)
        pmf[-1] += stats.poisson.sf(MAX_PHOTONS, mu)
        for b in range(2):
            split = rng.multinomial(allocation[k, b], pmf / pmf.sum())
            detected = rng.binomial(split, photon_clicks)
            wrong = rng.binomial(detected, photon_errors)
            counts[b, k] = detected.sum()
            errors[b, k] = wrong.sum()
            single[b] += detected[1]

    return ObservedCounts(n_x=counts[0], m_x=errors[0], n_z=counts[1], m_z=errors[1],
                          pulses=float(pulses), single_photon_x=float(single[0]),
                          single_photon_z=float(single[1]))
