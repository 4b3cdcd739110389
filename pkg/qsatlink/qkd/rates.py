"""
Длина ключа BB-84 с конечным блоком и скорость, усреднённая по PDT

Однофотонный вариант: l = n(q − h2(Q_tol + μ)) − leak_EC − log2(2/(ε_sec²ε_cor)).
Вариант с ложными состояниями (сигнал, ложное, вакуумоподобное) использует
цепочку оценок Хёффдинга для s_X0, s_X1 и фазовой ошибки φ_X
(Lim, Curty, Walenta, Xu, Zbinden, PRA 89, 022307, 2014); все константы
этой цепочки собраны в _decoy_arrays.
"""

import math
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy import special

from ..core.exceptions import InvalidParameterError
from ..core.models import (
    ProtocolParams, ProtocolVariant, ObservedCounts, DecoyBounds, KeyLength,
    KeyRateResult, ZeroKeyReason, TransmittanceDistribution, NoiseEnvironment, LinkScenario,
)
from .detection import detection_rates
from .noise import stray_photons

logger = logging.getLogger(__name__)

# Число ε-событий в оценке с ложными состояниями
DECOY_EPS_SPLIT = 21

# Коды причин для векторных вычислений
_OK = 0
_REASON_CODES = {
    1: ZeroKeyReason.ABORT_ON_QBER,
    2: ZeroKeyReason.ENTROPY_EXHAUSTED,
    3: ZeroKeyReason.DECOY_BOUNDS_CROSSED,
    4: ZeroKeyReason.PHASE_ERROR_SATURATED,
    5: ZeroKeyReason.NO_SIGNAL,
}
_ABORT, _EXHAUSTED, _CROSSED, _SATURATED, _NO_SIGNAL = 1, 2, 3, 4, 5


def _reason(code: int) -> Optional[ZeroKeyReason]:
    return _REASON_CODES.get(int(code))


def binary_entropy(p):
    """h2(p) = −p·log2 p − (1−p)·log2(1−p), 0·log 0 = 0"""
    arr = np.asarray(p, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1):
        raise InvalidParameterError("Аргумент h2 должен лежать в [0, 1]")
    result = (special.entr(arr) + special.entr(1.0 - arr)) / math.log(2.0)
    return float(result) if result.ndim == 0 else result


def sp_statistical_deviation(n: float, k: float, eps_sec: float) -> float:
    """μ = √((n+k)/(nk) · (k+1)/k · ln(2/ε_sec))"""
    if n < 1 or k < 1:
        raise InvalidParameterError("n и k должны быть >= 1")
    return math.sqrt((n + k) / (n * k) * (k + 1) / k * math.log(2.0 / eps_sec))


def sp_secret_fraction(q: float, q_tol_eff, f_ec: float, q_obs):
    """q − h2(Q_tol + μ) − f_EC·h2(Q_obs): доля секретных бит на бит блока"""
    return q - binary_entropy(q_tol_eff) - f_ec * binary_entropy(q_obs)


def _sp_key_bits(n: int, k: int, q_tol: float, q: float, eps_sec: float, eps_cor: float,
                 f_ec: float, q_obs: np.ndarray):
    q_obs = np.clip(np.asarray(q_obs, dtype=float), 0.0, 1.0)
    mu = sp_statistical_deviation(n, k, eps_sec)
    reasons = np.zeros(q_obs.shape, dtype=int)
    if q_tol + mu >= 0.5:
        reasons[...] = _EXHAUSTED
        return np.zeros(q_obs.shape), reasons

    penalty = math.log2(2.0 / (eps_sec ** 2 * eps_cor))
    raw = n * sp_secret_fraction(q, q_tol + mu, f_ec, q_obs) - penalty
    bits = np.maximum(np.floor(raw), 0.0)

    aborted = q_obs > q_tol
    bits = np.where(aborted, 0.0, bits)
    reasons = np.where(aborted, _ABORT, np.where(bits <= 0, _EXHAUSTED, _OK))
    return bits, reasons


def sp_key_length(n: int, k: int, q_tol: float, q: float = 1.0, eps_sec: float = 1e-9,
                  eps_cor: float = 1e-9, f_ec: float = 1.16, q_obs: float = 0.0) -> KeyLength:
    """
    Длина ключа однофотонного BB-84

    Args:
        n: Число бит блока
        k: Число бит для оценки параметров
        q_tol: Допустимый QBER; при q_obs > q_tol протокол прерывается
        q: Качество приготовления
        eps_sec, eps_cor: Параметры безопасности
        f_ec: Неэффективность коррекции ошибок
        q_obs: Наблюдаемый QBER

    Returns:
        KeyLength; при нуле указана причина
    """
    if not 0.0 <= q_obs <= 1.0:
        raise InvalidParameterError("q_obs должен лежать в [0, 1]")
    bits, reasons = _sp_key_bits(int(n), int(k), q_tol, q, eps_sec, eps_cor, f_ec, np.array([q_obs]))
    mu = sp_statistical_deviation(n, k, eps_sec)
    return KeyLength(bits=int(bits[0]), reason=_reason(reasons[0]),
                     details={'mu': mu, 'q_obs': q_obs, 'q_tol': q_tol})


def hoeffding_deviation(n, eps: float):
    """δ(n, ε) = √(n/2 · ln(1/ε))"""
    return np.sqrt(np.maximum(np.asarray(n, dtype=float), 0.0) / 2.0 * math.log(1.0 / eps))


def _tau(order: int, intensities, probs) -> float:
    """τ_n = Σ_k p_k·e^(−μ_k)·μ_k^n/n!"""
    return float(sum(p * math.exp(-mu) * mu ** order / math.factorial(order)
                     for mu, p in zip(intensities, probs)))


def _phase_error_deviation(eps_sec: float, b, c, d):
    """γ(ε, b, c, d) для перехода от оценки в Z к фазовой ошибке в X"""
    b = np.asarray(b, dtype=float)
    spread = (1.0 - b) * b
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = (c + d) / (c * d * spread)
        inner = (c + d) * spread / (c * d * math.log(2.0)) * np.log2(ratio * DECOY_EPS_SPLIT ** 2 / eps_sec ** 2)
        gamma = np.sqrt(np.maximum(inner, 0.0))
    return np.where((spread > 0) & (c > 0) & (d > 0), gamma, 0.0)


def _decoy_arrays(n_x, m_x, n_z, m_z, params: ProtocolParams):
    """
    Нижние оценки s_X0, s_X1, s_Z1 и верхние v_Z1, φ_X

    Массивы отсчётов имеют форму (3, ...) по интенсивностям (сигнал, ложное, вакуум).
    """
    mu1, mu2, mu3 = params.intensities
    probs = params.intensity_probs
    eps1 = params.eps_sec / DECOY_EPS_SPLIT
    shape = (-1,) + (1,) * (np.ndim(n_x) - 1)
    scale = np.array([math.exp(mu) / p if p > 0 else np.inf for mu, p in zip(params.intensities, probs)]).reshape(shape)
    tau0 = _tau(0, params.intensities, probs)
    tau1 = _tau(1, params.intensities, probs)
    denominator = mu1 * (mu2 - mu3) - mu2 ** 2 + mu3 ** 2

    def vacuum_and_single(counts):
        delta = hoeffding_deviation(counts.sum(axis=0), eps1)
        plus = scale * (counts + delta)
        minus = scale * (counts - delta)
        s0 = np.maximum(tau0 * (mu2 * minus[2] - mu3 * plus[1]) / (mu2 - mu3), 0.0)
        s1 = tau1 * mu1 * (minus[1] - plus[2] - (mu2 ** 2 - mu3 ** 2) / mu1 ** 2 * (plus[0] - s0 / tau0)) / denominator
        return s0, s1

    with np.errstate(invalid='ignore', over='ignore'):
        s_x0, s_x1 = vacuum_and_single(np.asarray(n_x, dtype=float))
        s_z0, s_z1 = vacuum_and_single(np.asarray(n_z, dtype=float))

        m_z = np.asarray(m_z, dtype=float)
        delta_m = hoeffding_deviation(m_z.sum(axis=0), eps1)
        m_plus = scale * (m_z + delta_m)
        m_minus = scale * (m_z - delta_m)
        v_z1 = np.maximum(tau1 * (m_plus[1] - m_minus[2]) / (mu2 - mu3), 0.0)

        safe_s = np.where(s_z1 > 0, s_z1, 1.0)
        ratio = np.where(s_z1 > 0, v_z1 / safe_s, 0.5)
        phi_x = ratio + _phase_error_deviation(params.eps_sec, np.clip(ratio, 0.0, 0.5), s_z1, s_x1)

    return {
        's_x0': s_x0, 's_x1': s_x1, 's_z0': s_z0, 's_z1': s_z1,
        'v_z1': v_z1, 'phi_x': phi_x, 'denominator': denominator,
    }


def decoy_bounds(counts: ObservedCounts, params: ProtocolParams) -> DecoyBounds:
    """Оценки однофотонного и вакуумного вкладов по наблюдаемым отсчётам"""
    _check_decoy_counts(counts, params)
    bounds = _decoy_arrays(counts.n_x, counts.m_x, counts.n_z, counts.m_z, params)
    return DecoyBounds(**{name: float(bounds[name]) for name in
                          ('s_x0', 's_x1', 's_z0', 's_z1', 'v_z1', 'phi_x')})


def _check_decoy_counts(counts: ObservedCounts, params: ProtocolParams):
    if params.variant != ProtocolVariant.DECOY_WCP:
        raise InvalidParameterError("Оценки с ложными состояниями требуют вариант wcp")
    if counts.n_x.shape[0] != 3 or counts.n_z.shape[0] != 3:
        raise InvalidParameterError("Нужны отсчёты для трёх интенсивностей")


def _wcp_key_bits(n_x, m_x, n_z, m_z, params: ProtocolParams):
    n_x = np.asarray(n_x, dtype=float)
    m_x = np.asarray(m_x, dtype=float)
    bounds = _decoy_arrays(n_x, m_x, n_z, m_z, params)
    total = n_x.sum(axis=0)
    errors = m_x.sum(axis=0)

    with np.errstate(invalid='ignore', divide='ignore'):
        e_x = np.where(total > 0, errors / np.where(total > 0, total, 1.0), 0.0)
        phi = bounds['phi_x']
        leak = params.f_ec * total * binary_entropy(np.clip(e_x, 0.0, 1.0))
        penalty = 6.0 * math.log2(DECOY_EPS_SPLIT / params.eps_sec) + math.log2(2.0 / params.eps_cor)
        entropy = binary_entropy(np.clip(phi, 0.0, 0.5))
        raw = bounds['s_x0'] + bounds['s_x1'] * (1.0 - entropy) - leak - penalty
    bits = np.where(np.isfinite(raw), np.maximum(np.floor(raw), 0.0), 0.0)

    crossed = ((bounds['s_x1'] <= 0) | (bounds['s_z1'] <= 0) | (bounds['denominator'] <= 0)
               | (bounds['s_x0'] + bounds['s_x1'] > total) | ~np.isfinite(bounds['s_x1']))
    reasons = np.select(
        [total <= 0, crossed, phi >= 0.5, bits <= 0],
        [_NO_SIGNAL, _CROSSED, _SATURATED, _EXHAUSTED],
        default=_OK,
    )
    bits = np.where(reasons == _OK, bits, 0.0)
    return bits, reasons, bounds


def wcp_key_length(counts: ObservedCounts, params: ProtocolParams) -> KeyLength:
    """
    Длина ключа BB-84 с двумя ложными состояниями

    l = s_X0 + s_X1(1 − h2(φ_X)) − leak_EC − 6·log2(21/ε_sec) − log2(2/ε_cor)
    """
    _check_decoy_counts(counts, params)
    bits, reasons, bounds = _wcp_key_bits(counts.n_x, counts.m_x, counts.n_z, counts.m_z, params)
    details = {name: float(bounds[name]) for name in ('s_x0', 's_x1', 's_z1', 'v_z1', 'phi_x')}
    return KeyLength(bits=int(bits), reason=_reason(reasons), details=details)


@dataclass
class RateCurve:
    """R(η) по набору значений пропускания"""

    eta: np.ndarray
    rate: np.ndarray
    key_bits: np.ndarray
    reasons: np.ndarray
    qber: np.ndarray
    pulses: np.ndarray

    def reason_at(self, i: int) -> Optional[ZeroKeyReason]:
        return _reason(self.reasons[i])


def key_rate_curve(etas, params: ProtocolParams, n_noise: float, q0: float = 0.02,
                   detector_efficiency: float = 0.5, optics_transmittance: float = 0.8) -> RateCurve:
    """R(η) = l(η)/N_sent(η), N_sent заполняет блок block_n отсчётов"""
    etas = np.clip(np.atleast_1d(np.asarray(etas, dtype=float)), 0.0, 1.0)
    x_rate, z_rate, error_rate = detection_rates(
        etas, n_noise, params, q0=q0, detector_efficiency=detector_efficiency,
        optics_transmittance=optics_transmittance,
    )
    per_pulse = x_rate.sum(axis=0)
    has_signal = per_pulse > 0
    safe = np.where(has_signal, per_pulse, 1.0)

    if params.variant == ProtocolVariant.SINGLE_PHOTON:
        q_obs = error_rate[0]
        bits, reasons = _sp_key_bits(params.block_n, params.pe_bits, params.q_tol, params.q,
                                     params.eps_sec, params.eps_cor, params.f_ec, q_obs)
        pulses = (params.block_n + params.pe_bits) / safe
    else:
        pulses = params.block_n / safe
        n_x = pulses * x_rate
        n_z = pulses * z_rate
        bits, reasons, _ = _wcp_key_bits(n_x, n_x * error_rate, n_z, n_z * error_rate, params)
        q_obs = (x_rate * error_rate).sum(axis=0) / safe

    bits = np.where(has_signal, bits, 0.0)
    reasons = np.where(has_signal, reasons, _NO_SIGNAL)
    pulses = np.where(has_signal, pulses, np.inf)
    rate = np.where(has_signal, bits / np.where(has_signal, pulses, 1.0), 0.0)
    return RateCurve(eta=etas, rate=rate, key_bits=bits, reasons=reasons, qber=q_obs, pulses=pulses)


def pdt_averaged_rate(pdt: TransmittanceDistribution, params: ProtocolParams,
                      noise_env: NoiseEnvironment, scenario: LinkScenario,
                      eval_point: str = "mean") -> KeyRateResult:
    """
    R̄ = Σ_i P(η_i)·R(η_i) по занятым бинам PDT

    Args:
        pdt: Распределение пропускания
        params: Параметры протокола
        noise_env: Параметры засветки
        scenario: Сценарий (апертура, длина волны, эффективности)
        eval_point: "mean" - средние η выборок в бине (по умолчанию),
            "center" - центры бинов; линейность по смеси PDT точна только для "center"
    """
    n_noise = stray_photons(noise_env, scenario)
    link = dict(q0=noise_env.Q0, detector_efficiency=scenario.detector_efficiency,
                optics_transmittance=scenario.optics_transmittance)

    occupied = np.flatnonzero(pdt.occupied)
    etas = pdt.evaluation_points(eval_point)[occupied]
    curve = key_rate_curve(etas, params, n_noise, **link)
    weights = pdt.bin_prob[occupied]

    rate_avg = float(np.dot(weights, curve.rate))
    key_length = int(round(float(np.dot(weights, curve.key_bits))))
    point = key_rate_curve(min(pdt.mean_eta, 1.0), params, n_noise, **link)

    bin_rates = np.zeros(pdt.n_bins)
    bin_rates[occupied] = curve.rate
    bin_reasons: List[Optional[ZeroKeyReason]] = [None] * pdt.n_bins
    for j, i in enumerate(occupied):
        bin_reasons[i] = curve.reason_at(j)

    reason = None
    if rate_avg <= 0:
        dominant = int(np.argmax(weights))
        reason = curve.reason_at(dominant) or ZeroKeyReason.ENTROPY_EXHAUSTED

    return KeyRateResult(
        variant=params.variant,
        key_length=key_length,
        rate_per_pulse=float(point.rate[0]),
        rate_avg=rate_avg,
        optimal_params=params.free_parameters(),
        reason=reason,
        rep_rate=params.rep_rate,
        bin_rates=bin_rates,
        bin_reasons=bin_reasons,
    )
