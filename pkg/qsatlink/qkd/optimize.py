"""
Оптимизация свободных параметров протокола по усреднённой скорости R̄
"""

import math
import logging
from itertools import product
from typing import Callable, Dict, Tuple

import numpy as np
from scipy import optimize

from ..core.exceptions import InvalidParameterError
from ..core.models import (
    ProtocolParams, ProtocolVariant, TransmittanceDistribution, NoiseEnvironment,
    LinkScenario, KeyRateResult, ZeroKeyReason,
)
from .detection import detection_rates
from .noise import stray_photons
from .rates import key_rate_curve, pdt_averaged_rate

logger = logging.getLogger(__name__)

SP_PE_FRACTIONS = (0.1, 0.25, 0.5, 1.0)
SP_QTOL_GRID = tuple(float(q) for q in np.round(np.linspace(0.01, 0.25, 25), 6))

WCP_START_SIGNAL = (0.3, 0.5, 0.7)
WCP_START_BASIS = (0.7, 0.9)
WCP_SWEEPS = 3
WCP_MAXITER = 30


class _Objective:
    """R̄ как функция параметров протокола на фиксированной PDT"""

    def __init__(self, pdt: TransmittanceDistribution, noise_env: NoiseEnvironment,
                 scenario: LinkScenario, eval_point: str):
        occupied = np.flatnonzero(pdt.occupied)
        self.etas = pdt.evaluation_points(eval_point)[occupied]
        self.weights = pdt.bin_prob[occupied]
        self.n_noise = stray_photons(noise_env, scenario)
        self.link = dict(q0=noise_env.Q0, detector_efficiency=scenario.detector_efficiency,
                         optics_transmittance=scenario.optics_transmittance)
        self.calls = 0

    def __call__(self, params: ProtocolParams) -> float:
        self.calls += 1
        curve = key_rate_curve(self.etas, params, self.n_noise, **self.link)
        return float(np.dot(self.weights, curve.rate))

    def observed_qber(self, params: ProtocolParams) -> np.ndarray:
        _, _, error_rate = detection_rates(np.clip(self.etas, 0.0, 1.0), self.n_noise, params, **self.link)
        return error_rate[0]


def _safe(objective: _Objective, build: Callable[[], ProtocolParams]) -> Tuple[float, ProtocolParams]:
    try:
        params = build()
    except InvalidParameterError:
        return 0.0, None
    return objective(params), params


def _optimize_sp(objective: _Objective, base: ProtocolParams) -> Tuple[ProtocolParams, float]:
    n = base.block_n
    best_params, best_rate = base, objective(base)

    candidates = set(SP_QTOL_GRID)
    candidates.add(base.q_tol)
    candidates.update(float(q) for q in objective.observed_qber(base) if q <= 0.5)
    pe_grid = sorted({max(1, int(round(n * f))) for f in SP_PE_FRACTIONS})

    for k, q_tol in product(pe_grid, sorted(candidates)):
        rate, params = _safe(objective, lambda: base.replace(pe_bits=k, q_tol=q_tol))
        if params is not None and rate > best_rate:
            best_params, best_rate = params, rate

    # Уточнение k на непрерывной оси при найденном Q_tol
    if best_rate > 0:
        q_tol = best_params.q_tol
        lo, hi = math.log10(max(1.0, 0.1 * n)), math.log10(float(n))

        def negative(log_k: float) -> float:
            k = max(1, int(round(10 ** log_k)))
            rate, _ = _safe(objective, lambda: base.replace(pe_bits=k, q_tol=q_tol))
            return -rate

        if hi > lo:
            result = optimize.minimize_scalar(negative, bounds=(lo, hi), method='bounded',
                                              options={'xatol': 1e-3})
            k = max(1, int(round(10 ** result.x)))
            rate, params = _safe(objective, lambda: base.replace(pe_bits=k, q_tol=q_tol))
            if params is not None and rate > best_rate:
                best_params, best_rate = params, rate

    return best_params, best_rate


def _wcp_build(base: ProtocolParams, values: Dict[str, float]) -> ProtocolParams:
    mu_vac = base.intensities[2]
    p_vac = 1.0 - values['p_signal'] - values['p_decoy']
    return base.replace(
        intensities=(values['mu_signal'], values['mu_decoy'], mu_vac),
        intensity_probs=(values['p_signal'], values['p_decoy'], p_vac),
        basis_prob=values['basis_prob'],
    )


def _wcp_bounds(name: str, values: Dict[str, float], mu_vac: float) -> Tuple[float, float]:
    if name == 'mu_signal':
        return values['mu_decoy'] + mu_vac + 0.01, 1.0
    if name == 'mu_decoy':
        return mu_vac + 1e-3, values['mu_signal'] - mu_vac - 1e-3
    if name == 'p_signal':
        return 0.05, 1.0 - values['p_decoy'] - 0.01
    if name == 'p_decoy':
        return 0.01, 1.0 - values['p_signal'] - 0.01
    return 0.5, 0.99


def _optimize_wcp(objective: _Objective, base: ProtocolParams) -> Tuple[ProtocolParams, float]:
    mu_vac = base.intensities[2]
    best_values = base.free_parameters()
    best_params, best_rate = base, objective(base)

    for mu_s, p_x in product(WCP_START_SIGNAL, WCP_START_BASIS):
        values = dict(best_values, mu_signal=mu_s, basis_prob=p_x)
        rate, params = _safe(objective, lambda: _wcp_build(base, values))
        if params is not None and rate > best_rate:
            best_values, best_params, best_rate = values, params, rate

    for sweep in range(WCP_SWEEPS):
        start_rate = best_rate
        for name in ('mu_signal', 'mu_decoy', 'p_signal', 'p_decoy', 'basis_prob'):
            lo, hi = _wcp_bounds(name, best_values, mu_vac)
            if hi <= lo:
                continue

            def negative(x: float) -> float:
                rate, _ = _safe(objective, lambda: _wcp_build(base, dict(best_values, **{name: x})))
                return -rate

            result = optimize.minimize_scalar(negative, bounds=(lo, hi), method='bounded',
                                              options={'xatol': 1e-4, 'maxiter': WCP_MAXITER})
            values = dict(best_values, **{name: float(result.x)})
            rate, params = _safe(objective, lambda: _wcp_build(base, values))
            if params is not None and rate > best_rate:
                best_values, best_params, best_rate = values, params, rate
        logger.debug(f"Координатный спуск, проход {sweep + 1}: R̄={best_rate:.6e}")
        if best_rate <= start_rate * (1.0 + 1e-9):
            break

    return best_params, best_rate


def optimize_rate(pdt: TransmittanceDistribution, base_params: ProtocolParams,
                  noise_env: NoiseEnvironment, scenario: LinkScenario,
                  eval_point: str = "mean") -> KeyRateResult:
    """
    Максимизация R̄ по свободным параметрам протокола

    SP: сетка k × Q_tol, затем уточнение k. WCP: координатный спуск по
    интенсивностям, их вероятностям и вероятности базиса X. Исходные
    параметры всегда входят в перебор.
    """
    objective = _Objective(pdt, noise_env, scenario, eval_point)
    if base_params.variant == ProtocolVariant.SINGLE_PHOTON:
        best_params, best_rate = _optimize_sp(objective, base_params)
    else:
        best_params, best_rate = _optimize_wcp(objective, base_params)

    result = pdt_averaged_rate(pdt, best_params, noise_env, scenario, eval_point)
    if result.rate_avg <= 0:
        logger.warning(
            f"Оптимизация {base_params.variant.value} не нашла точки с l > 0 "
            f"({objective.calls} вычислений)"
        )
        result.reason = ZeroKeyReason.OPTIMIZATION_STALLED
    else:
        logger.debug(
            f"Оптимум {base_params.variant.value}: R̄={result.rate_avg:.6e}, "
            f"параметры {result.optimal_params}, {objective.calls} вычислений"
        )
    return result
