"""
Валидатор параметров линии и протокола
Проверяет область применимости модели до запуска расчёта
"""

import logging
from typing import Dict, List, Optional

from .models import (
    LinkScenario, WeatherCondition, SlantGeometry, NoiseEnvironment,
    ProtocolParams, ProtocolVariant,
)

logger = logging.getLogger(__name__)


class ScenarioValidator:
    """Проверка сценария, засветки и протокола"""

    # Пороговые значения для предупреждений
    THRESHOLDS = {
        'h_over_L': 0.25,        # однородный слой атмосферы мал по сравнению с трассой
        'fresnel_min': 0.1,      # дальняя зона для пучка передатчика
        'q0_max': 0.11,          # собственный QBER выше порога BB-84
        'mu_signal_max': 1.0,
        'block_min': 1e4,
        'samples_min': 100,
    }

    def __init__(self, strict_mode: bool = False):
        self.strict_mode = strict_mode
        self.validation_errors: List[str] = []
        self.validation_warnings: List[str] = []

    def _result(self, errors: List[str], warnings: List[str], **extra) -> Dict:
        if self.strict_mode:
            errors = errors + warnings
            warnings = []
        self.validation_errors.extend(errors)
        self.validation_warnings.extend(warnings)
        for message in warnings:
            logger.warning(message)
        return {
            'is_valid': len(errors) == 0,
            'has_warnings': len(warnings) > 0,
            'errors': errors,
            'warnings': warnings,
            **extra,
        }

    def validate_scenario(self, scenario: LinkScenario, weather: Optional[WeatherCondition] = None,
                          geometry: Optional[SlantGeometry] = None) -> Dict:
        """
        Валидирует сценарий линии

        Returns:
            Словарь с результатами валидации
        """
        errors = []
        warnings = []

        if scenario.receiver_efficiency <= 0:
            errors.append('η_det·T_opt = 0: приёмник не регистрирует сигнал')

        if not scenario.is_focused:
            warnings.append(
                f'Пучок не сфокусирован на приёмник (F = {scenario.focal_length:g} м): '
                f'режим экспериментальный'
            )

        if geometry is not None:
            if geometry.h_over_L > self.THRESHOLDS['h_over_L']:
                warnings.append(
                    f'h/L = {geometry.h_over_L:.3f} > {self.THRESHOLDS["h_over_L"]}: '
                    f'приближение тонкого слоя атмосферы неточно'
                )
            fresnel = scenario.wavenumber * scenario.transmitter_waist ** 2 / (2.0 * geometry.L)
            if fresnel < self.THRESHOLDS['fresnel_min']:
                warnings.append(f'Число Френеля Ω = {fresnel:.3g} < {self.THRESHOLDS["fresnel_min"]}')

        if weather is not None and weather.cn2 == 0 and weather.n0 == 0:
            warnings.append('Турбулентность и рассеиватели отсутствуют: PDT вырождена')

        return self._result(errors, warnings, scenario=scenario.label or scenario.direction.value)

    def validate_noise(self, env: NoiseEnvironment) -> Dict:
        errors = []
        warnings = []

        if env.Q0 > self.THRESHOLDS['q0_max']:
            warnings.append(
                f'Собственный QBER Q0 = {env.Q0:g} выше {self.THRESHOLDS["q0_max"]}: ключ будет нулевым'
            )
        if env.delta_t == 0 or env.B_f == 0 or env.omega_fov == 0:
            warnings.append('Окно, фильтр или поле зрения равны нулю: засветка не учитывается')

        return self._result(errors, warnings, noise=env.label or 'custom')

    def validate_protocol(self, params: ProtocolParams) -> Dict:
        errors = []
        warnings = []

        if params.block_n < self.THRESHOLDS['block_min']:
            warnings.append(f'Блок {params.block_n} мал: поправки конечного ключа доминируют')

        if params.variant == ProtocolVariant.SINGLE_PHOTON:
            if params.pe_bits > 10 * params.block_n:
                warnings.append('Число бит для оценки параметров много больше блока')
        else:
            mu = params.intensities
            if mu[0] > self.THRESHOLDS['mu_signal_max']:
                warnings.append(f'Интенсивность сигнала μ = {mu[0]:g} > 1: доля многофотонных импульсов велика')
            if mu[0] <= mu[1] + mu[2]:
                errors.append('Требуется μ_signal > μ_decoy + μ_vacuum для оценки однофотонного вклада')
            if min(params.intensity_probs) == 0:
                errors.append('Все три интенсивности должны посылаться с ненулевой вероятностью')

        eps_total = params.eps_sec + params.eps_cor
        if eps_total >= 1e-3:
            warnings.append(f'ε_sec + ε_cor = {eps_total:g}: слабая гарантия безопасности')

        return self._result(errors, warnings, variant=params.variant.value)

    def validate_sampling(self, samples: int, n_bins: int) -> Dict:
        errors = []
        warnings = []

        if samples < self.THRESHOLDS['samples_min']:
            warnings.append(f'M = {samples}: гистограмма PDT будет шумной')
        if n_bins > samples:
            warnings.append(f'Бинов ({n_bins}) больше, чем выборок ({samples})')
        if samples < 1:
            errors.append('Число выборок должно быть >= 1')

        return self._result(errors, warnings)

    def get_validation_summary(self) -> Dict:
        return {
            'total_errors': len(self.validation_errors),
            'total_warnings': len(self.validation_warnings),
            'errors': list(self.validation_errors),
            'warnings': list(self.validation_warnings),
        }

    def clear(self):
        self.validation_errors = []
        self.validation_warnings = []
