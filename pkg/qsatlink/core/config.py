"""
Конфигурация запуска: файл key: value, слияние с умолчаниями и флагами
"""

import copy
import math
import logging
from pathlib import Path
from typing import Dict, Any, Optional, List, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .exceptions import ConfigurationError
from .models import MAX_ZENITH_DEG
from .presets import default_registry

logger = logging.getLogger(__name__)

# Поля сценария, которые можно переопределить в разделе scenario
SCENARIO_OVERRIDES = (
    'transmitter_waist', 'receiver_radius', 'wavelength', 'sat_altitude', 'atmo_thickness',
    'focal_length', 'pointing_error', 'detector_efficiency', 'optics_transmittance',
)

# Поля, не влияющие на содержимое результатов
RUNTIME_ONLY = {'workers', 'out'}


def merge_dicts(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    """Рекурсивное слияние словарей; значения из update побеждают"""
    for key, value in update.items():
        if key in base and isinstance(base[key], dict) and isinstance(value, dict):
            merge_dicts(base[key], value)
        else:
            base[key] = value
    return base


def parse_sweep(spec: str) -> List[float]:
    """
    Сетка зенитных углов в градусах из 'lo:hi:step' или одного значения

    Raises:
        ConfigurationError: при неверном формате или выходе за [0, 80]
    """
    parts = [p.strip() for p in str(spec).split(':')]
    try:
        values = [float(p) for p in parts]
    except ValueError as e:
        raise ConfigurationError(f"Неверная сетка углов '{spec}': ожидается lo:hi:step") from e

    if len(values) == 1:
        lo = hi = values[0]
        step = 1.0
    elif len(values) == 3:
        lo, hi, step = values
    else:
        raise ConfigurationError(f"Неверная сетка углов '{spec}': ожидается lo:hi:step")

    if step <= 0:
        raise ConfigurationError("Шаг сетки углов должен быть > 0")
    if lo > hi:
        raise ConfigurationError(f"Начало сетки {lo}° больше конца {hi}°")
    if lo < 0 or hi > MAX_ZENITH_DEG:
        raise ConfigurationError(f"Сетка углов должна лежать в [0, {MAX_ZENITH_DEG:g}]°")

    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(v, 10) for v in (lo + step * np.arange(count)).tolist()]


class RunConfig(BaseModel):
    """Полностью разрешённая конфигурация запуска"""

    model_config = ConfigDict(extra='forbid', frozen=True)

    preset: str = 'micius-down'
    weather: str = 'night1'
    noise: Optional[str] = None
    sweep: str = '0'
    samples: int = Field(1000, ge=1)
    bins: int = Field(200, ge=2)
    seed: int = Field(0, ge=0)
    protocol: Literal['sp', 'wcp', 'both', 'none'] = 'both'
    block: Optional[int] = Field(None, ge=1)
    eps_sec: float = Field(1e-9, gt=0.0, lt=1.0)
    eps_cor: float = Field(1e-9, gt=0.0, lt=1.0)
    optimize: bool = False
    eval_point: Literal['center', 'mean'] = 'mean'
    fixed_extinction: bool = False
    scenario: Dict[str, Optional[float]] = Field(default_factory=dict)
    workers: Optional[int] = Field(None, ge=1)
    out: str = 'results'

    @field_validator('preset')
    @classmethod
    def _known_optics(cls, value: str) -> str:
        return default_registry().normalize_name(value, 'optics')

    @field_validator('weather')
    @classmethod
    def _known_weather(cls, value: str) -> str:
        return default_registry().normalize_name(value, 'weather')

    @field_validator('noise')
    @classmethod
    def _known_noise(cls, value: Optional[str]) -> Optional[str]:
        if value is None:
            return None
        return default_registry().normalize_name(value, 'noise')

    @field_validator('protocol', mode='before')
    @classmethod
    def _protocol_lower(cls, value: Any) -> Any:
        return value.strip().lower() if isinstance(value, str) else value

    @field_validator('sweep', mode='before')
    @classmethod
    def _valid_sweep(cls, value: Any) -> str:
        text = str(value).strip()
        parse_sweep(text)
        return text

    @field_validator('scenario')
    @classmethod
    def _known_overrides(cls, value: Dict[str, Optional[float]]) -> Dict[str, Optional[float]]:
        unknown = sorted(set(value) - set(SCENARIO_OVERRIDES))
        if unknown:
            raise ValueError(f"Неизвестные поля сценария: {', '.join(unknown)}")
        return value

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        """Строит конфигурацию; ошибки pydantic превращаются в ConfigurationError"""
        try:
            return cls(**data)
        except ConfigurationError:
            raise
        except ValidationError as e:
            messages = '; '.join(
                f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
            )
            raise ConfigurationError(f"Неверная конфигурация: {messages}") from e

    @property
    def zenith_grid_deg(self) -> List[float]:
        return parse_sweep(self.sweep)

    @property
    def variants(self) -> List[str]:
        if self.protocol == 'both':
            return ['sp', 'wcp']
        if self.protocol == 'none':
            return []
        return [self.protocol]

    def manifest_dict(self) -> Dict[str, Any]:
        """Параметры, определяющие содержимое результатов"""
        return self.model_dump(exclude=RUNTIME_ONLY)


def load_config_file(config_path: Path) -> Dict[str, Any]:
    """
    Читает файл конфигурации из строк key: value

    Raises:
        ConfigurationError: если файл не читается или не является словарём
    """
    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigurationError(f"Не удалось загрузить конфиг {config_path}: {e}") from e

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"Конфиг {config_path} должен содержать строки key: value")
    logger.debug(f"Конфиг {config_path}: {sorted(data)}")
    return data


def resolve_config(defaults: Dict[str, Any], config_path: Optional[Path] = None,
                   overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Умолчания ← файл ← флаги командной строки"""
    merged = copy.deepcopy(defaults)
    if config_path:
        merge_dicts(merged, load_config_file(Path(config_path)))
    if overrides:
        merge_dicts(merged, {k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(merged)


def default_config_text(defaults: Dict[str, Any]) -> str:
    """Текст файла конфигурации по умолчанию с комментариями"""
    header = (
        "# Конфигурация qsatlink\n"
        "# preset: micius-down | micius-up | cubesat-down | cubesat-up\n"
        "# weather: night1..night3 | day1..day3\n"
        "# noise: night-fullmoon | day-clear (по умолчанию по времени суток погоды)\n"
        "# sweep: lo:hi:step в градусах или одно значение\n"
        "# protocol: sp | wcp | both | none\n"
        "# scenario: переопределения оптики, например focal_length или pointing_error\n"
    )
    body = {k: v for k, v in defaults.items() if k not in RUNTIME_ONLY}
    return header + yaml.safe_dump(body, sort_keys=False, allow_unicode=True)
