"""
Реестр встроенных наборов параметров: оптика, погода, засветка, протокол
"""

import re
import copy
from functools import lru_cache
import logging
from pathlib import Path
from typing import Dict, Any, List, Optional

import yaml
import pandas as pd

from .exceptions import ConfigurationError
from .models import (
    LinkScenario, LinkDirection, WeatherCondition, NoiseEnvironment,
    ProtocolParams, ProtocolVariant,
)

logger = logging.getLogger(__name__)

PRESETS_PATH = Path(__file__).parent.parent / 'config' / 'presets.yaml'

KINDS = ('optics', 'weather', 'noise', 'protocol')


class PresetRegistry:
    """Загружает presets.yaml и приводит имена наборов к каноническому виду"""

    # Синонимы имён наборов
    NAME_ALIASES = {
        'n1': 'night1', 'ночь1': 'night1', 'night-good': 'night1',
        'n2': 'night2', 'ночь2': 'night2',
        'n3': 'night3', 'ночь3': 'night3', 'night-bad': 'night3',
        'd1': 'day1', 'день1': 'day1', 'day-good': 'day1',
        'd2': 'day2', 'день2': 'day2',
        'd3': 'day3', 'день3': 'day3', 'day-bad': 'day3',

        'micius-downlink': 'micius-down', 'micius': 'micius-down',
        'micius-uplink': 'micius-up',
        'cubesat-downlink': 'cubesat-down', 'cubesat': 'cubesat-down',
        'cubesat-uplink': 'cubesat-up',

        'night': 'night-fullmoon', 'fullmoon': 'night-fullmoon', 'full-moon': 'night-fullmoon',
        'night-full-moon': 'night-fullmoon',
        'day': 'day-clear', 'clear': 'day-clear', 'clear-day': 'day-clear',

        'single-photon': 'sp', 'single': 'sp',
        'decoy': 'wcp', 'decoy-wcp': 'wcp', 'weak-coherent': 'wcp',
    }

    DEFAULT_NOISE = {False: 'night-fullmoon', True: 'day-clear'}

    def __init__(self, presets_path: Optional[Path] = None):
        self.path = Path(presets_path) if presets_path else PRESETS_PATH
        self.data = self._load(self.path)
        logger.debug(f"Загружены наборы параметров из {self.path}")

    @staticmethod
    def _load(path: Path) -> Dict[str, Any]:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigurationError(f"Не удалось прочитать наборы параметров {path}: {e}") from e

        missing = [kind for kind in KINDS if kind not in data]
        if missing:
            raise ConfigurationError(f"В {path} нет разделов: {', '.join(missing)}")
        return data

    def names(self, kind: str) -> List[str]:
        return list(self.data.get(kind, {}).keys())

    def normalize_name(self, name: str, kind: str) -> str:
        """
        Приводит имя набора к каноническому: 'Night-1', 'night_1', 'n1' → 'night1'

        Raises:
            ConfigurationError: если набор не найден
        """
        known = self.names(kind)
        key = re.sub(r'[\s_]+', '-', str(name).strip().lower())
        for candidate in (key, self.NAME_ALIASES.get(key), key.replace('-', '')):
            if candidate in known:
                return candidate
        raise ConfigurationError(
            f"Неизвестный набор {kind}: '{name}'. Доступны: {', '.join(known)}"
        )

    def scenario(self, name: str, zenith: float = 0.0, **overrides) -> LinkScenario:
        """Сценарий линии по имени набора оптики"""
        canonical = self.normalize_name(name, 'optics')
        params = copy.deepcopy(self.data.get('optics_common', {}))
        params.update(self.data['optics'][canonical])
        params.update({k: v for k, v in overrides.items() if v is not None})
        params = {k: (float(v) if k not in ('direction', 'label') else v) for k, v in params.items()}
        params.setdefault('label', canonical)
        return LinkScenario(zenith_angle=zenith, **params)

    def weather(self, name: str) -> WeatherCondition:
        canonical = self.normalize_name(name, 'weather')
        entry = self.data['weather'][canonical]
        return WeatherCondition(
            cn2=float(entry['cn2']),
            n0=float(entry['n0']),
            beta=float(entry.get('beta', 0.7)),
            daytime=bool(entry.get('daytime', False)),
            label=canonical,
        )

    def noise(self, name: str, direction: LinkDirection) -> NoiseEnvironment:
        """Засветка для набора и направления линии"""
        canonical = self.normalize_name(name, 'noise')
        entry = self.data['noise'][canonical]
        direction = LinkDirection(direction)
        values = entry.get(direction.value)
        if values is None:
            raise ConfigurationError(f"Набор засветки '{canonical}' не задан для {direction.value}")
        return NoiseEnvironment(
            daytime=bool(entry.get('daytime', False)),
            label=canonical,
            **{k: float(v) for k, v in values.items()},
        )

    def default_noise_name(self, weather: WeatherCondition) -> str:
        return self.DEFAULT_NOISE[bool(weather.daytime)]

    def protocol(self, variant: str, direction: LinkDirection, **overrides) -> ProtocolParams:
        """Параметры протокола по умолчанию для варианта и направления"""
        canonical = self.normalize_name(variant, 'protocol')
        entry = self.data['protocol'][canonical].get(LinkDirection(direction).value, {})
        params = {k: float(v) for k, v in entry.items()}
        params.update({k: v for k, v in overrides.items() if v is not None})
        return ProtocolParams(variant=ProtocolVariant(canonical), **params)

    def list_presets(self) -> Dict[str, pd.DataFrame]:
        """Таблицы всех наборов для вывода пользователю"""
        common = self.data.get('optics_common', {})
        optics = pd.DataFrame([
            dict(name=name, **common, **entry) for name, entry in self.data['optics'].items()
        ])
        weather = pd.DataFrame([dict(name=name, **entry) for name, entry in self.data['weather'].items()])

        noise_rows = []
        for name, entry in self.data['noise'].items():
            for direction in LinkDirection:
                if direction.value in entry:
                    noise_rows.append(dict(name=name, direction=direction.value,
                                           daytime=entry.get('daytime', False),
                                           **entry[direction.value]))
        protocol_rows = [
            dict(name=name, direction=direction, **values)
            for name, entry in self.data['protocol'].items()
            for direction, values in entry.items()
        ]
        return {
            'optics': optics,
            'weather': weather,
            'noise': pd.DataFrame(noise_rows),
            'protocol': pd.DataFrame(protocol_rows),
        }


@lru_cache(maxsize=1)
def default_registry() -> PresetRegistry:
    """Реестр встроенных наборов, загружается один раз"""
    return PresetRegistry()
