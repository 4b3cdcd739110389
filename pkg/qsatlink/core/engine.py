"""
Основной движок QSatLink
"""

import json
import math
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Dict, Any, Callable, Iterable, Tuple

import pandas as pd

from .. import __version__
from .config import RunConfig, resolve_config
from .exceptions import QSatLinkError, ConfigurationError
from .models import (
    LinkScenario, WeatherCondition, NoiseEnvironment, ProtocolParams,
    TransmittanceDistribution, ApertureSpec, KeyRateResult,
)
from .presets import PresetRegistry, default_registry
from .validator import ScenarioValidator
from ..physics.link_geometry import link_geometry
from ..physics.beam_stats import distribution_for
from ..physics.pdt_sampler import sample_pdt, default_workers, DEFAULT_SAMPLES_SINGLE, DEFAULT_SAMPLES_SWEEP
from ..qkd.rates import pdt_averaged_rate
from ..qkd.optimize import optimize_rate
from ..utils.manifest import write_manifest, read_manifest

logger = logging.getLogger(__name__)

SUMMARY_HEADER = '# qsatlink summary v1'
PDT_HEADER = '# qsatlink pdt v1'
FLOAT_FORMAT = '%.10g'

SUMMARY_COLUMNS = [
    'zenith_deg', 'L_m', 'h_m', 'chi_ext', 'mean_eta', 'median_eta', 'std_eta', 'loss_db',
    'rate_sp', 'rate_wcp', 'reason_sp', 'reason_wcp', 'params_sp', 'params_wcp',
]

WEATHER_SET = ('night1', 'night2', 'night3', 'day1', 'day2', 'day3')


def _ordered_map(fn: Callable, items: Iterable, workers: int) -> List:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))


def pdt_filename(zenith_deg: float) -> str:
    return f"pdt_z{zenith_deg:04.1f}"


class LinkSimEngine:
    """Расчёт PDT и скоростей ключа по конфигурации запуска"""

    def __init__(self, config_path: Optional[Path] = None,
                 overrides: Optional[Dict[str, Any]] = None,
                 registry: Optional[PresetRegistry] = None):
        """
        Инициализирует движок

        Args:
            config_path: Путь к файлу конфигурации (опционально)
            overrides: Значения из командной строки, имеют приоритет над файлом
            registry: Реестр наборов параметров (по умолчанию встроенный)
        """
        self.registry = registry or default_registry()
        self.config = self._load_config(config_path, overrides)
        self.validator = ScenarioValidator()

        logger.info("LinkSimEngine инициализирован")

    @classmethod
    def from_config(cls, config: RunConfig, registry: Optional[PresetRegistry] = None) -> 'LinkSimEngine':
        engine = cls.__new__(cls)
        engine.registry = registry or default_registry()
        engine.config = config
        engine.validator = ScenarioValidator()
        return engine

    @staticmethod
    def default_config() -> Dict[str, Any]:
        return {
            'preset': 'micius-down',
            'weather': 'night1',
            'noise': None,
            'sweep': '0',
            'samples': DEFAULT_SAMPLES_SWEEP,
            'bins': 200,
            'seed': 0,
            'protocol': 'both',
            'block': None,
            'eps_sec': 1e-9,
            'eps_cor': 1e-9,
            'optimize': False,
            'eval_point': 'mean',
            'fixed_extinction': False,
            'scenario': {},
            'workers': None,
            'out': 'results',
        }

    def _load_config(self, config_path: Optional[Path],
                      overrides: Optional[Dict[str, Any]]) -> RunConfig:
        """Умолчания, затем файл конфигурации, затем флаги"""
        return resolve_config(self.default_config(), config_path, overrides)

    # --- сборка входных объектов ---

    def build_scenario(self, zenith_deg: float = 0.0, config: Optional[RunConfig] = None) -> LinkScenario:
        config = config or self.config
        return self.registry.scenario(config.preset, math.radians(zenith_deg), **config.scenario)

    def build_weather(self, config: Optional[RunConfig] = None) -> WeatherCondition:
        return self.registry.weather((config or self.config).weather)

    def build_noise(self, scenario: LinkScenario, weather: WeatherCondition,
                    config: Optional[RunConfig] = None) -> NoiseEnvironment:
        config = config or self.config
        name = config.noise or self.registry.default_noise_name(weather)
        return self.registry.noise(name, scenario.direction)

    def build_protocol(self, variant: str, scenario: LinkScenario,
                       config: Optional[RunConfig] = None) -> ProtocolParams:
        config = config or self.config
        return self.registry.protocol(
            variant, scenario.direction,
            block_n=config.block, eps_sec=config.eps_sec, eps_cor=config.eps_cor,
        )

    def validate(self, config: Optional[RunConfig] = None):
        """
        Проверяет сценарий на крайних точках сетки

        Raises:
            ConfigurationError: если есть ошибки валидации
        """
        config = config or self.config
        weather = self.build_weather(config)
        errors: List[str] = []

        for zenith_deg in sorted({min(config.zenith_grid_deg), max(config.zenith_grid_deg)}):
            scenario = self.build_scenario(zenith_deg, config)
            geometry = link_geometry(scenario, weather, fixed_extinction=config.fixed_extinction)
            errors.extend(self.validator.validate_scenario(scenario, weather, geometry)['errors'])

        scenario = self.build_scenario(config.zenith_grid_deg[0], config)
        errors.extend(self.validator.validate_noise(self.build_noise(scenario, weather, config))['errors'])
        for variant in config.variants:
            errors.extend(self.validator.validate_protocol(self.build_protocol(variant, scenario, config))['errors'])
        errors.extend(self.validator.validate_sampling(config.samples, config.bins)['errors'])

        if errors:
            raise ConfigurationError("Конфигурация не прошла проверку: " + "; ".join(errors))

    # --- расчёт ---

    def evaluate_point(self, index: int, zenith_deg: float, sampler_workers: int = 1,
                       config: Optional[RunConfig] = None) -> Tuple[Dict[str, Any], TransmittanceDistribution,
                                                                    Dict[str, KeyRateResult]]:
        """
        PDT и скорости ключа для одной точки сетки

        Returns:
            (строка сводки, PDT, результаты по вариантам протокола)
        """
        config = config or self.config
        try:
            scenario = self.build_scenario(zenith_deg, config)
            weather = self.build_weather(config)
            geometry = link_geometry(scenario, weather, fixed_extinction=config.fixed_extinction)
            dist = distribution_for(scenario, weather, geometry)
            aperture = ApertureSpec(radius=scenario.receiver_radius, chi_ext=geometry.chi_ext)
            pdt = sample_pdt(dist, aperture, config.samples, config.bins, config.seed,
                             sampler_workers, stream=(index,))

            results: Dict[str, KeyRateResult] = {}
            if config.variants:
                noise_env = self.build_noise(scenario, weather, config)
                for variant in config.variants:
                    params = self.build_protocol(variant, scenario, config)
                    if config.optimize:
                        results[variant] = optimize_rate(pdt, params, noise_env, scenario, config.eval_point)
                    else:
                        results[variant] = pdt_averaged_rate(pdt, params, noise_env, scenario, config.eval_point)

        except QSatLinkError as e:
            logger.error(f"Ошибка в точке θ={zenith_deg}°: {e}")
            raise

        row = {
            'zenith_deg': zenith_deg,
            'L_m': geometry.L,
            'h_m': geometry.h,
            'chi_ext': geometry.chi_ext,
            'mean_eta': pdt.mean_eta,
            'median_eta': pdt.median_eta,
            'std_eta': pdt.std_eta,
            'loss_db': pdt.mean_loss_db,
        }
        for variant in ('sp', 'wcp'):
            result = results.get(variant)
            row[f'rate_{variant}'] = result.rate_avg if result else None
            row[f'reason_{variant}'] = result.reason.value if result and result.reason else ''
            row[f'params_{variant}'] = (json.dumps(result.optimal_params, sort_keys=True)
                                        if result else '')
            if result and result.rate_avg <= 0:
                logger.warning(f"θ={zenith_deg}°: R̄_{variant} = 0 ({row[f'reason_{variant}']})")

        logger.debug(f"θ={zenith_deg}°: ⟨η⟩={pdt.mean_eta:.5e}, потери {pdt.mean_loss_db:.3f} дБ")
        return row, pdt, results

    def run_sweep(self, config: Optional[RunConfig] = None,
                  workers: Optional[int] = None) -> Tuple[pd.DataFrame, List[TransmittanceDistribution],
                                                          List[Dict[str, KeyRateResult]]]:
        """
        Расчёт по всей сетке углов; строки в порядке сетки

        Точки считаются параллельно; если точек меньше, чем потоков,
        параллелится выборка внутри точки.
        """
        config = config or self.config
        grid = config.zenith_grid_deg
        workers = workers or config.workers or default_workers()
        point_workers, sampler_workers = (workers, 1) if len(grid) >= workers else (1, workers)

        logger.info(
            f"Развёртка {config.preset}/{config.weather}: {len(grid)} точек, M={config.samples}, "
            f"протоколы {config.variants or '-'}"
        )
        outcomes = _ordered_map(
            lambda item: self.evaluate_point(item[0], item[1], sampler_workers, config),
            enumerate(grid), point_workers,
        )
        summary = pd.DataFrame([row for row, _, _ in outcomes], columns=SUMMARY_COLUMNS)
        if len(summary) != len(grid):
            raise QSatLinkError(f"Получено {len(summary)} точек вместо {len(grid)}")
        return summary, [pdt for _, pdt, _ in outcomes], [res for _, _, res in outcomes]

    # --- экспорт ---

    @staticmethod
    def export_summary(summary: pd.DataFrame, output_path: Path) -> Path:
        """Сводка развёртки с версионированной строкой-заголовком"""
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(output_path, 'w', encoding='utf-8', newline='') as f:
            f.write(SUMMARY_HEADER + '\n')
            summary.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
        logger.info(f"Сводка записана: {output_path} ({len(summary)} строк)")
        return output_path

    @staticmethod
    def export_pdt(pdt: TransmittanceDistribution, output_path: Path) -> Path:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(output_path, 'w', encoding='utf-8', newline='') as f:
            f.write(PDT_HEADER + '\n')
            pdt.to_dataframe().to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
        return output_path

    @staticmethod
    def export_json(data: Dict[str, Any], output_path: Path) -> Path:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(output_path, 'w', encoding='utf-8') as f:
            json.dump(data, f, ensure_ascii=False, indent=2, sort_keys=True)
            f.write('\n')
        return output_path

    def run_scenario(self, out_dir: Optional[Path] = None) -> Dict[str, str]:
        """
        Полный запуск: PDT по точкам, сводка, манифест

        Returns:
            Имя файла → описание
        """
        config = self.config
        out_dir = Path(out_dir or config.out)
        self.validate(config)

        summary, pdts, results = self.run_sweep(config)
        artifacts: Dict[str, str] = {}

        for row, pdt, point_results in zip(summary.to_dict('records'), pdts, results):
            stem = pdt_filename(row['zenith_deg'])
            self.export_pdt(pdt, out_dir / f"{stem}.csv")
            self.export_json({
                'zenith_deg': row['zenith_deg'],
                'geometry': {'L_m': row['L_m'], 'h_m': row['h_m'], 'chi_ext': row['chi_ext']},
                'pdt': pdt.summary(),
                'rates': {variant: result.to_dict() for variant, result in point_results.items()},
            }, out_dir / f"{stem}.json")
            artifacts[f"{stem}.csv"] = f"PDT, θ={row['zenith_deg']}°"
            artifacts[f"{stem}.json"] = f"Сводка точки θ={row['zenith_deg']}°"

        self.export_summary(summary, out_dir / 'summary.csv')
        artifacts['summary.csv'] = 'Сводка развёртки по зенитному углу'
        write_manifest(out_dir, 'run', config.manifest_dict(), artifacts, __version__)

        logger.info(f"Запуск завершён: {len(artifacts)} файлов в {out_dir}")
        return artifacts

    def reproduce_figures(self, out_dir: Path, single_samples: int = DEFAULT_SAMPLES_SINGLE,
                          sweep_samples: int = DEFAULT_SAMPLES_SWEEP, sweep_step_deg: float = 5.0,
                          optimize: bool = False, seed: int = 0, bins: int = 200,
                          workers: Optional[int] = None) -> Dict[str, str]:
        """
        Набор данных для всех графиков: PDT в зените, пропускание по углу
        для шести погодных условий, CubeSat, скорости ключа днём и ночью
        """
        out_dir = Path(out_dir)
        workers = workers or self.config.workers or default_workers()
        sweep = f"0:80:{sweep_step_deg:g}"
        base = RunConfig.from_dict({
            'sweep': sweep, 'samples': sweep_samples, 'bins': bins, 'seed': seed,
            'optimize': optimize, 'protocol': 'none',
        })
        artifacts: Dict[str, str] = {}

        def derived(**changes) -> RunConfig:
            return RunConfig.from_dict({**base.model_dump(), **changes})

        for preset in ('micius-down', 'micius-up'):
            direction = preset.split('-')[1] + 'link'
            cfg = derived(preset=preset, weather='night1', sweep='0', samples=single_samples)
            _, pdts, _ = self.run_sweep(cfg, workers)
            name = f"pdt_{direction}_micius_night1_zenith0.csv"
            self.export_pdt(pdts[0], out_dir / name)
            artifacts[name] = f"PDT {direction}, Micius, night1, θ=0, M={single_samples}"

        for preset in ('micius-down', 'micius-up'):
            direction = preset.split('-')[1] + 'link'
            frames = []
            for weather in WEATHER_SET:
                summary, _, _ = self.run_sweep(derived(preset=preset, weather=weather, fixed_extinction=True),
                                               workers)
                frames.append(summary[SUMMARY_COLUMNS[:8]].assign(weather=weather))
            name = f"transmittance_vs_zenith_{direction}_micius.csv"
            self.export_summary(pd.concat(frames, ignore_index=True), out_dir / name)
            artifacts[name] = f"⟨η⟩ по углу, {direction}, Micius, шесть погодных условий, χ_ext фиксирован"

        frames = []
        for preset in ('cubesat-down', 'cubesat-up'):
            summary, _, _ = self.run_sweep(derived(preset=preset, weather='night1', fixed_extinction=True), workers)
            frames.append(summary[SUMMARY_COLUMNS[:8]].assign(preset=preset))
        name = "transmittance_vs_zenith_cubesat.csv"
        self.export_summary(pd.concat(frames, ignore_index=True), out_dir / name)
        artifacts[name] = "⟨η⟩ по углу, CubeSat, night1, χ_ext фиксирован"

        for preset, weather in (('micius-down', 'night1'), ('micius-down', 'day1'),
                                ('micius-up', 'night1'), ('micius-up', 'day1'),
                                ('cubesat-down', 'night1'), ('cubesat-down', 'day1'),
                                ('cubesat-up', 'night1')):
            optics, direction = preset.split('-')
            time_of_day = 'day' if weather.startswith('day') else 'night'
            summary, _, _ = self.run_sweep(derived(preset=preset, weather=weather, protocol='both'), workers)
            name = f"key_rate_{direction}link_{optics}_{time_of_day}.csv"
            self.export_summary(summary, out_dir / name)
            artifacts[name] = f"R̄ SP и WCP по углу, {direction}link, {optics}, {weather}"

        write_manifest(out_dir, 'reproduce', {
            'single_samples': single_samples, 'sweep_samples': sweep_samples,
            'sweep_step_deg': sweep_step_deg, 'optimize': optimize, 'seed': seed, 'bins': bins,
        }, artifacts, __version__)
        logger.info(f"Набор данных для графиков записан: {len(artifacts)} файлов в {out_dir}")
        return artifacts


def replay(manifest_path: Path, out_dir: Path, workers: Optional[int] = None) -> Dict[str, str]:
    """Повторяет запуск по манифесту в новый каталог"""
    manifest = read_manifest(Path(manifest_path))
    if manifest.get('version') != __version__:
        logger.warning(f"Манифест создан версией {manifest.get('version')}, текущая {__version__}")

    if manifest['kind'] == 'run':
        config = RunConfig.from_dict({**manifest['config'], 'workers': workers, 'out': str(out_dir)})
        return LinkSimEngine.from_config(config).run_scenario(Path(out_dir))

    params = dict(manifest['config'])
    engine = LinkSimEngine.from_config(RunConfig.from_dict({'workers': workers}))
    return engine.reproduce_figures(Path(out_dir), **params)
