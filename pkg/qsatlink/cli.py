"""
CLI интерфейс для QSatLink
"""

import click
import sys
import math
from pathlib import Path
import logging

import pandas as pd

from qsatlink import __version__
from qsatlink.core.engine import LinkSimEngine, replay as replay_manifest
from qsatlink.core.config import default_config_text
from qsatlink.core.exceptions import QSatLinkError
from qsatlink.core.presets import default_registry
from qsatlink.physics.pdt_sampler import DEFAULT_SAMPLES_SINGLE, DEFAULT_SAMPLES_SWEEP
from qsatlink.utils.manifest import read_manifest, verify_artifacts

logger = logging.getLogger(__name__)


def _setup_logging(verbose: bool):
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler('qsatlink.log', encoding='utf-8'),
            logging.StreamHandler()
        ]
    )
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)


def _fail(message: str):
    click.echo(f"❌ {message}", err=True)
    sys.exit(1)


def _format_rate(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return '-'
    return f"{value:.3e}"


@click.group()
@click.version_option(version=__version__)
@click.option('--verbose', '-v', is_flag=True, help='Подробный журнал (DEBUG)')
def cli(verbose):
    """QSatLink - PDT и скорость ключа BB-84 для спутниковых оптических линий"""
    _setup_logging(verbose)


@cli.command()
@click.option('--preset', '-p', default=None, help='Оптика: micius-down, micius-up, cubesat-down, cubesat-up')
@click.option('--weather', '-w', default=None, help='Погода: night1..night3, day1..day3')
@click.option('--noise', default=None, help='Засветка: night-fullmoon, day-clear')
@click.option('--sweep', '-s', default=None, help='Сетка зенитных углов lo:hi:step в градусах')
@click.option('--samples', '-m', type=int, default=None, help='Число выборок M на точку')
@click.option('--bins', type=int, default=None, help='Число бинов PDT')
@click.option('--seed', type=int, default=None)
@click.option('--protocol', type=click.Choice(['sp', 'wcp', 'both', 'none']), default=None)
@click.option('--block', type=int, default=None, help='Размер блока n')
@click.option('--eps-sec', type=float, default=None)
@click.option('--eps-cor', type=float, default=None)
@click.option('--optimize/--no-optimize', default=None, help='Оптимизировать параметры протокола')
@click.option('--eval-point', type=click.Choice(['center', 'mean']), default=None,
              help='Точка оценки R(η) внутри бина (по умолчанию mean)')
@click.option('--fixed-extinction/--no-fixed-extinction', default=None,
              help='χ_ext фиксирован на зенитном значении')
@click.option('--focal-length', type=float, default=None,
              help='Фокусное расстояние передатчика, м (по умолчанию F = L)')
@click.option('--out', '-o', default=None, help='Каталог результатов')
@click.option('--config', '-c', type=click.Path(exists=True), help='Файл конфигурации key: value')
@click.option('--workers', '-j', type=int, default=None, help='Число потоков')
def run(preset, weather, noise, sweep, samples, bins, seed, protocol, block, eps_sec, eps_cor,
        optimize, eval_point, fixed_extinction, focal_length, out, config, workers):
    """
    Расчёт PDT и скорости ключа по сетке зенитных углов
    """
    overrides = {
        'preset': preset, 'weather': weather, 'noise': noise, 'sweep': sweep,
        'samples': samples, 'bins': bins, 'seed': seed, 'protocol': protocol,
        'block': block, 'eps_sec': eps_sec, 'eps_cor': eps_cor, 'optimize': optimize,
        'eval_point': eval_point, 'fixed_extinction': fixed_extinction,
        'out': out, 'workers': workers,
    }
    if focal_length is not None:
        overrides['scenario'] = {'focal_length': focal_length}

    try:
        engine = LinkSimEngine(Path(config) if config else None, overrides)
        cfg = engine.config
        logger.info(f"Запуск: {cfg.preset}, {cfg.weather}, сетка {cfg.sweep}, M={cfg.samples}, seed={cfg.seed}")
        artifacts = engine.run_scenario(Path(cfg.out))
    except (QSatLinkError, OSError) as e:
        logger.error(f"Запуск прерван: {e}")
        _fail(f"Ошибка: {e}")

    summary_path = Path(cfg.out) / 'summary.csv'
    click.echo(f"✅ Сводка: {summary_path}")
    click.echo(f"✅ Файлов записано: {len(artifacts) + 1} (включая manifest.json)")

    click.echo(f"\n📊 Сводка ({cfg.preset}, {cfg.weather}):")
    summary = pd.read_csv(summary_path, comment='#')
    for row in summary.itertuples(index=False):
        click.echo(
            f"  θ={row.zenith_deg:5.1f}°  L={row.L_m / 1e3:7.1f} км  потери {row.loss_db:6.2f} дБ  "
            f"R̄_SP={_format_rate(row.rate_sp)}  R̄_WCP={_format_rate(row.rate_wcp)}"
        )
    click.echo(f"\n✅ Расчёт завершен успешно!")


@cli.command()
@click.option('--out', '-o', default='./qsatlink_figures', help='Каталог результатов')
@click.option('--single-samples', type=int, default=DEFAULT_SAMPLES_SINGLE, help='M для PDT в зените')
@click.option('--sweep-samples', type=int, default=DEFAULT_SAMPLES_SWEEP, help='M на точку развёртки')
@click.option('--step', type=float, default=5.0, help='Шаг сетки углов, градусы')
@click.option('--optimize', is_flag=True, help='Оптимизировать параметры протокола')
@click.option('--seed', type=int, default=0)
@click.option('--workers', '-j', type=int, default=None)
def reproduce(out, single_samples, sweep_samples, step, optimize, seed, workers):
    """
    Данные для всех графиков: PDT, пропускание по углу, скорости ключа
    """
    try:
        engine = LinkSimEngine(overrides={'workers': workers})
        artifacts = engine.reproduce_figures(Path(out), single_samples=single_samples,
                                             sweep_samples=sweep_samples, sweep_step_deg=step,
                                             optimize=optimize, seed=seed, workers=workers)
    except (QSatLinkError, OSError) as e:
        logger.error(f"Воспроизведение прервано: {e}")
        _fail(f"Ошибка: {e}")

    click.echo(f"📁 Результаты в: {out}")
    for name, description in sorted(artifacts.items()):
        click.echo(f"  ✅ {name}: {description}")


@cli.command()
@click.argument('manifest', type=click.Path(exists=True))
@click.option('--out', '-o', required=True, help='Каталог для повторного запуска')
@click.option('--workers', '-j', type=int, default=None)
def replay(manifest, out, workers):
    """
    Повторяет запуск по manifest.json и сверяет файлы
    """
    manifest_path = Path(manifest)
    try:
        original = read_manifest(manifest_path)
        replay_manifest(manifest_path, Path(out), workers=workers)
    except (QSatLinkError, OSError) as e:
        logger.error(f"Повтор прерван: {e}")
        _fail(f"Ошибка: {e}")

    mismatched = verify_artifacts(original, Path(out))
    if mismatched:
        click.echo(f"⚠️  Отличаются от исходного запуска ({len(mismatched)}):")
        for name in mismatched:
            click.echo(f"    - {name}")
        sys.exit(1)
    click.echo(f"✅ Все {len(original['artifacts'])} файлов совпадают с исходным запуском")


@cli.command()
def presets():
    """
    Показывает встроенные наборы параметров
    """
    try:
        tables = default_registry().list_presets()
    except QSatLinkError as e:
        _fail(f"Ошибка: {e}")

    titles = {
        'optics': '🔭 Оптика',
        'weather': '🌦  Погода',
        'noise': '🌙 Засветка',
        'protocol': '🔐 Протокол',
    }
    for kind, table in tables.items():
        click.echo(f"\n{titles[kind]} ({len(table)}):")
        click.echo(table.to_string(index=False))


@cli.command()
@click.argument('config_file', type=click.Path())
@click.option('--overwrite', '-o', is_flag=True,
              help='Перезаписать существующий файл')
def create_config(config_file, overwrite):
    """
    Создает файл конфигурации с настройками по умолчанию
    """
    config_path = Path(config_file)

    if config_path.exists() and not overwrite:
        _fail(f"Файл {config_file} уже существует. Используйте --overwrite для перезаписи.")

    defaults = LinkSimEngine.default_config()
    try:
        config_path.parent.mkdir(parents=True, exist_ok=True)
        with open(config_path, 'w', encoding='utf-8') as f:
            f.write(default_config_text(defaults))
    except OSError as e:
        _fail(f"Ошибка при создании конфигурации: {e}")

    click.echo(f"✅ Файл конфигурации создан: {config_path}")
    click.echo(f"📋 Настройки по умолчанию:")
    click.echo(f"  • Оптика: {defaults['preset']}, погода: {defaults['weather']}")
    click.echo(f"  • Сетка углов: {defaults['sweep']}, M = {defaults['samples']}")
    click.echo(f"  • Протокол: {defaults['protocol']}")
    click.echo("\nФлаги командной строки имеют приоритет над файлом.")


if __name__ == "__main__":
    cli()
