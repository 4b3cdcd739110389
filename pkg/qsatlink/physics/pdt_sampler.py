"""
Монте-Карло оценка распределения пропускания (PDT)

Выборки делятся на куски фиксированного размера; каждому куску
соответствует свой поток Philox, выведенный из зерна и номера куска,
поэтому результат не зависит от числа потоков.
"""

import math
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..core.exceptions import InvalidParameterError
from ..core.models import (
    EllipticBeamDistribution, ApertureSpec, TransmittanceDistribution,
    LinkScenario, WeatherCondition, PHI0_MAX,
)
from .link_geometry import link_geometry
from .beam_stats import distribution_for
from .transmittance import transmittance_batch, QuadratureSettings, DEFAULT_QUADRATURE

logger = logging.getLogger(__name__)

CHUNK_SIZE = 4096
DEFAULT_BINS = 200
DEFAULT_SAMPLES_SINGLE = 10000
DEFAULT_SAMPLES_SWEEP = 1000


def default_workers() -> int:
    return os.cpu_count() or 1


def chunk_generator(seed: int, chunk_index: int, stream: Tuple[int, ...] = ()) -> np.random.Generator:
    """Независимый поток Philox для куска выборок"""
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(*stream, chunk_index))
    return np.random.Generator(np.random.Philox(sequence))


def draw_beam_parameters(dist: EllipticBeamDistribution, rng: np.random.Generator,
                         size: int) -> Dict[str, np.ndarray]:
    """
    Реализации (x0, y0, W1, W2, φ0)

    W_i = W0·exp(Θ_i/2), φ0 равномерно на [0, π/2].
    """
    normal = rng.standard_normal((size, 4))
    gauss = dist.mean + normal @ dist.factor.T
    phi0 = rng.uniform(0.0, PHI0_MAX, size)
    return {
        'x0': gauss[:, 0],
        'y0': gauss[:, 1],
        'W1': dist.W0 * np.exp(0.5 * gauss[:, 2]),
        'W2': dist.W0 * np.exp(0.5 * gauss[:, 3]),
        'phi0': phi0,
    }


def _chunk_bounds(M: int) -> Iterable[Tuple[int, int, int]]:
    for chunk_index, start in enumerate(range(0, M, CHUNK_SIZE)):
        yield chunk_index, start, min(CHUNK_SIZE, M - start)


def _evaluate_chunk(dist: EllipticBeamDistribution, aperture: ApertureSpec, seed: int,
                    stream: Tuple[int, ...], chunk: Tuple[int, int, int],
                    settings: QuadratureSettings) -> np.ndarray:
    chunk_index, start, size = chunk
    rng = chunk_generator(seed, chunk_index, stream)
    params = draw_beam_parameters(dist, rng, size)
    return transmittance_batch(params['x0'], params['y0'], params['W1'], params['W2'], params['phi0'],
                               aperture, settings, index_offset=start)


def sample_transmittances(dist: EllipticBeamDistribution, aperture: ApertureSpec, M: int,
                          seed: int = 0, workers: Optional[int] = 1,
                          stream: Tuple[int, ...] = (),
                          settings: QuadratureSettings = DEFAULT_QUADRATURE) -> np.ndarray:
    """Массив η для M реализаций пучка в порядке номеров выборок"""
    if M < 1:
        raise InvalidParameterError("M должен быть >= 1")
    chunks = list(_chunk_bounds(M))
    workers = min(workers or default_workers(), len(chunks))

    if workers <= 1:
        parts = [_evaluate_chunk(dist, aperture, seed, stream, c, settings) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            parts = list(executor.map(
                lambda c: _evaluate_chunk(dist, aperture, seed, stream, c, settings), chunks
            ))
    return np.concatenate(parts)


def sample_pdt(dist: EllipticBeamDistribution, aperture: ApertureSpec,
               M: int = DEFAULT_SAMPLES_SINGLE, n_bins: int = DEFAULT_BINS, seed: int = 0,
               workers: Optional[int] = 1, stream: Tuple[int, ...] = (),
               settings: QuadratureSettings = DEFAULT_QUADRATURE) -> TransmittanceDistribution:
    """
    Гистограмма PDT по M реализациям пучка

    Args:
        dist: Закон параметров пучка
        aperture: Апертура приёмника и экстинкция
        M: Число выборок
        n_bins: Число равных бинов на [0, 1]
        seed: Зерно генератора
        workers: Число потоков (None: по числу ядер)
        stream: Префикс ключа потока, различает точки развёртки

    Returns:
        TransmittanceDistribution
    """
    if n_bins < 2:
        raise InvalidParameterError("n_bins должен быть >= 2")
    etas = sample_transmittances(dist, aperture, M, seed, workers, stream, settings)
    pdt = TransmittanceDistribution.from_samples(etas, n_bins=n_bins, seed=seed)
    logger.debug(
        f"PDT: M={M}, ⟨η⟩={pdt.mean_eta:.5e}, медиана={pdt.median_eta:.5e}, "
        f"σ={pdt.std_eta:.5e}, потери {pdt.mean_loss_db:.3f} дБ"
    )
    return pdt


def scenario_pdt(scenario: LinkScenario, weather: WeatherCondition,
                 M: int = DEFAULT_SAMPLES_SINGLE, n_bins: int = DEFAULT_BINS, seed: int = 0,
                 workers: Optional[int] = 1, stream: Tuple[int, ...] = (),
                 fixed_extinction: bool = False,
                 settings: QuadratureSettings = DEFAULT_QUADRATURE) -> TransmittanceDistribution:
    """PDT для сценария: геометрия → моменты → закон → выборка"""
    geometry = link_geometry(scenario, weather, fixed_extinction=fixed_extinction)
    dist = distribution_for(scenario, weather, geometry)
    aperture = ApertureSpec(radius=scenario.receiver_radius, chi_ext=geometry.chi_ext)
    return sample_pdt(dist, aperture, M, n_bins, seed, workers, stream, settings)


def sweep_mean_transmittance(scenario: LinkScenario, weather: WeatherCondition,
                             zenith_grid_deg: Sequence[float], M: int = DEFAULT_SAMPLES_SWEEP,
                             n_bins: int = DEFAULT_BINS, seed: int = 0,
                             workers: Optional[int] = None, fixed_extinction: bool = False,
                             settings: QuadratureSettings = DEFAULT_QUADRATURE) -> pd.DataFrame:
    """
    Среднее пропускание по сетке зенитных углов

    Returns:
        DataFrame со столбцами zenith_deg, L_m, h_m, chi_ext, mean_eta,
        median_eta, std_eta, loss_db; одна строка на точку сетки
    """
    grid = [float(z) for z in zenith_grid_deg]
    workers = workers or default_workers()
    point_workers = workers if len(grid) < workers else 1

    def run_point(item):
        i, zenith_deg = item
        point = scenario.at_zenith(math.radians(zenith_deg))
        geometry = link_geometry(point, weather, fixed_extinction=fixed_extinction)
        dist = distribution_for(point, weather, geometry)
        aperture = ApertureSpec(radius=point.receiver_radius, chi_ext=geometry.chi_ext)
        pdt = sample_pdt(dist, aperture, M, n_bins, seed, point_workers, (i,), settings)
        return {
            'zenith_deg': zenith_deg,
            'L_m': geometry.L,
            'h_m': geometry.h,
            'chi_ext': geometry.chi_ext,
            'mean_eta': pdt.mean_eta,
            'median_eta': pdt.median_eta,
            'std_eta': pdt.std_eta,
            'loss_db': pdt.mean_loss_db,
        }

    items = list(enumerate(grid))
    if point_workers == 1 and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(run_point, items))
    else:
        rows = [run_point(item) for item in items]

    logger.info(f"Развёртка пропускания: {len(rows)} точек, M={M}")
    return pd.DataFrame(rows)
