"""
Пропускание эллиптического пучка через круглую апертуру

Интеграл берётся в полярных координатах апертуры тензорной сеткой
Гаусса-Лежандра; оценка ошибки по сетке половинного порядка, при
недостаточной точности порядок удваивается, последним шагом идёт
адаптивная квадратура scipy.
"""

import math
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy import integrate

from ..core.exceptions import IntegrationError, InvalidParameterError
from ..core.models import BeamSample, ApertureSpec

logger = logging.getLogger(__name__)

# За пределами ρ0 + 8·max(W) подынтегральная функция меньше e^(-128)
_RADIAL_REACH = 8.0


@dataclass(frozen=True)
class QuadratureSettings:
    """Порядок сетки, допуск и размер пакета"""

    n_rho: int = 64
    n_theta: int = 128
    tolerance: float = 1e-7
    max_n_rho: int = 512
    batch_size: int = 64
    # Пучки дальше этого расстояния от края апертуры дают η < 1e-12
    cutoff_widths: float = 10.0
    extreme_aspect: float = 20.0
    extreme_offset: float = 5.0

    def __post_init__(self):
        if self.n_rho < 2 or self.n_theta < 2:
            raise InvalidParameterError("Порядок сетки должен быть >= 2")
        if self.max_n_rho < self.n_rho:
            raise InvalidParameterError("max_n_rho должен быть >= n_rho")
        if self.tolerance <= 0:
            raise InvalidParameterError("tolerance должен быть > 0")
        if self.batch_size < 1:
            raise InvalidParameterError("batch_size должен быть >= 1")


DEFAULT_QUADRATURE = QuadratureSettings()


@lru_cache(maxsize=32)
def _legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _ellipse_coefficients(W1, W2, psi):
    inv1 = 1.0 / W1 ** 2
    inv2 = 1.0 / W2 ** 2
    cos2 = np.cos(psi) ** 2
    sin2 = np.sin(psi) ** 2
    A1 = cos2 * inv1 + sin2 * inv2
    A2 = sin2 * inv1 + cos2 * inv2
    A3 = (inv1 - inv2) * np.sin(2.0 * psi)
    return A1, A2, A3


def _grid_integral(rho0, psi, W1, W2, upper, n_rho: int, n_theta: int) -> np.ndarray:
    """
    ∫₀^upper ∫₀^{2π} exp[-2(A1x'² + A2y'² + A3x'y')] ρ dθ dρ для пакета пучков

    Система координат повёрнута так, что центр пучка лежит на оси θ = 0:
    x' = ρcosθ − ρ0, y' = ρsinθ, угол эллипса ψ = φ0 − θ0.
    """
    x, wx = _legendre(n_rho)
    t, wt = _legendre(n_theta)
    rho = 0.5 * upper[:, None] * (x + 1.0)[None, :]
    w_rho = 0.5 * upper[:, None] * wx[None, :] * rho
    theta = math.pi * (t + 1.0)
    w_theta = math.pi * wt

    A1, A2, A3 = _ellipse_coefficients(W1, W2, psi)
    xp = rho[:, :, None] * np.cos(theta)[None, None, :] - rho0[:, None, None]
    yp = rho[:, :, None] * np.sin(theta)[None, None, :]

    exponent = A1[:, None, None] * xp ** 2 + A2[:, None, None] * yp ** 2 + A3[:, None, None] * xp * yp
    values = np.exp(-2.0 * exponent)
    return np.einsum('bij,bi,j->b', values, w_rho, w_theta)


def _prefactor(W1, W2, chi):
    return 2.0 * chi / (math.pi * W1 * W2)


def _adaptive_integral(rho0: float, psi: float, W1: float, W2: float,
                       upper: float, tolerance: float) -> Tuple[float, float]:
    A1, A2, A3 = (float(v) for v in _ellipse_coefficients(W1, W2, psi))

    def integrand(theta, rho):
        xp = rho * math.cos(theta) - rho0
        yp = rho * math.sin(theta)
        return math.exp(-2.0 * (A1 * xp * xp + A2 * yp * yp + A3 * xp * yp)) * rho

    scale = math.pi * W1 * W2 / 2.0
    return integrate.dblquad(integrand, 0.0, upper, 0.0, 2.0 * math.pi,
                             epsabs=0.1 * tolerance * scale, epsrel=1e-10)


def _refine(index: int, rho0: float, psi: float, W1: float, W2: float, chi: float,
            upper: float, settings: QuadratureSettings) -> float:
    """Удвоение порядка сетки для одной выборки, затем адаптивная квадратура"""
    pref = float(_prefactor(W1, W2, chi))
    args = (np.array([rho0]), np.array([psi]), np.array([W1]), np.array([W2]), np.array([upper]))
    n_rho = settings.n_rho
    n_theta = settings.n_theta
    previous = float(_grid_integral(*args, n_rho, n_theta)[0]) * pref

    while 2 * n_rho <= settings.max_n_rho:
        n_rho *= 2
        n_theta *= 2
        current = float(_grid_integral(*args, n_rho, n_theta)[0]) * pref
        error = abs(current - previous)
        if error <= settings.tolerance:
            logger.debug(f"Выборка #{index}: сходимость на сетке {n_rho}×{n_theta}, ошибка {error:.2e}")
            return current
        previous = current

    value, abserr = _adaptive_integral(rho0, psi, W1, W2, upper, settings.tolerance)
    value *= pref
    abserr *= pref
    if not math.isfinite(value) or abserr > settings.tolerance:
        raise IntegrationError(
            f"Квадратура по апертуре не сошлась: оценка {value:.3e}, ошибка {abserr:.3e}",
            sample_index=index, estimate=value, error_estimate=abserr,
        )
    logger.debug(f"Выборка #{index}: адаптивная квадратура, ошибка {abserr:.2e}")
    return value


def transmittance_batch(x0, y0, W1, W2, phi0, aperture: ApertureSpec,
                        settings: QuadratureSettings = DEFAULT_QUADRATURE,
                        index_offset: int = 0) -> np.ndarray:
    """
    Пропускание для массива реализаций пучка

    Args:
        x0, y0, W1, W2, phi0: Массивы параметров одинаковой длины
        aperture: Апертура и экстинкция
        settings: Параметры квадратуры
        index_offset: Сдвиг номера выборки для сообщений об ошибках

    Returns:
        Массив η в [0, chi_ext]
    """
    x0, y0, W1, W2, phi0 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (x0, y0, W1, W2, phi0))
    if np.any(W1 <= 0) or np.any(W2 <= 0):
        raise InvalidParameterError("Полуоси W1, W2 должны быть > 0")

    radius = aperture.radius
    chi = aperture.chi_ext
    rho0 = np.hypot(x0, y0)
    psi = phi0 - np.arctan2(y0, x0)
    wmax = np.maximum(W1, W2)
    upper = np.minimum(radius, rho0 + _RADIAL_REACH * wmax)

    eta = np.zeros_like(rho0)
    active = np.flatnonzero(rho0 <= settings.cutoff_widths * wmax + radius)
    extreme = (wmax / np.minimum(W1, W2) > settings.extreme_aspect) | (rho0 / radius > settings.extreme_offset)

    half_rho = max(settings.n_rho // 2, 2)
    half_theta = max(settings.n_theta // 2, 2)

    for start in range(0, active.size, settings.batch_size):
        idx = active[start:start + settings.batch_size]
        regular = idx[~extreme[idx]]
        if regular.size:
            pref = _prefactor(W1[regular], W2[regular], chi)
            args = (rho0[regular], psi[regular], W1[regular], W2[regular], upper[regular])
            fine = _grid_integral(*args, settings.n_rho, settings.n_theta) * pref
            coarse = _grid_integral(*args, half_rho, half_theta) * pref
            eta[regular] = fine
            for j in np.flatnonzero(np.abs(fine - coarse) > settings.tolerance):
                i = int(regular[j])
                eta[i] = _refine(index_offset + i, rho0[i], psi[i], W1[i], W2[i], chi, upper[i], settings)
        for i in idx[extreme[idx]]:
            i = int(i)
            eta[i] = _refine(index_offset + i, rho0[i], psi[i], W1[i], W2[i], chi, upper[i], settings)

    return np.clip(eta, 0.0, chi)


def aperture_transmittance(sample: BeamSample, aperture: ApertureSpec,
                           settings: QuadratureSettings = DEFAULT_QUADRATURE) -> float:
    """Пропускание одной реализации пучка через апертуру"""
    return float(transmittance_batch(sample.x0, sample.y0, sample.W1, sample.W2, sample.phi0,
                                     aperture, settings)[0])


def analytic_centered(W: float, a: float, chi: float = 1.0) -> float:
    """χ·(1 − exp(−2a²/W²)) для круглого пучка в центре апертуры"""
    if W <= 0 or a < 0:
        raise InvalidParameterError("W должен быть > 0, a >= 0")
    return chi * -math.expm1(-2.0 * a ** 2 / W ** 2)
