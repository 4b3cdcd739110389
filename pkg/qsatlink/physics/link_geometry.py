"""
Геометрия трассы спутник-земля и параметры атмосферы

Перевод зенитного угла и высоты орбиты в длины L, h и экстинкцию χ_ext,
а также вспомогательные пересчёты для построения новых погодных пресетов.
"""

import math
import logging

from ..core.exceptions import InvalidParameterError, ZenithOutOfRangeError
from ..core.models import (
    LinkScenario, WeatherCondition, SlantGeometry, MAX_ZENITH, ZENITH_SLACK,
)

logger = logging.getLogger(__name__)

EARTH_RADIUS = 6371e3

# Профиль Хафнагеля-Вэлли: C_n²(z) = c1·(v/27)²·z¹⁰·e^(-z/s1) + c2·e^(-z/s2) + A·e^(-z/s3)
HV_HIGH_COEFF = 5.94e-53
HV_HIGH_SCALE = 1000.0
HV_MID_COEFF = 2.7e-16
HV_MID_SCALE = 1500.0
HV_GROUND_SCALE = 100.0

# Высота смены масштаба влажности и верхняя граница профиля, км
HUMIDITY_BREAK_KM = 5.0
HUMIDITY_TOP_KM = 10.0


def _check_zenith(zenith: float) -> float:
    if not (-ZENITH_SLACK <= zenith <= MAX_ZENITH + ZENITH_SLACK):
        raise ZenithOutOfRangeError(zenith, MAX_ZENITH)
    return min(max(zenith, 0.0), MAX_ZENITH)


def _chord(cos_z: float, altitude: float, earth_radius: float) -> float:
    # √(R²cos²θ + 2RH + H²) − R·cosθ без вычитания близких чисел
    root = math.sqrt((earth_radius * cos_z) ** 2 + 2.0 * earth_radius * altitude + altitude ** 2)
    return altitude * (2.0 * earth_radius + altitude) / (root + earth_radius * cos_z)


def slant_path(zenith: float, sat_altitude: float = 500e3, atmo_thickness: float = 20e3,
               earth_radius: float = EARTH_RADIUS) -> SlantGeometry:
    """
    Длины наклонной трассы для сферической Земли

    Args:
        zenith: Зенитный угол наземной станции, рад, в [0, 80°]
        sat_altitude: Высота спутника H, м
        atmo_thickness: Толщина однородного слоя атмосферы h̄, м
        earth_radius: Радиус Земли, м

    Returns:
        SlantGeometry с L, h и chi_ext = 1
    """
    zenith = _check_zenith(zenith)
    if sat_altitude <= 0 or atmo_thickness <= 0 or earth_radius <= 0:
        raise InvalidParameterError("Высоты и радиус Земли должны быть > 0")
    if atmo_thickness >= sat_altitude:
        raise InvalidParameterError("Толщина атмосферы должна быть меньше высоты спутника")

    cos_z = math.cos(zenith)
    L = _chord(cos_z, sat_altitude, earth_radius)
    h = _chord(cos_z, atmo_thickness, earth_radius)
    return SlantGeometry(L=L, h=h)


def extinction(zenith: float, beta: float) -> float:
    """χ_ext(θ) = exp(-β·sec θ)"""
    zenith = _check_zenith(zenith)
    if beta < 0:
        raise InvalidParameterError("beta должен быть >= 0")
    return math.exp(-beta / math.cos(zenith))


def link_geometry(scenario: LinkScenario, weather: WeatherCondition,
                  fixed_extinction: bool = False,
                  earth_radius: float = EARTH_RADIUS) -> SlantGeometry:
    """
    Полная геометрия сценария: L, h и χ_ext

    При fixed_extinction экстинкция берётся в зените, чтобы в развёртках
    по углу менялись только эффекты пучка.
    """
    path = slant_path(scenario.zenith_angle, scenario.sat_altitude,
                      scenario.atmo_thickness, earth_radius)
    chi_zenith = 0.0 if fixed_extinction else scenario.zenith_angle
    chi = extinction(chi_zenith, weather.beta)
    logger.debug(
        f"Геометрия θ={scenario.zenith_deg:.2f}°: L={path.L / 1e3:.3f} км, "
        f"h={path.h / 1e3:.3f} км, χ_ext={chi:.5f}"
    )
    return SlantGeometry(L=path.L, h=path.h, chi_ext=chi)


def cn2_from_hufnagel_valley(A: float, v: float, atmo_thickness: float = 20e3) -> float:
    """
    Эффективный C_n² однородного слоя: (1/h̄)·∫₀^∞ C_n²(z) dz

    Используется замкнутая форма: ∫z¹⁰e^(-z/s)dz = 10!·s¹¹, ∫e^(-z/s)dz = s.
    Средний член профиля от A и v не зависит.
    """
    if A < 0 or v < 0:
        raise InvalidParameterError("A и v должны быть >= 0")
    if atmo_thickness <= 0:
        raise InvalidParameterError("atmo_thickness должен быть > 0")

    high = HV_HIGH_COEFF * (v / 27.0) ** 2 * math.factorial(10) * HV_HIGH_SCALE ** 11
    mid = HV_MID_COEFF * HV_MID_SCALE
    ground = A * HV_GROUND_SCALE
    return (high + mid + ground) / atmo_thickness


def humidity_scale_factor(H1: float, H2: float, atmo_thickness: float = 20e3) -> float:
    """
    ω = (1/(h̄·τ(0)))·∫₀^{10 км} τ(z) dz для двухэкспоненциального профиля влажности

    Args:
        H1: Масштаб ниже 5 км, км
        H2: Масштаб выше 5 км, км
        atmo_thickness: h̄, м
    """
    if H1 <= 0 or H2 <= 0:
        raise InvalidParameterError("H1 и H2 должны быть > 0")
    if atmo_thickness <= 0:
        raise InvalidParameterError("atmo_thickness должен быть > 0")

    lower = H1 * -math.expm1(-HUMIDITY_BREAK_KM / H1)
    tau_break = math.exp(-HUMIDITY_BREAK_KM / H1)
    upper = tau_break * H2 * -math.expm1(-(HUMIDITY_TOP_KM - HUMIDITY_BREAK_KM) / H2)
    return (lower + upper) / (atmo_thickness / 1e3)


def n0_rescale(n0_ground: float, H1: float = 2.243, H2: float = 1.414,
               atmo_thickness: float = 20e3) -> float:
    """Плотность рассеивателей однородного слоя: ω·n0_ground"""
    if n0_ground < 0:
        raise InvalidParameterError("n0_ground должен быть >= 0")
    return humidity_scale_factor(H1, H2, atmo_thickness) * n0_ground


def ground_density_for(n0_layer: float, H1: float = 2.243, H2: float = 1.414,
                       atmo_thickness: float = 20e3) -> float:
    """Обратный пересчёт: приземная плотность, дающая заданный n0 слоя"""
    if n0_layer < 0:
        raise InvalidParameterError("n0_layer должен быть >= 0")
    return n0_layer / humidity_scale_factor(H1, H2, atmo_thickness)
