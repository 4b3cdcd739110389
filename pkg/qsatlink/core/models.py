"""
Модели данных qsatlink
"""

import math
from dataclasses import dataclass, field, asdict, replace
from typing import Optional, Dict, Any, List, Tuple
from enum import Enum

import numpy as np
import pandas as pd

from .exceptions import InvalidParameterError, ZenithOutOfRangeError


MAX_ZENITH_DEG = 80.0
MAX_ZENITH = math.radians(MAX_ZENITH_DEG)
# Допуск на округление при переводе градусов в радианы
ZENITH_SLACK = 1e-12

PHI0_MAX = math.pi / 2


def _require(condition: bool, message: str):
    if not condition:
        raise InvalidParameterError(message)


def _frozen_array(values, shape: Optional[Tuple[int, ...]] = None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if shape is not None and arr.shape != shape:
        raise InvalidParameterError(f"Ожидалась форма {shape}, получено {arr.shape}")
    arr.setflags(write=False)
    return arr


def _drop_none(data: Dict[str, Any]) -> Dict[str, Any]:
    return {k: v for k, v in data.items() if v is not None}


class LinkDirection(str, Enum):
    """Направление линии связи"""
    DOWNLINK = "downlink"
    UPLINK = "uplink"


class ProtocolVariant(str, Enum):
    """Вариант протокола BB-84"""
    SINGLE_PHOTON = "sp"
    DECOY_WCP = "wcp"


class ZeroKeyReason(str, Enum):
    """Причина нулевой длины ключа"""
    ABORT_ON_QBER = "abort-on-qber"
    ENTROPY_EXHAUSTED = "entropy-exhausted"
    DECOY_BOUNDS_CROSSED = "decoy-bounds-crossed"
    PHASE_ERROR_SATURATED = "phase-error-saturated"
    NO_SIGNAL = "no-signal"
    OPTIMIZATION_STALLED = "optimization-stalled"


@dataclass(frozen=True)
class LinkScenario:
    """Геометрия и оптика линии спутник-земля"""

    direction: LinkDirection
    transmitter_waist: float          # W0, м
    receiver_radius: float            # a, м
    zenith_angle: float = 0.0         # рад
    wavelength: float = 785e-9
    sat_altitude: float = 500e3
    atmo_thickness: float = 20e3
    focal_length: Optional[float] = None   # None: пучок сфокусирован на приёмник (F = L)
    pointing_error: float = 1.2e-6
    detector_efficiency: float = 0.5
    optics_transmittance: float = 0.8
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, 'direction', LinkDirection(self.direction))

        if not (-ZENITH_SLACK <= self.zenith_angle <= MAX_ZENITH + ZENITH_SLACK):
            raise ZenithOutOfRangeError(self.zenith_angle, MAX_ZENITH)
        object.__setattr__(self, 'zenith_angle', min(max(self.zenith_angle, 0.0), MAX_ZENITH))

        for name in ('transmitter_waist', 'receiver_radius', 'wavelength',
                     'sat_altitude', 'atmo_thickness'):
            _require(getattr(self, name) > 0, f"{name} должен быть > 0")
        if self.focal_length is not None:
            _require(self.focal_length > 0, "focal_length должен быть > 0")
        _require(self.atmo_thickness < self.sat_altitude,
                 "Толщина атмосферы должна быть меньше высоты спутника")
        _require(self.pointing_error >= 0, "pointing_error должен быть >= 0")
        for name in ('detector_efficiency', 'optics_transmittance'):
            value = getattr(self, name)
            _require(0.0 <= value <= 1.0, f"{name} должен лежать в [0, 1]")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def zenith_deg(self) -> float:
        return math.degrees(self.zenith_angle)

    @property
    def is_focused(self) -> bool:
        return self.focal_length is None

    @property
    def receiver_efficiency(self) -> float:
        """η_det·T_opt"""
        return self.detector_efficiency * self.optics_transmittance

    def at_zenith(self, zenith: float) -> 'LinkScenario':
        """Копия сценария для другого зенитного угла (рад)"""
        return replace(self, zenith_angle=zenith)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['direction'] = self.direction.value
        return _drop_none(data)


@dataclass(frozen=True)
class WeatherCondition:
    """Погодные условия: турбулентность, рассеиватели, экстинкция"""

    cn2: float
    n0: float
    beta: float = 0.7
    daytime: bool = False
    label: str = ""

    def __post_init__(self):
        _require(self.cn2 >= 0, "cn2 должен быть >= 0")
        _require(self.n0 >= 0, "n0 должен быть >= 0")
        _require(self.beta >= 0, "beta должен быть >= 0")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class SlantGeometry:
    """Длины трассы: полная L и внутриатмосферная h"""

    L: float
    h: float
    chi_ext: float = 1.0

    def __post_init__(self):
        _require(self.L > 0 and self.h > 0, "Длины трассы должны быть > 0")
        _require(self.h <= self.L * (1 + 1e-12), "h не может превышать L")
        _require(0.0 < self.chi_ext <= 1.0, "chi_ext должен лежать в (0, 1]")

    @property
    def h_over_L(self) -> float:
        return self.h / self.L


@dataclass(frozen=True)
class BeamMoments:
    """Первые и вторые моменты параметров эллиптического пучка"""

    var_x0: float              # ⟨x0²⟩ = ⟨y0²⟩, м²
    mean_W2: float             # ⟨W_i²⟩, м²
    cov_W2: np.ndarray         # ⟨ΔW_i² ΔW_j²⟩, м⁴
    rytov: float
    fresnel: float

    def __post_init__(self):
        cov = _frozen_array(self.cov_W2, (2, 2))
        object.__setattr__(self, 'cov_W2', cov)
        _require(self.var_x0 >= 0, "var_x0 должен быть >= 0")
        _require(self.mean_W2 > 0, "mean_W2 должен быть > 0")
        _require(np.allclose(cov, cov.T, rtol=1e-12, atol=0.0), "cov_W2 должна быть симметричной")
        _require(bool(np.all(np.diag(cov) >= 0)), "Диагональ cov_W2 должна быть >= 0")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'var_x0': self.var_x0,
            'mean_W2': self.mean_W2,
            'cov_W2': self.cov_W2.tolist(),
            'rytov': self.rytov,
            'fresnel': self.fresnel,
        }


@dataclass(frozen=True)
class EllipticBeamDistribution:
    """Совместный закон (x0, y0, Θ1, Θ2) и равномерный φ0 на [0, π/2]"""

    mean: np.ndarray
    cov: np.ndarray
    W0: float
    factor: np.ndarray         # нижний множитель: cov = factor @ factor.T

    def __post_init__(self):
        object.__setattr__(self, 'mean', _frozen_array(self.mean, (4,)))
        object.__setattr__(self, 'cov', _frozen_array(self.cov, (4, 4)))
        object.__setattr__(self, 'factor', _frozen_array(self.factor, (4, 4)))
        _require(self.W0 > 0, "W0 должен быть > 0")

    @property
    def is_deterministic(self) -> bool:
        return not np.any(self.factor)

    @property
    def phi0_range(self) -> Tuple[float, float]:
        return (0.0, PHI0_MAX)


@dataclass(frozen=True)
class BeamSample:
    """Одна реализация пучка (x0, y0, W1, W2, φ0)"""

    x0: float
    y0: float
    W1: float
    W2: float
    phi0: float

    def __post_init__(self):
        _require(self.W1 > 0 and self.W2 > 0, "Полуоси W1, W2 должны быть > 0")

    @property
    def rho0(self) -> float:
        return math.hypot(self.x0, self.y0)


@dataclass(frozen=True)
class ApertureSpec:
    """Круглая приёмная апертура и множитель экстинкции"""

    radius: float
    chi_ext: float = 1.0

    def __post_init__(self):
        _require(self.radius > 0, "Радиус апертуры должен быть > 0")
        _require(0.0 <= self.chi_ext <= 1.0, "chi_ext должен лежать в [0, 1]")


@dataclass(frozen=True)
class TransmittanceDistribution:
    """Гистограмма PDT на [0, 1] и сводная статистика"""

    n_bins: int
    bin_prob: np.ndarray
    sample_count: int
    mean_eta: float
    median_eta: float
    std_eta: float
    mean_loss_db: float
    bin_mean_eta: np.ndarray   # среднее η выборок в бине, NaN для пустых
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'bin_prob', _frozen_array(self.bin_prob, (self.n_bins,)))
        object.__setattr__(self, 'bin_mean_eta', _frozen_array(self.bin_mean_eta, (self.n_bins,)))
        _require(self.n_bins >= 2, "n_bins должен быть >= 2")
        _require(self.sample_count >= 1, "sample_count должен быть >= 1")
        _require(abs(float(self.bin_prob.sum()) - 1.0) <= 1e-12, "Сумма вероятностей бинов должна быть 1")

    @classmethod
    def from_samples(cls, etas: np.ndarray, n_bins: int = 200,
                     seed: Optional[int] = None) -> 'TransmittanceDistribution':
        """Строит PDT по массиву пропусканий"""
        etas = np.asarray(etas, dtype=float)
        _require(etas.size >= 1, "Нужна хотя бы одна выборка")
        _require(n_bins >= 2, "n_bins должен быть >= 2")

        idx = np.clip((etas * n_bins).astype(np.int64), 0, n_bins - 1)
        counts = np.bincount(idx, minlength=n_bins)
        sums = np.bincount(idx, weights=etas, minlength=n_bins)
        with np.errstate(invalid='ignore', divide='ignore'):
            bin_mean = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)

        mean_eta = float(np.mean(etas))
        return cls(
            n_bins=n_bins,
            bin_prob=counts / etas.size,
            sample_count=int(etas.size),
            mean_eta=mean_eta,
            median_eta=float(np.median(etas)),
            std_eta=float(np.std(etas)),
            mean_loss_db=loss_db(mean_eta),
            bin_mean_eta=bin_mean,
            seed=seed,
        )

    @property
    def bin_edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_bins + 1)

    @property
    def bin_centers(self) -> np.ndarray:
        edges = self.bin_edges
        return 0.5 * (edges[:-1] + edges[1:])

    @property
    def occupied(self) -> np.ndarray:
        return self.bin_prob > 0

    def density(self) -> np.ndarray:
        """Плотность вероятности: P(η_i) / ширина бина"""
        return self.bin_prob * self.n_bins

    def evaluation_points(self, mode: str = "mean") -> np.ndarray:
        if mode == "center":
            return self.bin_centers
        if mode == "mean":
            return np.where(np.isnan(self.bin_mean_eta), self.bin_centers, self.bin_mean_eta)
        raise InvalidParameterError(f"Неизвестный режим точки оценки: {mode}")

    def mixture(self, other: 'TransmittanceDistribution', weight: float) -> 'TransmittanceDistribution':
        """Смесь w·P1 + (1-w)·P2 на общей сетке бинов"""
        _require(self.n_bins == other.n_bins, "Сетки бинов должны совпадать")
        _require(0.0 <= weight <= 1.0, "Вес смеси должен лежать в [0, 1]")
        w1, w2 = weight, 1.0 - weight
        prob = w1 * self.bin_prob + w2 * other.bin_prob

        mass1 = w1 * self.bin_prob * np.nan_to_num(self.bin_mean_eta)
        mass2 = w2 * other.bin_prob * np.nan_to_num(other.bin_mean_eta)
        with np.errstate(invalid='ignore', divide='ignore'):
            bin_mean = np.where(prob > 0, (mass1 + mass2) / np.where(prob > 0, prob, 1.0), np.nan)

        mean = w1 * self.mean_eta + w2 * other.mean_eta
        second = (w1 * (self.std_eta ** 2 + self.mean_eta ** 2)
                  + w2 * (other.std_eta ** 2 + other.mean_eta ** 2))
        cdf = np.cumsum(prob)
        median_bin = int(np.searchsorted(cdf, 0.5))
        median = float(self.bin_centers[min(median_bin, self.n_bins - 1)])

        return TransmittanceDistribution(
            n_bins=self.n_bins,
            bin_prob=prob / prob.sum(),
            sample_count=self.sample_count + other.sample_count,
            mean_eta=mean,
            median_eta=median,
            std_eta=math.sqrt(max(second - mean ** 2, 0.0)),
            mean_loss_db=loss_db(mean),
            bin_mean_eta=bin_mean,
        )

    def summary(self) -> Dict[str, Any]:
        return _drop_none({
            'M': self.sample_count,
            'n_bins': self.n_bins,
            'mean_eta': self.mean_eta,
            'median_eta': self.median_eta,
            'std_eta': self.std_eta,
            'mean_loss_db': self.mean_loss_db,
            'seed': self.seed,
        })

    def to_dataframe(self) -> pd.DataFrame:
        edges = self.bin_edges
        return pd.DataFrame({
            'bin_lower': edges[:-1],
            'bin_upper': edges[1:],
            'probability': self.bin_prob,
            'mean_eta': self.bin_mean_eta,
        })


def loss_db(eta: float) -> float:
    """-10·log10(η); для η = 0 возвращает inf"""
    if eta <= 0:
        return math.inf
    return -10.0 * math.log10(eta)


@dataclass(frozen=True)
class NoiseEnvironment:
    """Параметры паразитной засветки и собственной ошибки"""

    H_b: float = 0.0               # яркость неба, Вт м⁻² ср⁻¹ нм⁻¹
    H_sun: float = 4.61e18         # фотон с⁻¹ нм⁻¹ м⁻²
    A_E: float = 0.3
    A_M: float = 0.136
    R_M: float = 1.737e6
    d_EM: float = 3.6e8
    omega_fov: float = 1e-10       # ср
    B_f: float = 1.0               # нм
    delta_t: float = 1e-9          # с
    Q0: float = 0.02
    daytime: bool = False
    label: str = ""

    def __post_init__(self):
        for name in ('H_b', 'H_sun', 'A_E', 'A_M', 'R_M', 'd_EM', 'omega_fov', 'B_f', 'delta_t'):
            _require(getattr(self, name) >= 0, f"{name} должен быть >= 0")
        _require(0.0 <= self.Q0 <= 0.5, "Q0 должен лежать в [0, 0.5]")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ProtocolParams:
    """Параметры BB-84 с конечным ключом"""

    variant: ProtocolVariant
    block_n: int
    pe_bits: Optional[int] = None          # k; по умолчанию равен block_n
    q_tol: float = 0.05
    eps_sec: float = 1e-9
    eps_cor: float = 1e-9
    q: float = 1.0
    f_ec: float = 1.16
    intensities: Tuple[float, float, float] = (0.5, 0.1, 2e-4)
    intensity_probs: Tuple[float, float, float] = (0.7, 0.2, 0.1)
    basis_prob: float = 0.9
    rep_rate: float = 1e7

    def __post_init__(self):
        object.__setattr__(self, 'variant', ProtocolVariant(self.variant))
        object.__setattr__(self, 'block_n', int(self.block_n))
        if self.pe_bits is None:
            object.__setattr__(self, 'pe_bits', self.block_n)
        object.__setattr__(self, 'pe_bits', int(self.pe_bits))
        object.__setattr__(self, 'intensities', tuple(float(m) for m in self.intensities))
        object.__setattr__(self, 'intensity_probs', tuple(float(p) for p in self.intensity_probs))

        _require(self.block_n >= 1, "block_n должен быть >= 1")
        _require(self.pe_bits >= 1, "pe_bits должен быть >= 1")
        _require(0.0 <= self.q_tol <= 0.5, "q_tol должен лежать в [0, 0.5]")
        for name in ('eps_sec', 'eps_cor'):
            value = getattr(self, name)
            _require(0.0 < value < 1.0, f"{name} должен лежать в (0, 1)")
        _require(0.0 < self.q <= 1.0, "q должен лежать в (0, 1]")
        _require(self.f_ec >= 1.0, "f_ec должен быть >= 1")
        _require(self.rep_rate > 0, "rep_rate должен быть > 0")

        mu = self.intensities
        _require(len(mu) == 3 and len(self.intensity_probs) == 3,
                 "Нужны три интенсивности и три вероятности")
        _require(mu[0] > mu[1] > mu[2] >= 0.0,
                 "Интенсивности должны удовлетворять μ_signal > μ_decoy > μ_vacuum >= 0")
        _require(all(0.0 <= p <= 1.0 for p in self.intensity_probs),
                 "Вероятности интенсивностей должны лежать в [0, 1]")
        _require(abs(sum(self.intensity_probs) - 1.0) <= 1e-9,
                 "Вероятности интенсивностей должны давать в сумме 1")
        _require(0.0 < self.basis_prob < 1.0, "basis_prob должен лежать в (0, 1)")

    def replace(self, **changes) -> 'ProtocolParams':
        return replace(self, **changes)

    def free_parameters(self) -> Dict[str, Any]:
        """Параметры, по которым ведётся оптимизация"""
        if self.variant == ProtocolVariant.SINGLE_PHOTON:
            return {'pe_bits': self.pe_bits, 'q_tol': self.q_tol}
        return {
            'mu_signal': self.intensities[0],
            'mu_decoy': self.intensities[1],
            'p_signal': self.intensity_probs[0],
            'p_decoy': self.intensity_probs[1],
            'basis_prob': self.basis_prob,
        }

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['variant'] = self.variant.value
        data['intensities'] = list(self.intensities)
        data['intensity_probs'] = list(self.intensity_probs)
        return data


@dataclass(frozen=True)
class ObservedCounts:
    """Отсчёты по интенсивностям в базисах X (ключ) и Z (оценка фазы)"""

    n_x: np.ndarray
    m_x: np.ndarray
    n_z: np.ndarray
    m_z: np.ndarray
    pulses: float
    single_photon_x: Optional[float] = None   # истинное число однофотонных отсчётов (стохастический режим)
    single_photon_z: Optional[float] = None

    def __post_init__(self):
        for name in ('n_x', 'm_x', 'n_z', 'm_z'):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))
        _require(bool(np.all(self.m_x <= self.n_x + 1e-9)) and bool(np.all(self.m_z <= self.n_z + 1e-9)),
                 "Число ошибок не может превышать число отсчётов")

    @property
    def total_x(self) -> float:
        return float(self.n_x.sum())

    @property
    def errors_x(self) -> float:
        return float(self.m_x.sum())

    @property
    def qber_x(self) -> float:
        total = self.total_x
        return self.errors_x / total if total > 0 else 0.0


@dataclass(frozen=True)
class DecoyBounds:
    """Оценки вакуумного и однофотонного вклада"""

    s_x0: float
    s_x1: float
    s_z0: float
    s_z1: float
    v_z1: float
    phi_x: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class KeyLength:
    """Длина ключа в битах и причина нуля"""

    bits: int
    reason: Optional[ZeroKeyReason] = None
    details: Dict[str, float] = field(default_factory=dict)

    def __int__(self) -> int:
        return self.bits

    @property
    def is_zero(self) -> bool:
        return self.bits <= 0


@dataclass
class KeyRateResult:
    """Скорость ключа, усреднённая по PDT"""

    variant: ProtocolVariant
    key_length: int
    rate_per_pulse: float
    rate_avg: float
    optimal_params: Dict[str, Any] = field(default_factory=dict)
    reason: Optional[ZeroKeyReason] = None
    rep_rate: float = 1e7
    bin_rates: Optional[np.ndarray] = None
    bin_reasons: Optional[List[Optional[ZeroKeyReason]]] = None

    def __post_init__(self):
        self.key_length = max(0, int(self.key_length))
        self.rate_avg = max(0.0, float(self.rate_avg))
        self.rate_per_pulse = max(0.0, float(self.rate_per_pulse))

    @property
    def rate_bps(self) -> float:
        return self.rate_avg * self.rep_rate

    def to_dict(self) -> Dict[str, Any]:
        return _drop_none({
            'variant': self.variant.value,
            'key_length': self.key_length,
            'rate_per_pulse': self.rate_per_pulse,
            'rate_avg': self.rate_avg,
            'rate_bps': self.rate_bps,
            'optimal_params': dict(self.optimal_params),
            'reason': self.reason.value if self.reason else None,
        })
