from .exceptions import (
    QSatLinkError, InvalidParameterError, ZenithOutOfRangeError, MomentMatchingError,
    NoSignalError, IntegrationError, ConfigurationError,
)
from .models import (
    LinkDirection, ProtocolVariant, ZeroKeyReason, LinkScenario, WeatherCondition,
    SlantGeometry, BeamMoments, EllipticBeamDistribution, BeamSample, ApertureSpec,
    TransmittanceDistribution, NoiseEnvironment, ProtocolParams, ObservedCounts,
    DecoyBounds, KeyLength, KeyRateResult,
)
from .presets import PresetRegistry
from .config import RunConfig
from .validator import ScenarioValidator
from .engine import LinkSimEngine

__all__ = [
    'QSatLinkError',
    'InvalidParameterError',
    'ZenithOutOfRangeError',
    'MomentMatchingError',
    'NoSignalError',
    'IntegrationError',
    'ConfigurationError',
    'LinkDirection',
    'ProtocolVariant',
    'ZeroKeyReason',
    'LinkScenario',
    'WeatherCondition',
    'SlantGeometry',
    'BeamMoments',
    'EllipticBeamDistribution',
    'BeamSample',
    'ApertureSpec',
    'TransmittanceDistribution',
    'NoiseEnvironment',
    'ProtocolParams',
    'ObservedCounts',
    'DecoyBounds',
    'KeyLength',
    'KeyRateResult',
    'PresetRegistry',
    'RunConfig',
    'ScenarioValidator',
    'LinkSimEngine',
]
