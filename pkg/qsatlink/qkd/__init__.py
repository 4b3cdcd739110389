from .noise import stray_photons, qber
from .detection import detection_rates, expected_observations, simulate_observations
from .rates import (
    binary_entropy, sp_key_length, decoy_bounds, wcp_key_length,
    key_rate_curve, pdt_averaged_rate,
)
from .optimize import optimize_rate

__all__ = [
    'stray_photons',
    'qber',
    'detection_rates',
    'expected_observations',
    'simulate_observations',
    'binary_entropy',
    'sp_key_length',
    'decoy_bounds',
    'wcp_key_length',
    'key_rate_curve',
    'pdt_averaged_rate',
    'optimize_rate',
]
