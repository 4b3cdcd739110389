from .link_geometry import (
    slant_path, extinction, link_geometry, cn2_from_hufnagel_valley,
    humidity_scale_factor, n0_rescale, ground_density_for,
)
from .beam_stats import (
    moments_uplink, moments_downlink, beam_moments, lognormal_match,
    build_distribution, distribution_for,
)
from .transmittance import (
    QuadratureSettings, DEFAULT_QUADRATURE, transmittance_batch,
    aperture_transmittance, analytic_centered,
)
from .pdt_sampler import sample_transmittances, sample_pdt, scenario_pdt, sweep_mean_transmittance

__all__ = [
    'slant_path',
    'extinction',
    'link_geometry',
    'cn2_from_hufnagel_valley',
    'humidity_scale_factor',
    'n0_rescale',
    'ground_density_for',
    'moments_uplink',
    'moments_downlink',
    'beam_moments',
    'lognormal_match',
    'build_distribution',
    'distribution_for',
    'QuadratureSettings',
    'DEFAULT_QUADRATURE',
    'transmittance_batch',
    'aperture_transmittance',
    'analytic_centered',
    'sample_transmittances',
    'sample_pdt',
    'scenario_pdt',
    'sweep_mean_transmittance',
]
