import numpy as np
import pytest

from qsatlink.core.models import TransmittanceDistribution, ZeroKeyReason
from qsatlink.qkd.optimize import optimize_rate
from qsatlink.qkd.rates import pdt_averaged_rate


@pytest.fixture
def night_down(registry, micius_down):
    return registry.noise("night-fullmoon", micius_down.direction)


def test_sp_optimum_not_worse_than_defaults(spread_pdt, micius_down, night_down, sp_params):
    default = pdt_averaged_rate(spread_pdt, sp_params, night_down, micius_down)
    best = optimize_rate(spread_pdt, sp_params, night_down, micius_down)
    assert best.rate_avg >= default.rate_avg
    assert best.rate_avg > 0
    assert best.reason is None
    assert set(best.optimal_params) == {'pe_bits', 'q_tol'}
    assert 1 <= best.optimal_params['pe_bits'] <= sp_params.block_n


def test_sp_optimum_tightens_qber_tolerance(spread_pdt, micius_down, night_down, sp_params):
    # Q_tol = 0.05 заметно выше наблюдаемого QBER, поэтому оптимум его уменьшает
    best = optimize_rate(spread_pdt, sp_params, night_down, micius_down)
    assert best.optimal_params['q_tol'] < sp_params.q_tol


def test_wcp_optimum_not_worse_than_defaults(spread_pdt, micius_down, night_down, wcp_params):
    default = pdt_averaged_rate(spread_pdt, wcp_params, night_down, micius_down)
    best = optimize_rate(spread_pdt, wcp_params, night_down, micius_down)
    assert best.rate_avg >= default.rate_avg
    params = best.optimal_params
    assert params['mu_signal'] > params['mu_decoy'] > 0
    assert 0 < params['p_signal'] + params['p_decoy'] < 1
    assert 0.5 <= params['basis_prob'] < 1


def test_hopeless_link_reports_stalled(registry, micius_up, sp_params, wcp_params):
    pdt = TransmittanceDistribution.from_samples(np.full(50, 3e-4), n_bins=200)
    day = registry.noise("day-clear", micius_up.direction)
    for params in (sp_params, wcp_params.replace(block_n=10 ** 7)):
        result = optimize_rate(pdt, params, day, micius_up)
        assert result.rate_avg == 0.0
        assert result.reason == ZeroKeyReason.OPTIMIZATION_STALLED


def test_optimization_is_deterministic(spread_pdt, micius_down, night_down, wcp_params):
    first = optimize_rate(spread_pdt, wcp_params, night_down, micius_down)
    second = optimize_rate(spread_pdt, wcp_params, night_down, micius_down)
    assert first.rate_avg == second.rate_avg
    assert first.optimal_params == second.optimal_params
