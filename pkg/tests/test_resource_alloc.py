from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.optimize import minimize

from relay_csi.channel_models import RayleighPower
from relay_csi.errors import InvalidInput, MissingQuantizer
from relay_csi.quantizer import QuantizationVector, design_general, design_proposed
from relay_csi.resource_alloc import (
    PERFECT_LINK,
    ChannelRealization,
    NetworkConfig,
    QuantizedCsi,
    db_to_linear,
    max_sum_rate,
    max_sum_rate_batch,
    solve_realization,
    water_fill,
)


def _bisection_rate(caps: np.ndarray, budget: float) -> float:
    if caps.sum() <= budget:
        return float(np.sum(np.log1p(caps)))
    low, high = 0.0, float(caps.max())
    for _ in range(200):
        mid = 0.5 * (low + high)
        if np.minimum(caps, mid).sum() > budget:
            high = mid
        else:
            low = mid
    return float(np.sum(np.log1p(np.minimum(caps, low))))


def test_symmetric_split():
    result = max_sum_rate([10.0, 10.0], 2.0)
    assert result.p == pytest.approx((1.0, 1.0))
    assert result.sum_rate_nats == pytest.approx(2.0 * math.log(2.0))
    assert result.water_level == pytest.approx(1.0)


def test_binding_cap():
    result = max_sum_rate([0.5, 10.0], 2.0)
    assert result.p == pytest.approx((0.5, 1.5))
    assert result.sum_rate_nats == pytest.approx(math.log(1.5) + math.log(2.5))


def test_surplus_budget():
    result = max_sum_rate([0.3, 0.3], 2.0)
    assert result.p == pytest.approx((0.3, 0.3))
    assert result.sum_rate_nats == pytest.approx(2.0 * math.log(1.3))
    assert result.surplus == pytest.approx(1.4)
    assert result.water_level == pytest.approx(0.3)


def test_zero_budget():
    result = max_sum_rate([1.0, 2.0, 3.0], 0.0)
    assert result.p == (0.0, 0.0, 0.0)
    assert result.sum_rate_nats == 0.0


def test_negative_inputs_rejected():
    with pytest.raises(InvalidInput):
        max_sum_rate([-1.0, 1.0], 1.0)
    with pytest.raises(InvalidInput):
        max_sum_rate([1.0, 1.0], -1.0)


def test_matches_bisection_and_feasibility():
    rng = np.random.default_rng(3)
    for _ in range(500):
        n = int(rng.integers(1, 7))
        caps = rng.exponential(5.0, n)
        budget = float(rng.exponential(5.0))
        result = max_sum_rate(caps, budget)
        p = np.asarray(result.p)
        assert p.sum() <= budget + 1e-9
        assert np.all(p <= caps + 1e-9)
        assert result.sum_rate_nats == pytest.approx(_bisection_rate(caps, budget), abs=1e-9)


def test_matches_generic_concave_solver():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = int(rng.integers(2, 4))
        caps = rng.uniform(0.1, 3.0, n)
        budget = float(rng.uniform(0.5, 4.0))
        solved = minimize(
            lambda p: -np.sum(np.log1p(p)),
            x0=np.full(n, min(budget / n, caps.min()) / 2.0),
            jac=lambda p: -1.0 / (1.0 + p),
            bounds=[(0.0, c) for c in caps],
            constraints=[{"type": "ineq", "fun": lambda p: budget - p.sum(), "jac": lambda p: -np.ones(n)}],
            method="SLSQP",
            options={"ftol": 1e-14, "maxiter": 500},
        )
        assert max_sum_rate(caps, budget).sum_rate_nats == pytest.approx(-solved.fun, abs=1e-6)


def test_kkt_structure():
    rng = np.random.default_rng(5)
    for _ in range(200):
        caps = rng.exponential(2.0, 4)
        result = max_sum_rate(caps, float(rng.exponential(4.0)))
        for p, cap in zip(result.p, caps):
            if 0.0 < p < cap:
                assert abs(1.0 / (1.0 + p) - 1.0 / (1.0 + result.water_level)) < 1e-9


def test_rate_is_monotone():
    rng = np.random.default_rng(6)
    for _ in range(200):
        caps = rng.exponential(2.0, 3)
        budget = float(rng.exponential(3.0))
        base = max_sum_rate(caps, budget).sum_rate_nats
        assert max_sum_rate(caps, budget * 1.1).sum_rate_nats >= base - 1e-12
        bigger = caps.copy()
        bigger[int(rng.integers(0, 3))] *= 1.5
        assert max_sum_rate(bigger, budget).sum_rate_nats >= base - 1e-12


def test_batch_matches_single():
    rng = np.random.default_rng(8)
    caps = rng.exponential(2.0, (50, 3))
    budget = rng.exponential(3.0, 50)
    shares, rates = max_sum_rate_batch(caps, budget)
    for row in range(50):
        single = max_sum_rate(caps[row], float(budget[row]))
        assert shares[row] == pytest.approx(single.p)
        assert rates[row] == pytest.approx(single.sum_rate_nats)
    _, level, surplus = water_fill(caps, budget)
    assert np.all(surplus >= 0.0)
    assert np.all(level >= 0.0)


def test_network_config():
    cfg = NetworkConfig.from_db([25.0, 25.0], 20.0)
    assert cfg.n_sources == 2
    assert cfg.gamma_rd == pytest.approx(100.0)
    assert cfg.gamma_sr[0] == pytest.approx(db_to_linear(25.0))
    with pytest.raises(InvalidInput):
        NetworkConfig(gamma_sr=(), gamma_rd=1.0)
    with pytest.raises(InvalidInput):
        NetworkConfig(gamma_sr=(1.0, 0.0), gamma_rd=1.0)
    with pytest.raises(InvalidInput):
        ChannelRealization(h_sr=(-0.1,), h_rd=1.0)


def test_perfect_csi_uses_true_caps():
    cfg = NetworkConfig(gamma_sr=(10.0, 20.0), gamma_rd=5.0)
    real = ChannelRealization(h_sr=(0.5, 1.0), h_rd=2.0)
    assert solve_realization(cfg, real) == max_sum_rate([5.0, 20.0], 10.0)


def test_zero_relay_gain():
    cfg = NetworkConfig(gamma_sr=(10.0, 20.0), gamma_rd=5.0)
    result = solve_realization(cfg, ChannelRealization(h_sr=(0.5, 1.0), h_rd=0.0))
    assert result.p == (0.0, 0.0)
    assert result.sum_rate_nats == 0.0


def test_pass_through_quantizers_match_perfect_csi():
    cfg = NetworkConfig(gamma_sr=(10.0, 20.0), gamma_rd=5.0)
    real = ChannelRealization(h_sr=(0.5, 1.25), h_rd=2.0)
    perfect = solve_realization(cfg, real)
    dense = QuantizationVector(
        levels=(0.25, 0.5, 1.0, 1.25, 2.0, 3.0), gamma_design=None, support_max=math.inf
    )
    quantized = solve_realization(cfg, real, QuantizedCsi(sr=(dense, dense), rd=dense))
    assert quantized.sum_rate_nats == pytest.approx(perfect.sum_rate_nats, abs=1e-9)
    assert quantized.p == pytest.approx(perfect.p, abs=1e-9)
    marked = QuantizedCsi(sr=(PERFECT_LINK, PERFECT_LINK), rd=PERFECT_LINK)
    assert solve_realization(cfg, real, marked).sum_rate_nats == perfect.sum_rate_nats


def test_one_bit_quantizers_lose_rate():
    cfg = NetworkConfig.from_db([25.0, 25.0], 20.0)
    law = RayleighPower()
    csi = QuantizedCsi(
        sr=tuple(design_proposed(1, g, law) for g in cfg.gamma_sr),
        rd=design_proposed(1, cfg.gamma_rd / 2, law),
    )
    rng = np.random.default_rng(9)
    for _ in range(50):
        real = ChannelRealization(h_sr=tuple(rng.exponential(1.0, 2)), h_rd=float(rng.exponential()))
        perfect = solve_realization(cfg, real)
        quantized = solve_realization(cfg, real, csi)
        assert quantized.sum_rate_nats <= perfect.sum_rate_nats + 1e-12
        assert quantized.achieved_rate_nats >= quantized.sum_rate_nats - 1e-12


def test_achieved_rate_uses_the_quantized_shares():
    cfg = NetworkConfig(gamma_sr=(10.0, 10.0), gamma_rd=10.0)
    real = ChannelRealization(h_sr=(1.0, 1.0), h_rd=1.4)
    q = QuantizationVector(levels=(0.5, 1.0, 2.0), gamma_design=None, support_max=math.inf)
    result = solve_realization(cfg, real, QuantizedCsi(sr=(q, q), rd=q))
    assert result.p == pytest.approx((5.0, 5.0), abs=1e-12)
    assert result.sum_rate_nats == pytest.approx(2.0 * math.log(6.0), rel=1e-12)
    assert result.achieved_rate_nats == pytest.approx(2.0 * math.log(6.0), rel=1e-12)


def test_missing_quantizer():
    cfg = NetworkConfig(gamma_sr=(10.0,), gamma_rd=5.0)
    real = ChannelRealization(h_sr=(1.0,), h_rd=1.0)
    q = design_general(3, 10.0, RayleighPower())
    with pytest.raises(MissingQuantizer):
        solve_realization(cfg, real, QuantizedCsi(sr=(q,), rd=None))
    with pytest.raises(MissingQuantizer):
        solve_realization(cfg, real, QuantizedCsi(sr=(), rd=q))
