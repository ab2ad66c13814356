from __future__ import annotations

import math

import numpy as np
import pytest

from relay_csi import quantizer
from relay_csi.channel_models import RayleighPower, TabulatedPower, UniformPower
from relay_csi.errors import (
    DegenerateKappa,
    DesignInfeasible,
    InvalidInput,
    InvalidRatio,
    NoConvergence,
    NumericalError,
    TooFewLevels,
)
from relay_csi.loss_eval import delta_q
from relay_csi.quantizer import (
    QuantizationVector,
    design_fixed_point,
    design_general,
    design_max_entropy,
    design_proposed,
    design_ratios,
    design_uniform,
    iterate_ratios,
    kappa_star,
    levels_for_bits,
    levels_from_ratios,
    optimality_residuals,
    quantize,
    quantize_many,
)


def _exponential_table() -> TabulatedPower:
    h = np.linspace(0.0, 12.0, 2001)
    return TabulatedPower.from_table(h, np.exp(-h))


def test_ratio_recursion():
    ratios = iterate_ratios(3.0, 5)
    assert len(ratios) == 6
    for previous, current in zip(ratios.r, ratios.r[1:]):
        assert current == pytest.approx(1.0 + math.log(previous), rel=1e-14)


def test_ratio_must_exceed_one():
    with pytest.raises(InvalidRatio):
        iterate_ratios(1.0, 3)


@pytest.mark.parametrize("r0", [1.05, 1.5, 3.0, 10.0, 1e4])
def test_ratios_shrink_like_one_over_n(r0):
    ratios = iterate_ratios(r0, 2000)
    c = max(10.0 * ratios.excess[10], 2.5)
    for n in range(10, 2001):
        assert ratios.excess[n] <= c / n
    assert 2000 * ratios.excess[2000] == pytest.approx(2.0, abs=0.1)


def test_ratio_product_hits_target():
    gamma, kappa = 50.0, 2.0
    ratios = design_ratios(6, gamma, kappa)
    assert math.prod(ratios.r) == pytest.approx(kappa * gamma + 1.0, rel=1e-12)


def test_first_ratio_limits_in_snr():
    low = design_ratios(3, 1e-8, 2.0)
    assert low.excess[0] < 1e-7
    r0 = [design_ratios(3, g, 2.0)[0] for g in (1.0, 10.0, 100.0, 1e4, 1e8)]
    assert all(a < b for a, b in zip(r0, r0[1:]))
    assert r0[-1] > 1e3


def test_levels_from_ratios_top_matches_kappa():
    gamma = 10.0
    ratios = design_ratios(4, gamma, 2.0)
    levels = levels_from_ratios(ratios, gamma)
    assert levels.shape == (4,)
    top = (math.prod(ratios.r) - 1.0) / gamma
    assert top == pytest.approx(2.0, rel=1e-12)


def test_kappa_star():
    assert kappa_star(4, RayleighPower()) == pytest.approx(math.log(4.0), rel=1e-12)
    assert kappa_star(4, UniformPower()) == 2.0
    assert kappa_star(4, _exponential_table()) == pytest.approx(math.log(4.0), abs=1e-3)
    with pytest.raises(TooFewLevels):
        kappa_star(1, RayleighPower())


@pytest.mark.parametrize("dist", [RayleighPower(), _exponential_table()])
def test_top_interval_carries_about_one_over_n(dist):
    n = 16
    q = design_general(n, 10.0, dist)
    tail = 1.0 - dist.cdf(q.levels[-1])
    assert 0.5 / n <= tail <= 2.0 / n


def test_ratios_grow_with_snr_but_slower_than_snr():
    grid = np.array([1.0, 10.0, 1e2, 1e3, 1e4])
    ratios = np.array([design_ratios(6, g, 2.0).r for g in grid])
    assert np.all(np.diff(ratios, axis=0) > 0.0)
    assert np.all(np.diff(grid[:, None] / ratios, axis=0) > 0.0)


def test_single_level_uniform_design():
    q = design_uniform(1, 10.0)
    r0 = q.ratios[0]
    assert r0 * (1.0 + math.log(r0)) == pytest.approx(21.0, rel=1e-12)
    assert r0 == pytest.approx(7.0907, rel=1e-3)
    assert q.levels[0] == pytest.approx((r0 - 1.0) / 10.0, rel=1e-12)
    assert q.levels[0] == pytest.approx(0.609, abs=1e-3)


def test_general_design_rejects_bad_input():
    with pytest.raises(TooFewLevels):
        design_general(1, 10.0, RayleighPower())
    with pytest.raises(DegenerateKappa):
        design_general(3, 10.0, RayleighPower(), kappa=0.0)


@pytest.mark.parametrize("n", [2, 3, 8])
def test_general_design_equals_uniform_design_for_uniform_law(n):
    general = design_general(n, 10.0, UniformPower())
    uniform = design_uniform(n, 10.0)
    assert np.allclose(general.array, uniform.array, rtol=1e-12, atol=0.0)


def test_uniform_design_is_stationary():
    q = design_uniform(5, 30.0)
    assert np.all(optimality_residuals(q, 30.0, UniformPower()) < 1e-8)


def test_uniform_design_is_a_local_minimum():
    law, gamma = UniformPower(), 30.0
    q = design_uniform(5, gamma)
    best = delta_q(q, gamma, law).delta_q
    rng = np.random.default_rng(12)
    for _ in range(100):
        levels = np.array(q.levels)
        n = int(rng.integers(levels.size))
        levels[n] *= 1.0 + rng.choice([-0.01, 0.01])
        moved = QuantizationVector(levels=tuple(levels), gamma_design=gamma, support_max=2.0)
        assert delta_q(moved, gamma, law).delta_q >= best - 1e-10


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_fixed_point_satisfies_stationarity_for_rayleigh(n):
    q = design_fixed_point(n, 10.0, RayleighPower())
    assert q.method == "fixed-point"
    assert np.max(optimality_residuals(q, 10.0, RayleighPower())) < 1e-8


def test_max_entropy_intervals_are_equiprobable():
    q = design_max_entropy(7, RayleighPower(), 10.0)
    assert np.allclose(RayleighPower().cdf(q.array), np.arange(1, 8) / 8.0, atol=1e-12)
    assert q.method == "max-entropy"


def test_proposed_design_refines_small_level_counts():
    law = RayleighPower()
    q = design_proposed(1, 100.0, law)
    assert q.method == "fixed-point"
    assert optimality_residuals(q, 100.0, law)[0] < 1e-8
    small = design_proposed(3, 100.0, law)
    assert small.method == "fixed-point"
    closed = design_general(3, 100.0, law)
    assert delta_q(small, 100.0, law).delta_q <= delta_q(closed, 100.0, law).delta_q + 1e-12
    assert design_proposed(15, 100.0, law).method == "general"


def test_proposed_design_keeps_closed_form_when_refinement_fails(monkeypatch):
    def fail(*args, **kwargs):
        raise NoConvergence("stalled", 1e-3)

    monkeypatch.setattr(quantizer, "design_fixed_point", fail)
    q = design_proposed(3, 100.0, RayleighPower())
    assert q.method == "general"


@pytest.mark.parametrize(
    "error, expected",
    [
        (ValueError("f(a) and f(b) must have different signs"), DesignInfeasible),
        (RuntimeError("failed to converge after 500 iterations"), NoConvergence),
    ],
)
def test_root_finder_failures_become_numerical_errors(monkeypatch, error, expected):
    def fail(*args, **kwargs):
        raise error

    monkeypatch.setattr(quantizer, "brentq", fail)
    with pytest.raises(expected):
        design_ratios(4, 10.0, 2.0)
    with pytest.raises(NumericalError):
        design_fixed_point(1, 10.0, RayleighPower())


def test_quantize_reports_lower_boundary():
    q = QuantizationVector(levels=(0.5, 1.0, 1.5), gamma_design=None, support_max=2.0)
    assert quantize(q, 0.2) == (0, 0.0)
    assert quantize(q, 0.5) == (1, 0.5)
    assert quantize(q, 1.2) == (2, 1.0)
    assert quantize(q, 1.99) == (3, 1.5)
    index, level = quantize_many(q, np.array([0.2, 0.5, 1.2, 1.99]))
    assert index.tolist() == [0, 1, 2, 3]
    assert level.tolist() == [0.0, 0.5, 1.0, 1.5]


def test_quantized_value_never_exceeds_truth():
    q = design_general(7, 100.0, RayleighPower())
    h = RayleighPower().quantile(np.linspace(0.0, 0.999, 500))
    _, level = quantize_many(q, h)
    assert np.all(level <= h)


def test_quantization_vector_validation():
    with pytest.raises(InvalidInput):
        QuantizationVector(levels=(1.0, 0.5), gamma_design=1.0, support_max=2.0)
    with pytest.raises(InvalidInput):
        QuantizationVector(levels=(0.0, 0.5), gamma_design=1.0, support_max=2.0)
    with pytest.raises(InvalidInput):
        QuantizationVector(levels=(0.5, 2.0), gamma_design=1.0, support_max=2.0)
    with pytest.raises(InvalidInput):
        QuantizationVector(levels=(), gamma_design=1.0, support_max=2.0)


def test_json_format():
    q = design_general(3, 100.0, RayleighPower())
    data = q.to_dict()
    assert data["support_max"] == "inf"
    assert data["gamma"] == 100.0
    restored = QuantizationVector.from_json(q.to_json())
    assert restored.levels == q.levels
    assert math.isinf(restored.support_max)


def test_levels_for_bits():
    assert [levels_for_bits(k) for k in (1, 2, 3)] == [1, 3, 7]
    with pytest.raises(InvalidInput):
        levels_for_bits(0)
