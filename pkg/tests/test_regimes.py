import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from backend.expressivity.models import Activation, forward_batch, random_model
from backend.expressivity.numerics import Box
from backend.expressivity.regimes import (
    Verdict,
    assemble_critical_model,
    channel_ratio,
    classify_regime,
    compute_constants,
    construct_critical_point,
    hidden_state_bounds,
    one_layer_exclusion,
    pointwise_full_rank_check,
)
from backend.expressivity.topology import GridDomain, critical_point_search
from backend.expressivity.gradients import input_gradient
from utils.core.exceptions import ValidationError, VerdictInapplicableError
from tests.conftest import scalar_model

UNIT_1D = Box.cube(-1.0, 1.0, 1)
UNIT_2D = Box.cube(-1.0, 1.0, 2)


def with_channels(model, eps, delta):
    return dataclasses.replace(model, eps=eps, delta=delta)


class TestConstants:
    def test_scalar_constants(self):
        model = scalar_model(1.0, 0.5, [(0.5, 2.0, 0.25, 0.0)])
        constants = compute_constants(model, UNIT_1D)
        assert constants.nu_max == pytest.approx(1.0)
        assert constants.nu_min == pytest.approx(1.0)
        assert constants.omega_inf == pytest.approx(2.0)
        assert constants.beta_inf == pytest.approx(0.25)
        assert constants.alpha == pytest.approx(0.5)
        assert constants.K_sigma == pytest.approx(1.0)
        assert constants.hidden_bounds[0] == pytest.approx(1.0)
        # |a_1| <= |W| H_0 + |b|
        assert constants.preact_bounds[0] == pytest.approx(2.25)
        assert constants.k_sigma == pytest.approx(1.0 / np.cosh(2.25) ** 2)

    def test_hidden_bounds_dominate_trajectories(self, make_random_model, rng):
        model = make_random_model(n_in=2, n_hid=2, depth=4, eps=0.9, delta=0.7)
        bounds = hidden_state_bounds(model, UNIT_2D)
        _, trace = forward_batch(model, rng.uniform(-1.0, 1.0, size=(500, 2)))
        for H, states in zip(bounds, trace.states):
            assert np.max(np.abs(states)) <= H + 1e-12

    def test_empirical_k_never_below_certified(self, make_random_model):
        model = make_random_model(depth=3)
        constants = compute_constants(model, UNIT_2D)
        assert constants.k_sigma_empirical >= constants.k_sigma - 1e-15

    def test_channel_ratio_mlp_limit_is_infinite(self):
        assert channel_ratio(scalar_model(0.0, 1.0, [(1.0, 1.0, 0.0, 0.0)])) == float("inf")


class TestClassifyRegime:
    def test_small_alpha_is_node_side(self):
        report = classify_regime(scalar_model(1.0, 0.1, [(1.0, 1.0, 0.0, 0.0)]), UNIT_1D)
        assert report.verdict == Verdict.NODE_SIDE
        assert report.node_side_excluded
        assert report.branch == "ratio"
        assert report.thresholds[0] == pytest.approx(1.0)

    def test_large_alpha_is_mlp_side(self):
        report = classify_regime(scalar_model(0.001, 1.0, [(1.0, 2.0, 0.0, 0.0)]), UNIT_1D)
        assert report.verdict == Verdict.MLP_SIDE
        assert report.mlp_side_excluded
        assert not report.node_side_excluded

    def test_between_thresholds_is_indeterminate(self):
        model = scalar_model(1.0, 1.0, [(1.0, -1.0, 0.0, 0.0)])
        report = classify_regime(model, UNIT_1D)
        assert report.verdict == Verdict.INDETERMINATE
        assert not report.excluded

    def test_skip_only_model(self):
        report = classify_regime(scalar_model(1.0, 0.0, [(1.0, -5.0, 0.0, 0.0)]), UNIT_1D)
        assert report.branch == "skip_only"
        assert report.verdict == Verdict.NODE_SIDE

    def test_constant_model(self):
        report = classify_regime(scalar_model(0.0, 0.0, [(1.0, 1.0, 0.0, 0.0)]), UNIT_1D)
        assert report.branch == "constant"
        assert report.verdict == Verdict.INDETERMINATE
        assert "constant_map" in report.flags

    def test_mlp_limit_with_invertible_products(self):
        report = classify_regime(scalar_model(0.0, 1.0, [(1.0, 2.0, 0.0, 0.0)]), UNIT_1D)
        assert report.branch == "mlp_limit"
        assert report.verdict == Verdict.MLP_SIDE

    def test_augmented_model_is_rejected(self, make_random_model):
        model = make_random_model(n_in=1, n_hid=2)
        with pytest.raises(VerdictInapplicableError) as exc:
            classify_regime(model, UNIT_1D)
        assert exc.value.error_code == "AUGMENTED_MODEL"
        assert exc.value.exit_code == 5

    def test_report_serializes_infinite_thresholds(self):
        report = classify_regime(scalar_model(1.0, 0.5, [(0.0, 0.0, 0.0, 0.0)]), UNIT_1D)
        assert "degenerate_residual" in report.flags
        assert "Infinity" in report.model_dump_json()

    @settings(max_examples=30, deadline=None)
    @given(scale=st.floats(min_value=1e-3, max_value=1e3))
    def test_node_side_flag_is_invariant_under_rescaling(self, scale):
        base = scalar_model(1.0, 0.3, [(0.8, 1.5, 0.1, 0.0), (-0.6, 0.9, -0.2, 0.1)])
        before = classify_regime(base, UNIT_1D)
        after = classify_regime(with_channels(base, scale, 0.3 * scale), UNIT_1D)
        assert after.node_side_excluded == before.node_side_excluded
        assert after.constants.nu_max == pytest.approx(before.constants.nu_max)
        assert after.constants.alpha == pytest.approx(before.constants.alpha)


def _node_side_instance(rng):
    model = random_model(rng, n_in=2, n_hid=2, depth=3, eps=1.0, delta=1.0)
    constants = compute_constants(model, UNIT_2D)
    delta = 0.5 / (constants.nu_max * constants.K_sigma)
    return with_channels(model, 1.0, delta)


def _mlp_side_instance(rng):
    model = random_model(rng, n_in=2, n_hid=2, depth=1, eps=0.01, delta=1.0, weight_range=1.0)
    constants = compute_constants(model, UNIT_2D)
    eps = min(0.01, 0.5 * constants.nu_min * constants.k_sigma)
    return with_channels(model, eps, 1.0)


@pytest.mark.parametrize("instance", range(5))
def test_certified_node_side_has_no_critical_points(instance):
    model = _node_side_instance(np.random.default_rng(instance))
    report = classify_regime(model, UNIT_2D)
    assert report.verdict == Verdict.NODE_SIDE
    result = critical_point_search(model, GridDomain(UNIT_2D, 21))
    assert not result.found
    assert result.candidates == []


@pytest.mark.parametrize("instance", range(5))
def test_certified_mlp_side_has_no_critical_points(instance):
    model = _mlp_side_instance(np.random.default_rng(100 + instance))
    report = classify_regime(model, UNIT_2D)
    assert report.verdict == Verdict.MLP_SIDE
    result = critical_point_search(model, GridDomain(UNIT_2D, 21))
    assert not result.found
    assert result.candidates == []


@pytest.mark.slow
def test_verdict_soundness_over_many_models(rng):
    for _ in range(200):
        model = _node_side_instance(rng)
        assert classify_regime(model, UNIT_2D).verdict == Verdict.NODE_SIDE
        assert not critical_point_search(model, GridDomain(UNIT_2D, 21)).found


@pytest.mark.slow
def test_mlp_side_soundness_over_many_models():
    rng = np.random.default_rng(7)
    grid = GridDomain(UNIT_2D, 21)
    for index in range(200):
        model = _mlp_side_instance(rng)
        assert classify_regime(model, UNIT_2D).verdict == Verdict.MLP_SIDE, index
        result = critical_point_search(model, grid)
        assert not result.found, (index, result.location)


class TestConstruction:
    @settings(max_examples=40, deadline=None)
    @given(
        alpha=st.floats(min_value=0.2, max_value=5.0),
        margin=st.floats(min_value=0.2, max_value=3.0),
        target=st.floats(min_value=-0.9, max_value=0.9),
        sign=st.sampled_from([1, -1]),
    )
    def test_embedded_critical_point_is_found(self, alpha, margin, target, sign):
        W = -1.0 / alpha - margin
        construction = construct_critical_point(alpha, W, target)
        model = assemble_critical_model(construction, eps=1.0, sign=sign)
        assert abs(input_gradient(model, [target]).grad[0]) < 1e-9
        result = critical_point_search(model, GridDomain(UNIT_1D, 2001))
        assert result.found
        assert any(abs(c[0] - target) < 1e-6 for c in result.candidates)

    def test_boundary_weight_gives_single_root(self):
        construction = construct_critical_point(2.0, -0.5, 0.3)
        assert construction.b_plus == pytest.approx(construction.b_minus)

    def test_weight_above_threshold_is_rejected(self):
        with pytest.raises(ValidationError) as exc:
            construct_critical_point(1.0, -0.5, 0.0)
        assert exc.value.error_code == "NO_CRITICAL_SOLUTION"

    def test_assembled_channels(self):
        construction = construct_critical_point(0.5, -3.0, 0.0)
        model = assemble_critical_model(construction, eps=2.0)
        assert model.delta == pytest.approx(1.0)
        assert model.depth == 1

    def test_construction_on_a_prefix(self):
        prefix = scalar_model(1.0, 1.0, [(1.0, 0.5, 0.1, 0.0)])
        construction = construct_critical_point(1.0, -2.0, 0.4, prefix=prefix)
        model = assemble_critical_model(construction, eps=1.0, prefix=prefix)
        assert construction.layer_index == 2
        assert abs(input_gradient(model, [0.4]).grad[0]) < 1e-9

    def test_prefix_channel_mismatch(self):
        prefix = scalar_model(1.0, 0.5, [(1.0, 0.5, 0.1, 0.0)])
        construction = construct_critical_point(1.0, -2.0, 0.4, prefix=prefix)
        with pytest.raises(ValidationError):
            assemble_critical_model(construction, eps=1.0, prefix=prefix)


class TestOneLayerExclusion:
    def test_positive_product(self):
        result = one_layer_exclusion(1.0, 1.0, 2.0, omega_inf=2.0, beta_inf=0.0)
        assert result.no_critical_point
        assert result.reason == "product_above_minus_inverse_alpha"

    def test_product_above_minus_inverse_alpha(self):
        assert one_layer_exclusion(1.0, 1.0, -0.5, 0.5, 0.0).no_critical_point

    def test_derivative_bound_on_domain(self):
        result = one_layer_exclusion(1.0, 1.0, -4.0, omega_inf=0.05, beta_inf=0.05)
        assert result.no_critical_point
        assert result.reason == "derivative_bound_on_domain"

    def test_critical_point_possible(self):
        result = one_layer_exclusion(1.0, 1.0, -1.005, omega_inf=0.4, beta_inf=0.1)
        assert not result.no_critical_point
        assert result.reason == "critical_point_possible"
        a = result.critical_preactivation
        assert float(Activation.TANH.derivative(a)) == pytest.approx(1.0 / 1.005)

    def test_bad_alpha(self):
        with pytest.raises(ValidationError):
            one_layer_exclusion(0.0, 1.0, 1.0, 1.0, 0.0)


class TestPointwiseRank:
    def test_detects_singular_layer(self):
        model = scalar_model(1.0, 1.0, [(1.0, -1.0, 0.0, 0.0)])
        check = pointwise_full_rank_check(model, [[0.0], [0.5]])
        assert check.full_rank[0] == [False]
        assert check.full_rank[1] == [True]
        assert check.rank_deficient_layers(0) == [0]
        assert check.sigma_min_D[0][0] == pytest.approx(0.0, abs=1e-12)
        assert not check.all_full_rank

    def test_requires_positive_channels(self):
        with pytest.raises(ValidationError):
            pointwise_full_rank_check(scalar_model(0.0, 1.0, [(1.0, 1.0, 0.0, 0.0)]), [[0.0]])
