import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from pydantic import ValidationError as PydanticValidationError

from backend.expressivity.models import (
    Activation,
    AffineSigmaMap,
    ModelSkeleton,
    NeuralOdeSpec,
    ResidualLayer,
    ResNetModel,
    dumps_model,
    embed_resnet_as_node,
    euler_discretize,
    evaluate,
    forward,
    forward_batch,
    forward_unrolled,
    integrate_node,
    integrate_node_batch,
    load_model,
    loads_model,
    random_autonomous_node,
    random_model,
    resnet_to_mlp,
    save_model,
)
from utils.core.exceptions import ConfigurationError, DimensionError, NumericalError, ValidationError
from conftest import scalar_model


class TestActivations:
    @pytest.mark.parametrize("act", list(Activation))
    def test_derivative_from_value_matches(self, act):
        y = np.linspace(-4, 4, 41)
        np.testing.assert_allclose(act.derivative_from_value(act.apply(y)), act.derivative(y), atol=1e-14)

    def test_global_bounds(self):
        assert Activation.TANH.K_sigma == 1.0
        assert Activation.SIGMOID.K_sigma == 0.25
        assert Activation.SIGMOID.apply(0.0) == pytest.approx(0.5)

    @pytest.mark.parametrize("act", list(Activation))
    def test_inverse_derivative(self, act):
        y = np.array([0.0, 0.3, 1.7])
        np.testing.assert_allclose(act.inverse_derivative(act.derivative(y)), y, atol=1e-7)

    def test_inverse_derivative_range(self):
        with pytest.raises(ValidationError):
            Activation.SIGMOID.inverse_derivative(0.5)

    def test_min_derivative_on(self):
        assert Activation.TANH.min_derivative_on(0.0) == 1.0
        assert Activation.TANH.min_derivative_on(np.inf) == 0.0

    def test_tail_derivative_positive(self):
        assert Activation.TANH.derivative(20.0) > 0.0


class TestResNetModel:
    def test_dimensions(self, make_random_model):
        model = make_random_model(n_in=3, n_hid=2, depth=4)
        assert (model.n_in, model.n_hid, model.n_out, model.depth) == (3, 2, 1, 4)
        assert model.non_augmented

    def test_batch_matches_single(self, make_random_model, rng):
        model = make_random_model(n_in=2, n_hid=3, depth=3)
        X = rng.uniform(-1, 1, size=(7, 2))
        Y = evaluate(model, X)
        for x, y in zip(X, Y):
            np.testing.assert_allclose(forward(model, x)[0], y, rtol=1e-12, atol=1e-12)

    def test_scalar_forward_by_hand(self):
        model = scalar_model(0.5, 2.0, [(1.5, -1.0, 0.2, 0.1)], out_w=3.0, out_b=-1.0)
        x = 0.4
        h1 = 0.5 * x + 2.0 * (1.5 * np.tanh(-1.0 * x + 0.2) + 0.1)
        assert forward(model, [x])[0][0] == pytest.approx(3.0 * h1 - 1.0, abs=1e-15)

    def test_trace_lengths(self, make_random_model):
        model = make_random_model(depth=5)
        _, trace = forward(model, [0.1, 0.2])
        assert len(trace.states) == 6
        assert len(trace.preacts) == 5

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1), eps=st.floats(0, 1.5), delta=st.floats(0, 1.5),
           depth=st.integers(0, 5), act=st.sampled_from(list(Activation)))
    def test_unrolled_identity(self, seed, eps, delta, depth, act):
        rng = np.random.default_rng(seed)
        model = random_model(rng, n_in=2, n_hid=3, depth=depth, eps=eps, delta=delta, activation=act)
        x = rng.uniform(-1, 1, size=2)
        direct = forward(model, x)[0]
        unrolled = forward_unrolled(model, x)
        np.testing.assert_allclose(direct, unrolled, atol=1e-12 * max(1.0, float(np.max(np.abs(direct)))))

    def test_mlp_counterpart(self, make_random_model):
        model = make_random_model(eps=0.7)
        mlp = resnet_to_mlp(model)
        assert mlp.eps == 0.0
        assert mlp.delta == model.delta
        with pytest.raises(ValidationError):
            mlp.alpha()

    def test_depth_zero_is_composition(self, make_random_model):
        model = make_random_model(depth=0)
        x = np.array([0.3, -0.2])
        expected = model.output_map(model.input_map(x))
        np.testing.assert_allclose(forward(model, x)[0], expected)

    def test_bad_channel_parameters(self, make_random_model):
        model = make_random_model()
        with pytest.raises(ValidationError):
            ResNetModel(eps=-0.1, delta=1.0, input_map=model.input_map, layers=model.layers,
                        output_map=model.output_map)
        with pytest.raises(ValidationError):
            ResNetModel(eps=1.0, delta=np.nan, input_map=model.input_map, layers=model.layers,
                        output_map=model.output_map)

    def test_width_mismatch(self, make_random_model):
        model = make_random_model(n_hid=2)
        wide = ResidualLayer(W=np.ones((3, 3)), W_tilde=np.ones((3, 3)), b=np.zeros(3), b_tilde=np.zeros(3))
        with pytest.raises(DimensionError):
            ResNetModel(eps=1.0, delta=1.0, input_map=model.input_map, layers=(wide,), output_map=model.output_map)

    def test_input_shape_checked(self, make_random_model):
        with pytest.raises(DimensionError):
            evaluate(make_random_model(n_in=2), np.zeros((4, 3)))

    def test_overflow_reports_layer(self):
        model = scalar_model(1e200, 1.0, [(1.0, 1.0, 0.0, 0.0)] * 3)
        with pytest.raises(NumericalError) as info:
            forward_batch(model, [[1.0]])
        assert info.value.details["layer"] == 2

    def test_parameters_round_trip(self, make_random_model):
        model = make_random_model(depth=2)
        params = model.parameters()
        assert "layers.1.W_tilde" in params and "output.b" in params
        doubled = model.with_parameters({"layers.0.W": 2 * params["layers.0.W"]})
        np.testing.assert_allclose(doubled.layers[0].W, 2 * model.layers[0].W)
        np.testing.assert_allclose(doubled.layers[1].W, model.layers[1].W)
        with pytest.raises(ValidationError):
            model.with_parameters({"layers.9.W": np.zeros((2, 2))})

    def test_weights_are_read_only(self, make_random_model):
        model = make_random_model()
        with pytest.raises(ValueError):
            model.layers[0].W[0, 0] = 1.0


class TestSkeleton:
    def test_identity_needs_square(self):
        with pytest.raises(PydanticValidationError):
            ModelSkeleton(eps=1, delta=1, depth=1, n_in=2, n_hid=3, input_kind="identity")

    def test_unknown_keys_rejected(self):
        with pytest.raises(PydanticValidationError):
            ModelSkeleton(eps=1, delta=1, depth=1, n_in=1, n_hid=1, widht=3)

    def test_outer_template(self):
        skeleton = ModelSkeleton(eps=1, delta=0.1, depth=3, n_in=2, n_hid=2, input_kind="tanh",
                                 output_kind="sigmoid", residual_form="outer")
        model = skeleton.template()
        np.testing.assert_array_equal(model.layers[0].W_tilde, np.eye(2))
        np.testing.assert_array_equal(model.layers[0].W, np.zeros((2, 2)))
        assert model.output_map.act == Activation.SIGMOID
        assert "layers.*.W_tilde" in skeleton.frozen_patterns()
        assert "input.W_tilde" in skeleton.frozen_patterns()

    def test_identity_input_is_frozen(self):
        skeleton = ModelSkeleton(eps=1, delta=1, depth=1, n_in=1, n_hid=1)
        assert "input.*" in skeleton.frozen_patterns()
        assert skeleton.template().input_map.affine_only


class TestSerialization:
    def test_round_trip(self, make_random_model, rng, tmp_path):
        model = make_random_model(n_in=3, n_hid=2, depth=2, output_kind="sigmoid")
        path = save_model(model, tmp_path / "m.json")
        loaded = load_model(path)
        X = rng.uniform(-1, 1, size=(5, 3))
        np.testing.assert_array_equal(evaluate(loaded, X), evaluate(model, X))
        assert loaded.output_map.act == Activation.SIGMOID

    def test_mixed_layer_activations_round_trip(self, make_random_model, rng):
        base = make_random_model(n_in=2, n_hid=2, depth=3)
        layers = tuple(
            ResidualLayer(W=layer.W, W_tilde=layer.W_tilde, b=layer.b, b_tilde=layer.b_tilde,
                          act=Activation.SIGMOID if index == 1 else Activation.TANH)
            for index, layer in enumerate(base.layers)
        )
        model = ResNetModel(eps=base.eps, delta=base.delta, input_map=base.input_map,
                            layers=layers, output_map=base.output_map)
        loaded = loads_model(dumps_model(model))
        assert [layer.act for layer in loaded.layers] == [Activation.TANH, Activation.SIGMOID, Activation.TANH]
        X = rng.uniform(-1, 1, size=(6, 2))
        np.testing.assert_array_equal(evaluate(loaded, X), evaluate(model, X))

    def test_field_names(self, make_random_model):
        text = dumps_model(make_random_model())
        for key in ('"eps"', '"delta"', '"n_hid"', '"W_tilde"', '"b_tilde"', '"affine_only"', '"layers"'):
            assert key in text

    def test_bad_document(self):
        with pytest.raises(ConfigurationError):
            loads_model('{"eps": 1.0}')

    def test_declared_dims_checked(self, make_random_model):
        text = dumps_model(make_random_model(n_in=2)).replace('"n_in": 2', '"n_in": 5')
        with pytest.raises(DimensionError):
            loads_model(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError) as info:
            load_model(tmp_path / "absent.json")
        assert info.value.error_code == "MODEL_NOT_FOUND"


class TestNeuralOde:
    def test_euler_discretization_is_euler_scheme(self, rng):
        spec = random_autonomous_node(rng, n_in=2, n_hid=2, horizon_T=1.0)
        model = euler_discretize(spec, 10)
        assert model.eps == 1.0 and model.delta == pytest.approx(0.1)
        X = rng.uniform(-1, 1, size=(6, 2))
        np.testing.assert_allclose(evaluate(model, X), integrate_node_batch(spec, X, 10, "euler"), atol=1e-13)

    def test_embedding_reproduces_model(self, make_random_model, rng):
        model = make_random_model(n_in=2, n_hid=2, depth=4, eps=0.8, delta=0.3)
        spec = embed_resnet_as_node(model)
        assert spec.horizon_T == pytest.approx(1.2)
        rebuilt = euler_discretize(spec, model.depth)
        assert rebuilt.eps == pytest.approx(0.8)
        X = rng.uniform(-1, 1, size=(5, 2))
        np.testing.assert_allclose(evaluate(rebuilt, X), evaluate(model, X), atol=1e-12)

    def test_embedding_needs_delta(self, make_random_model):
        with pytest.raises(ValidationError):
            embed_resnet_as_node(make_random_model(delta=0.0))

    def test_rk4_converges(self, rng):
        spec = random_autonomous_node(rng, n_in=1, n_hid=1, horizon_T=1.0)
        coarse = integrate_node(spec, [0.3], 50, "rk4")
        fine = integrate_node(spec, [0.3], 100, "rk4")
        assert abs(coarse[0] - fine[0]) < 1e-8

    def test_bad_method(self, rng):
        spec = random_autonomous_node(rng, n_in=1, n_hid=1, horizon_T=1.0)
        with pytest.raises(ValidationError):
            integrate_node(spec, [0.0], 10, "midpoint")

    def test_blow_up_reports_time(self):
        layer = ResidualLayer(W=[[0.0]], W_tilde=[[0.0]], b=[0.0], b_tilde=[0.0])
        spec = NeuralOdeSpec(fields=(layer,), horizon_T=1.0, input_map=AffineSigmaMap.identity(1),
                             output_map=AffineSigmaMap.identity(1), linear_coefficient=1e308)
        with pytest.raises(NumericalError) as info:
            integrate_node(spec, [1.0], 4, "euler")
        assert "time" in info.value.details
