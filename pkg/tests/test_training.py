import numpy as np
import pytest
from pydantic import ValidationError as PydanticValidationError

from backend.expressivity.models import ModelSkeleton, evaluate, forward_batch
from backend.expressivity.numerics import Box
from backend.expressivity.training import (
    DEFAULT_BAND,
    Adam,
    AdamState,
    BatchNormLayer,
    Dataset,
    DatasetKind,
    TrainConfig,
    adam_step,
    fold_batch_norm,
    is_frozen,
    make_dataset,
    psi_circle,
    psi_xor,
    quadratic_target,
    train,
    xavier_init,
)
from utils.core.exceptions import ConfigurationError, InvalidStateError, NumericalError, ValidationError


def quad_skeleton(depth=2, residual_form="full"):
    return ModelSkeleton(eps=1.0, delta=0.5, depth=depth, n_in=1, n_hid=1, residual_form=residual_form)


def circle_skeleton(depth=3):
    return ModelSkeleton(eps=1.0, delta=0.1, depth=depth, n_in=2, n_hid=2, input_kind="tanh",
                         output_kind="sigmoid", residual_form="outer")


class TestDatasets:
    def test_circle_labels_and_band(self):
        data = make_dataset(DatasetKind.CIRCLE_2D, 500, seed=1)
        psi = psi_circle(data.inputs)
        assert len(data) == 500
        assert np.all(np.abs(psi - 0.5) >= DEFAULT_BAND)
        assert np.array_equal(data.targets, (psi > 0.5).astype(float))
        assert np.all(np.abs(data.inputs) <= 2.5)

    def test_xor_labels(self):
        data = make_dataset(DatasetKind.XOR_2D, 300, seed=2, band=0.1)
        psi = psi_xor(data.inputs)
        assert np.all(np.abs(psi - 0.5) >= 0.1)
        assert set(np.unique(data.targets)) == {0.0, 1.0}

    def test_quad1d_targets(self):
        data = make_dataset(DatasetKind.QUAD_1D, 100, seed=0)
        assert data.dim == 1
        np.testing.assert_allclose(data.targets, data.inputs[:, 0] ** 2)
        assert all(data.domain.contains(x) for x in data.inputs)

    def test_quadratic_with_center(self):
        data = make_dataset(DatasetKind.QUADRATIC, 50, seed=0, center=[0.5, -0.5])
        assert data.dim == 2
        np.testing.assert_allclose(data.targets, quadratic_target([0.5, -0.5])(data.inputs))

    def test_same_seed_same_data(self):
        a = make_dataset(DatasetKind.CIRCLE_2D, 64, seed=9)
        b = make_dataset(DatasetKind.CIRCLE_2D, 64, seed=9)
        c = make_dataset(DatasetKind.CIRCLE_2D, 64, seed=10)
        assert np.array_equal(a.inputs, b.inputs)
        assert not np.array_equal(a.inputs, c.inputs)

    def test_frame_columns(self):
        frame = make_dataset(DatasetKind.XOR_2D, 10, seed=0).to_frame()
        assert list(frame.columns) == ["x1", "x2", "label"]

    def test_empty_dataset_is_rejected(self):
        with pytest.raises(ValidationError):
            make_dataset(DatasetKind.QUAD_1D, 0, seed=0)

    def test_quadratic_target_dimension_check(self):
        with pytest.raises(ValidationError):
            quadratic_target([0.0])(np.zeros((3, 2)))


class TestInit:
    def test_scalar_weights_are_standard_normal(self):
        skeleton = ModelSkeleton(eps=1.0, delta=1.0, depth=20000, n_in=1, n_hid=1)
        model = xavier_init(skeleton, seed=0)
        weights = np.array([[layer.W[0, 0], layer.W_tilde[0, 0]] for layer in model.layers]).ravel()
        assert np.var(weights) == pytest.approx(1.0, rel=0.03)
        assert all(layer.b[0] == 0.0 for layer in model.layers)

    def test_xavier_uniform_limits(self):
        skeleton = ModelSkeleton(eps=1.0, delta=1.0, depth=4, n_in=2, n_hid=50, input_kind="tanh")
        model = xavier_init(skeleton, seed=3)
        limit = np.sqrt(6.0 / 100.0)
        W = np.concatenate([layer.W.ravel() for layer in model.layers])
        assert np.max(np.abs(W)) <= limit
        assert np.var(W) == pytest.approx(2.0 / 100.0, rel=0.1)

    def test_frozen_entries_keep_structure(self):
        model = xavier_init(circle_skeleton(), seed=0)
        for layer in model.layers:
            np.testing.assert_array_equal(layer.W_tilde, np.eye(2))
            np.testing.assert_array_equal(layer.b_tilde, np.zeros(2))
        np.testing.assert_array_equal(model.input_map.W_tilde, np.eye(2))

    def test_seeded(self):
        a = xavier_init(circle_skeleton(), seed=5).parameters()
        b = xavier_init(circle_skeleton(), seed=5).parameters()
        assert all(np.array_equal(a[k], b[k]) for k in a)

    def test_is_frozen(self):
        patterns = circle_skeleton().frozen_patterns()
        assert is_frozen("layers.3.W_tilde", patterns)
        assert not is_frozen("layers.3.W", patterns)


class TestAdam:
    def test_first_step_moves_by_learning_rate(self):
        grads = {"w": np.array([0.3, -2.0, 1e3])}
        state, updates = adam_step(AdamState(), grads, lr=0.01)
        assert state.t == 1
        np.testing.assert_allclose(updates["w"], [-0.01, 0.01, -0.01], rtol=1e-6)

    def test_moments_accumulate(self):
        state, _ = adam_step(AdamState(), {"w": np.ones(2)}, lr=0.1)
        state, _ = adam_step(state, {"w": np.ones(2)}, lr=0.1)
        np.testing.assert_allclose(state.m["w"], 0.9 * 0.1 + 0.1)
        assert state.t == 2

    def test_shape_mismatch(self):
        state, _ = adam_step(AdamState(), {"w": np.ones(2)}, lr=0.1)
        with pytest.raises(ValidationError):
            adam_step(state, {"w": np.ones(3)}, lr=0.1)

    def test_minimizes_a_quadratic(self):
        params = {"x": np.array([3.0, -2.0])}
        adam = Adam(lr=0.1)
        for _ in range(500):
            adam.step(params, {"x": 2.0 * params["x"]})
        np.testing.assert_allclose(params["x"], 0.0, atol=0.05)


class TestBatchNorm:
    def test_training_statistics(self, rng):
        bn = BatchNormLayer(3)
        a = rng.normal(2.0, 3.0, size=(64, 3))
        out, _ = bn.normalize(a, training=True)
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=0), 1.0, rtol=1e-4)
        np.testing.assert_allclose(bn.running_mean, 0.1 * a.mean(axis=0))
        assert bn.batches_seen == 1

    def test_eval_without_statistics(self):
        with pytest.raises(InvalidStateError) as exc:
            BatchNormLayer(2).normalize(np.zeros((4, 2)), training=False)
        assert exc.value.error_code == "NO_STATISTICS"

    def test_fold_matches_normalized_forward(self, make_random_model, rng):
        model = make_random_model(n_in=2, n_hid=3, depth=3)
        normalizers = [BatchNormLayer(layer.width, gain=rng.uniform(0.5, 2, 3), shift=rng.uniform(-1, 1, 3))
                       for layer in model.layers]
        X = rng.uniform(-1.0, 1.0, size=(128, 2))
        for _ in range(5):
            forward_batch(model, X, normalizers=normalizers, training=True)
        expected, _ = forward_batch(model, X, normalizers=normalizers, training=False)
        folded = fold_batch_norm(model, normalizers)
        np.testing.assert_allclose(evaluate(folded, X), expected, rtol=1e-12, atol=1e-12)

    def test_fold_needs_statistics(self, make_random_model):
        model = make_random_model(depth=2)
        with pytest.raises(InvalidStateError):
            fold_batch_norm(model, [BatchNormLayer(layer.width) for layer in model.layers])


class TestTrain:
    @pytest.fixture
    def quad_data(self):
        return make_dataset(DatasetKind.QUAD_1D, 64, seed=0)

    def test_deterministic(self, quad_data):
        config = TrainConfig(seed=4, epochs=5, batch_size=16, loss="mse")
        model = xavier_init(quad_skeleton(), seed=4)
        first, record_a = train(model, quad_data, config)
        second, record_b = train(model, quad_data, config)
        assert record_a.losses == record_b.losses
        assert all(np.array_equal(v, second.parameters()[k]) for k, v in first.parameters().items())

    def test_loss_decreases(self, quad_data):
        config = TrainConfig(seed=0, epochs=60, batch_size=16, lr=0.02, loss="mse")
        _, record = train(xavier_init(quad_skeleton(depth=1), seed=0), quad_data, config)
        assert len(record.losses) == 60
        assert record.losses[-1] < record.losses[0]
        assert record.accuracy is None
        assert list(record.to_frame().columns) == ["epoch", "loss"]

    def test_frozen_parameters_unchanged(self, quad_data):
        skeleton = quad_skeleton(residual_form="outer")
        model = xavier_init(skeleton, seed=1)
        trained, _ = train(model, quad_data, TrainConfig(epochs=3, batch_size=16),
                           frozen_patterns=skeleton.frozen_patterns())
        before, after = model.parameters(), trained.parameters()
        for key in before:
            if is_frozen(key, skeleton.frozen_patterns()):
                np.testing.assert_array_equal(before[key], after[key])
        assert not np.array_equal(before["layers.0.W"], after["layers.0.W"])

    def test_batch_norm_run_is_folded(self):
        data = make_dataset(DatasetKind.CIRCLE_2D, 200, seed=0)
        skeleton = circle_skeleton()
        config = TrainConfig(epochs=3, batch_size=50, loss="bce", batch_norm=True, lr=0.01)
        trained, record = train(xavier_init(skeleton, seed=0), data, config,
                                frozen_patterns=skeleton.frozen_patterns())
        assert len(record.accuracies) == 3
        assert 0.0 <= record.accuracy <= 1.0
        assert 0.0 <= record.sign_flip_fraction <= 1.0
        assert np.all(np.isfinite(evaluate(trained, data.inputs)))
        assert list(record.to_frame().columns) == ["epoch", "loss", "accuracy"]

    def test_batch_larger_than_dataset(self, quad_data):
        with pytest.raises(ConfigurationError) as exc:
            train(xavier_init(quad_skeleton(), seed=0), quad_data, TrainConfig(batch_size=65))
        assert exc.value.error_code == "BAD_BATCH_SIZE"

    def test_loss_must_fit_dataset(self, quad_data):
        with pytest.raises(ConfigurationError) as exc:
            train(xavier_init(quad_skeleton(), seed=0), quad_data, TrainConfig(loss="bce"))
        assert exc.value.error_code == "LOSS_MISMATCH"

    def test_non_finite_loss_aborts_with_position(self, quad_data):
        broken = Dataset(inputs=quad_data.inputs, targets=np.full(len(quad_data), np.nan),
                         kind=quad_data.kind, domain=Box.cube(-1.0, 1.0, 1))
        with pytest.raises(NumericalError) as exc:
            train(xavier_init(quad_skeleton(), seed=0), broken, TrainConfig(epochs=2, batch_size=16))
        assert exc.value.error_code == "TRAINING_DIVERGED"
        assert exc.value.details["epoch"] == 1
        assert exc.value.details["batch"] == 1

    def test_zero_epochs_returns_initial_model(self, quad_data):
        model = xavier_init(quad_skeleton(), seed=0)
        trained, record = train(model, quad_data, TrainConfig(epochs=0, batch_norm=True))
        assert record.losses == []
        assert trained.parameters().keys() == model.parameters().keys()

    def test_unknown_config_key(self):
        with pytest.raises(PydanticValidationError):
            TrainConfig.model_validate({"epochs": 1, "momentum": 0.9})
