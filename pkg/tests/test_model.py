import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import pshapley as ps
from conftest import make_model


class TestSigmoidAndProba:
    def test_zero_weights_give_half(self):
        model = make_model([0.0, 0.0], 0.0)
        assert model.predict_proba([1.0, 2.0]) == 0.5

    def test_saturation_stays_open_interval(self):
        model = make_model([1.0], 0.0)
        hi = model.predict_proba([1000.0])
        lo = model.predict_proba([-1000.0])
        assert 1.0 - 1e-12 < hi < 1.0
        assert 0.0 < lo < 1e-12

    def test_log3_bias(self):
        model = make_model([0.0], math.log(3))
        assert model.predict_proba([0.0]) == pytest.approx(0.75, abs=1e-15)

    @given(st.floats(-700, 700))
    @settings(max_examples=100)
    def test_symmetry_property(self, z):
        model = make_model([1.0], 0.0)
        neg = make_model([-1.0], 0.0)
        total = model.predict_proba([z]) + neg.predict_proba([z])
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_dimension_mismatch(self):
        model = make_model([1.0, 2.0], 0.0)
        with pytest.raises(ValueError, match="length-2"):
            model.predict_proba([1.0])
        with pytest.raises(ValueError):
            model.predict_proba_batch(np.ones((3, 3)))

    def test_batch_matches_single(self):
        rng = np.random.default_rng(0)
        model = make_model(rng.standard_normal(4), 0.3)
        X = rng.standard_normal((10, 4))
        batch = model.predict_proba_batch(X)
        singles = [model.predict_proba(x) for x in X]
        # batch and single-row BLAS reductions may differ in the last ulp
        np.testing.assert_allclose(batch, singles, rtol=1e-15, atol=0)


class TestPredictLabel:
    def test_confident_correct(self):
        model, validation = _scenario([0.9])
        assert model.predict_label(validation.features[0]) == 1

    def test_low_confidence_misclassifies(self):
        model, validation = _scenario([0.3])
        # true label 1 but confidence 0.3 -> predicted 0
        assert model.predict_label(validation.features[0]) == 0

    def test_tie_goes_to_class_one(self):
        model = make_model([0.0], 0.0)
        assert model.predict_proba([123.0]) == 0.5
        assert model.predict_label([123.0]) == 1


def _scenario(true_probs):
    from conftest import confidence_validation

    return confidence_validation(true_probs)


class TestTrain:
    def test_separable_data_reaches_full_accuracy(self):
        data, _ = ps.generate_synthetic(2, 2, 4.0, 0.0, seed=3)
        config = ps.TrainConfig(learning_rate=0.1, iterations=500)
        model = ps.train(data, config)
        labels = model.predict_labels_batch(data.features)
        assert np.array_equal(labels, data.labels)

    def test_single_class_coalition_drives_toward_class(self):
        data = ps.Dataset(np.random.default_rng(0).standard_normal((5, 2)), [1] * 5, np.arange(5))
        model = ps.train(data, ps.TrainConfig(learning_rate=0.5, iterations=300))
        assert (model.predict_proba_batch(data.features) > 0.5).all()

    def test_bit_identical_reruns(self, fast_config):
        data, _ = ps.generate_synthetic(10, 3, 2.0, 0.1, seed=7)
        a = ps.train(data, fast_config)
        b = ps.train(data, fast_config)
        assert np.array_equal(a.weights, b.weights) and a.bias == b.bias

    def test_divergence_raises(self):
        data, _ = ps.generate_synthetic(10, 2, 2.0, 0.0, seed=1)
        wild = ps.Dataset(data.features * 1e4, data.labels, data.point_ids)
        with pytest.raises(ValueError, match="learning_rate"):
            ps.train(wild, ps.TrainConfig(learning_rate=1e12, iterations=200))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((20, 3))
        y = rng.integers(0, 2, 20).astype(float)
        l2 = 0.01
        for trial in range(3):
            w = rng.standard_normal(3)
            b = float(rng.standard_normal())
            grad_w, grad_b = ps.logistic_loss_gradients(w, b, X, y, l2)
            step = 1e-6
            for j in range(3):
                e = np.zeros(3)
                e[j] = step
                fd = (
                    ps.logistic_loss(w + e, b, X, y, l2)
                    - ps.logistic_loss(w - e, b, X, y, l2)
                ) / (2 * step)
                assert fd == pytest.approx(grad_w[j], rel=1e-4)
            fd_b = (
                ps.logistic_loss(w, b + step, X, y, l2)
                - ps.logistic_loss(w, b - step, X, y, l2)
            ) / (2 * step)
            assert fd_b == pytest.approx(grad_b, rel=1e-4)

    def test_loss_monotone_on_standardized_data(self):
        data, _ = ps.generate_synthetic(40, 3, 1.5, 0.1, seed=2)
        split = ps.split_train_valid(data, 0.2, seed=0, standardize=True)
        X, y = split.train.features, split.train.labels.astype(float)
        l2 = 1e-4
        losses = []
        for k in range(1, 60):
            model = ps.train(split.train, ps.TrainConfig(learning_rate=0.1, iterations=k, l2_penalty=l2))
            losses.append(ps.logistic_loss(model.weights, model.bias, X, y, l2))
        diffs = np.diff(losses)
        assert (diffs <= 1e-15).all()


class TestSerialization:
    def test_json_round_trip(self):
        model = make_model([0.5, -2.0], 1.25, threshold=0.4)
        back = ps.LogisticModel.from_json_dict(model.to_json_dict())
        assert np.array_equal(back.weights, model.weights)
        assert back.bias == model.bias
        assert back.classification_threshold == model.classification_threshold


class TestTrainConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"learning_rate": 0.0},
            {"learning_rate": -1.0},
            {"iterations": 0},
            {"l2_penalty": -0.1},
        ],
    )
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(ValueError):
            ps.TrainConfig(**kwargs)
