import numpy as np
import pytest

import pshapley as ps


@pytest.fixture(scope="session")
def fast_config():
    """Small but convergent trainer config for test-sized data."""
    return ps.TrainConfig(learning_rate=0.3, iterations=120, l2_penalty=1e-4, seed=0)


@pytest.fixture(scope="session")
def small_split(fast_config):
    """Well-separated 2-D synthetic split shared by read-only tests."""
    data, _ = ps.generate_synthetic(16, 2, 3.0, 0.0, seed=11)
    return ps.split_train_valid(data, 0.25, seed=5)


def make_model(weights, bias, threshold=0.5) -> ps.LogisticModel:
    return ps.LogisticModel(
        weights=np.asarray(weights, dtype=float),
        bias=float(bias),
        classification_threshold=threshold,
    )


def confidence_validation(true_class_probs, labels=None) -> tuple[ps.LogisticModel, ps.Dataset]:
    """A 1-D logistic model plus a validation set engineered so the model's
    true-class confidences equal ``true_class_probs`` exactly (up to float
    rounding of the logit construction). Labels default to all 1."""
    probs = np.asarray(true_class_probs, dtype=float)
    labels = np.ones(len(probs), dtype=int) if labels is None else np.asarray(labels)
    # class-1 probability the model must emit at each point
    p1 = np.where(labels == 1, probs, 1.0 - probs)
    logits = np.log(p1 / (1.0 - p1))
    model = make_model([1.0], 0.0)
    validation = ps.Dataset(logits.reshape(-1, 1), labels, np.arange(len(probs)))
    return model, validation
