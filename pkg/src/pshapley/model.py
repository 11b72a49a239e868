"""Deterministic logistic-regression trainer and probabilistic predictions.

Training is full-batch gradient descent on the L2-regularized mean negative
log-likelihood, always from zero-initialized parameters and for a fixed number
of steps. That makes a trained model (and hence any coalition utility built on
it) a pure function of the training rows and the config: rerunning with
identical inputs yields bit-identical parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .data import Dataset

__all__ = [
    "TrainConfig",
    "LogisticModel",
    "train",
    "sigmoid",
    "logistic_loss",
    "logistic_loss_gradients",
]

# predict_proba stays strictly inside (0, 1): clamp to the widest open interval
# float64 can express around the sigmoid's saturation points.
_P_LO = float(np.finfo(np.float64).tiny)
_P_HI = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the from-scratch logistic trainer.

    ``seed`` is carried for run metadata; the trainer itself is seed-free
    because parameters start at zero.
    """

    learning_rate: float = 0.1
    iterations: int = 500
    l2_penalty: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if not (np.isfinite(self.l2_penalty) and self.l2_penalty >= 0):
            raise ValueError(f"l2_penalty must be >= 0, got {self.l2_penalty}")

    def to_json_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "iterations": self.iterations,
            "l2_penalty": self.l2_penalty,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "TrainConfig":
        return cls(
            learning_rate=obj["learning_rate"],
            iterations=int(obj["iterations"]),
            l2_penalty=obj["l2_penalty"],
            seed=int(obj["seed"]),
        )


def sigmoid(z):
    """Overflow-safe logistic function; accepts scalars or arrays."""
    z_arr = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z_arr)
    pos = z_arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z_arr[pos]))
    ez = np.exp(z_arr[~pos])
    out[~pos] = ez / (1.0 + ez)
    if np.isscalar(z) or z_arr.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True, eq=False)
class LogisticModel:
    """Trained classifier: p(class 1 | x) = sigmoid(weights . x + bias)."""

    weights: np.ndarray
    bias: float
    classification_threshold: float = 0.5

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise ValueError(f"weights must be 1-D, got shape {w.shape}")
        if not (np.isfinite(w).all() and np.isfinite(self.bias)):
            raise ValueError("model parameters must be finite")
        if not 0.0 < self.classification_threshold < 1.0:
            raise ValueError(
                f"classification_threshold must be in (0, 1), "
                f"got {self.classification_threshold}"
            )
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def d(self) -> int:
        return self.weights.shape[0]

    def _check_vector(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.d:
            raise ValueError(
                f"expected a length-{self.d} feature vector, got shape {x.shape}"
            )
        return x

    def predict_proba(self, features) -> float:
        """Probability of class 1 for a single feature vector, in (0, 1)."""
        x = self._check_vector(features)
        z = float(x @ self.weights) + self.bias
        return float(min(max(sigmoid(z), _P_LO), _P_HI))

    def predict_label(self, features) -> int:
        """1 if predict_proba >= threshold else 0; ties go to class 1."""
        return 1 if self.predict_proba(features) >= self.classification_threshold else 0

    def predict_proba_batch(self, features: np.ndarray) -> np.ndarray:
        """Vectorized predict_proba over the rows of an (k, d) matrix."""
        X = np.asarray(features, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise ValueError(f"expected a (k, {self.d}) matrix, got shape {X.shape}")
        return np.clip(sigmoid(X @ self.weights + self.bias), _P_LO, _P_HI)

    def predict_labels_batch(self, features: np.ndarray) -> np.ndarray:
        return (
            self.predict_proba_batch(features) >= self.classification_threshold
        ).astype(np.int64)

    def to_json_dict(self) -> dict:
        """Debugging serialization; not a cross-run reproducibility surface."""
        return {
            "weights": [float(w) for w in self.weights],
            "bias": self.bias,
            "threshold": self.classification_threshold,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "LogisticModel":
        return cls(
            weights=np.asarray(obj["weights"], dtype=np.float64),
            bias=float(obj["bias"]),
            classification_threshold=float(obj["threshold"]),
        )


@numba.njit(cache=True)
def _fit(X, y, lr, iterations, l2):  # pragma: no cover - exercised via train()
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    gw = np.empty(d)
    inv_n = 1.0 / n
    for _ in range(iterations):
        for j in range(d):
            gw[j] = 0.0
        gb = 0.0
        for i in range(n):
            z = b
            for j in range(d):
                z += X[i, j] * w[j]
            if z >= 0.0:
                p = 1.0 / (1.0 + math.exp(-z))
            else:
                ez = math.exp(z)
                p = ez / (1.0 + ez)
            r = p - y[i]
            for j in range(d):
                gw[j] += r * X[i, j]
            gb += r
        for j in range(d):
            w[j] -= lr * (gw[j] * inv_n + l2 * w[j])
        b -= lr * gb * inv_n
        check = b
        for j in range(d):
            check += w[j]
        if not math.isfinite(check):
            return w, b, False
    return w, b, True


def train(coalition_data: Dataset, config: TrainConfig) -> LogisticModel:
    """Fit a logistic model on the coalition's rows.

    Exactly ``config.iterations`` full-batch gradient steps from zero init;
    single-class coalitions are trained as-is. Raises if the parameters leave
    the finite range (learning rate too large for the data scale).
    """
    X = np.ascontiguousarray(coalition_data.features)
    y = coalition_data.labels.astype(np.float64)
    w, b, ok = _fit(
        X, y, float(config.learning_rate), int(config.iterations), float(config.l2_penalty)
    )
    if not ok:
        raise ValueError(
            "training produced non-finite parameters; learning_rate is too "
            "large for this data"
        )
    return LogisticModel(weights=w, bias=float(b))


def logistic_loss(weights, bias, X, y, l2_penalty: float) -> float:
    """Training objective: mean NLL + (l2/2)*||w||^2 (bias unpenalized)."""
    w = np.asarray(weights, dtype=np.float64)
    z = X @ w + bias
    nll = np.logaddexp(0.0, z) - y * z
    return float(nll.mean() + 0.5 * l2_penalty * (w @ w))


def logistic_loss_gradients(weights, bias, X, y, l2_penalty: float):
    """Analytic gradient of :func:`logistic_loss` w.r.t. (weights, bias)."""
    w = np.asarray(weights, dtype=np.float64)
    r = sigmoid(X @ w + bias) - y
    grad_w = X.T @ r / len(y) + l2_penalty * w
    grad_b = float(r.mean())
    return grad_w, grad_b
