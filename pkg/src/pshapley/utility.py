"""Coalition utilities for data valuation.

Two utility families score the model trained on a coalition against a fixed
validation set:

* accuracy — fraction of validation points predicted correctly;
* probability — mean activation-calibrated true-class confidence over the
  correctly predicted validation points. With ReLU the calibration is the
  identity on [0, 1], so this reduces to the plain confidence average.

The activation calibrators (ReLU, Square, Mish, Swish) all have nonnegative
second derivative on [0, 1], so confidence gains near 1.0 count more than
equal-sized gains near 0.5.

The empty coalition has utility exactly 0; nonempty coalitions are trained
once and cached. The expensive object (the trained model's validation
probabilities) is cached per coalition id-set and can be shared by evaluators
with different utility kinds, since training dominates the cost.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .model import LogisticModel, TrainConfig, sigmoid, train

__all__ = [
    "ACTIVATION_VARIANTS",
    "ActivationKind",
    "UtilityKind",
    "activation_eval",
    "activation_derivative",
    "accuracy_utility",
    "probability_utility",
    "CoalitionCache",
    "CoalitionModelCache",
    "UtilityEvaluator",
]

ACTIVATION_VARIANTS = ("relu", "square", "mish", "swish")


@dataclass(frozen=True)
class ActivationKind:
    """Confidence calibrator: one of relu | square | mish | swish.

    ``swish_beta`` is Swish's slope parameter; it is fixed per run (default 1)
    and ignored by the other variants.
    """

    variant: str
    swish_beta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "variant", str(self.variant).lower())
        if self.variant not in ACTIVATION_VARIANTS:
            raise ValueError(
                f"unknown activation {self.variant!r}; choose from {ACTIVATION_VARIANTS}"
            )
        if not (np.isfinite(self.swish_beta) and self.swish_beta > 0):
            raise ValueError(f"swish_beta must be > 0, got {self.swish_beta}")


@dataclass(frozen=True)
class UtilityKind:
    """Which score a coalition's trained model earns on the validation set."""

    kind: str
    activation: ActivationKind | None = None

    def __post_init__(self):
        if self.kind not in ("accuracy", "probability"):
            raise ValueError(f"kind must be 'accuracy' or 'probability', got {self.kind!r}")
        if self.kind == "probability" and self.activation is None:
            raise ValueError("probability utility requires an activation")

    @classmethod
    def accuracy(cls) -> "UtilityKind":
        return cls(kind="accuracy")

    @classmethod
    def probability(cls, activation: ActivationKind) -> "UtilityKind":
        return cls(kind="probability", activation=activation)

    @property
    def tag(self) -> str:
        if self.kind == "accuracy":
            return "accuracy"
        return f"probability:{self.activation.variant}"


def _as_float_array(x):
    arr = np.asarray(x, dtype=np.float64)
    scalar = np.isscalar(x) or arr.ndim == 0
    return np.atleast_1d(arr), scalar


def activation_eval(kind: ActivationKind, x):
    """Evaluate the calibrator at x (scalar or array); safe for large |x|.

    relu:   max(0, x)
    square: x^2
    mish:   x * tanh(softplus(x))
    swish:  x * sigmoid(beta * x)
    """
    arr, scalar = _as_float_array(x)
    v = kind.variant
    if v == "relu":
        out = np.maximum(arr, 0.0)
    elif v == "square":
        out = arr * arr
    elif v == "mish":
        out = arr * np.tanh(np.logaddexp(0.0, arr))
    else:
        out = arr * sigmoid(kind.swish_beta * arr)
    return float(out[0]) if scalar else out


def _mish_derivative(arr: np.ndarray) -> np.ndarray:
    # Closed form e^x * omega / delta^2 with
    #   omega = 4(x+1) + 4e^{2x} + e^{3x} + (4x+6)e^x
    #   delta = 2e^x + e^{2x} + 2
    # evaluated in two branches so exponentials never exceed 1.
    out = np.empty_like(arr)
    neg = arr < 0
    xn = arr[neg]
    e1 = np.exp(xn)
    e2 = np.exp(2.0 * xn)
    e3 = np.exp(3.0 * xn)
    omega = 4.0 * (xn + 1.0) + 4.0 * e2 + e3 + (4.0 * xn + 6.0) * e1
    delta = 2.0 * e1 + e2 + 2.0
    out[neg] = omega * e1 / (delta * delta)
    xp = arr[~neg]
    t1 = np.exp(-xp)
    t2 = np.exp(-2.0 * xp)
    t3 = np.exp(-3.0 * xp)
    num = 4.0 * (xp + 1.0) * t3 + 4.0 * t1 + 1.0 + (4.0 * xp + 6.0) * t2
    den = 2.0 * t1 + 1.0 + 2.0 * t2
    out[~neg] = num / (den * den)
    return out


def activation_derivative(kind: ActivationKind, x):
    """Analytic first derivative of :func:`activation_eval`.

    ReLU's derivative is undefined at 0 and raises there; the other variants
    are differentiable everywhere.
    """
    arr, scalar = _as_float_array(x)
    v = kind.variant
    if v == "relu":
        if (arr == 0.0).any():
            raise ValueError("relu derivative is undefined at x = 0")
        out = (arr > 0).astype(np.float64)
    elif v == "square":
        out = 2.0 * arr
    elif v == "mish":
        out = _mish_derivative(arr)
    else:
        b = kind.swish_beta
        sw = arr * sigmoid(b * arr)
        out = b * sw + (1.0 - b * sw) * sigmoid(b * arr)
    return float(out[0]) if scalar else out


def _utility_from_probs(
    probs: np.ndarray,
    labels: np.ndarray,
    kind: UtilityKind,
    threshold: float,
) -> float:
    predicted = probs >= threshold
    correct = predicted == (labels == 1)
    if kind.kind == "accuracy":
        return float(correct.mean())
    confidence = np.where(labels == 1, probs, 1.0 - probs)
    return float(np.mean(activation_eval(kind.activation, confidence) * correct))


def accuracy_utility(model: LogisticModel, validation: Dataset) -> float:
    """Fraction of validation points whose predicted label matches the truth."""
    if validation.n < 1:
        raise ValueError("validation set must be nonempty")
    probs = model.predict_proba_batch(validation.features)
    return _utility_from_probs(
        probs, validation.labels, UtilityKind.accuracy(), model.classification_threshold
    )


def probability_utility(
    model: LogisticModel, validation: Dataset, activation: ActivationKind
) -> float:
    """Mean calibrated true-class confidence over correctly predicted points."""
    if validation.n < 1:
        raise ValueError("validation set must be nonempty")
    probs = model.predict_proba_batch(validation.features)
    return _utility_from_probs(
        probs,
        validation.labels,
        UtilityKind.probability(activation),
        model.classification_threshold,
    )


class _Pending:
    __slots__ = ("event", "value", "error")

    def __init__(self):
        self.event = threading.Event()
        self.value = None
        self.error = None


class CoalitionCache:
    """Bounded LRU map with atomic get-or-compute.

    A key being computed by one thread is never recomputed by a concurrent
    caller; waiters block until the owner finishes (or re-raise its error).
    """

    def __init__(self, max_entries: int = 131072):
        if max_entries < 1:
            raise ValueError("max_entries must be >= 1")
        self.max_entries = int(max_entries)
        self._lock = threading.Lock()
        self._entries: OrderedDict = OrderedDict()
        self._pending: dict = {}
        self._hits = 0
        self._misses = 0

    def get_or_compute(self, key, compute):
        with self._lock:
            if key in self._entries:
                self._entries.move_to_end(key)
                self._hits += 1
                return self._entries[key]
            pending = self._pending.get(key)
            if pending is None:
                pending = _Pending()
                self._pending[key] = pending
                owner = True
                self._misses += 1
            else:
                owner = False
        if not owner:
            pending.event.wait()
            if pending.error is not None:
                raise pending.error
            with self._lock:
                self._hits += 1
            return pending.value
        try:
            value = compute()
        except BaseException as exc:
            with self._lock:
                self._pending.pop(key, None)
            pending.error = exc
            pending.event.set()
            raise
        with self._lock:
            self._entries[key] = value
            self._entries.move_to_end(key)
            while len(self._entries) > self.max_entries:
                self._entries.popitem(last=False)
            self._pending.pop(key, None)
        pending.value = value
        pending.event.set()
        return value

    @property
    def hits(self) -> int:
        return self._hits

    @property
    def misses(self) -> int:
        return self._misses

    def __len__(self) -> int:
        return len(self._entries)


class CoalitionModelCache:
    """Train-once store: coalition id-set -> validation class-1 probabilities.

    Bound to one (train_data, validation, train_config) triple. Classifier
    training dominates every valuation cost, so this single shared cache is
    what makes exhaustive enumeration and multi-method suites feasible.
    """

    def __init__(
        self,
        train_config: TrainConfig,
        train_data: Dataset,
        validation: Dataset,
        max_entries: int = 131072,
    ):
        if train_data.d != validation.d:
            raise ValueError("train and validation dimensionality differ")
        self.train_config = train_config
        self.train_data = train_data
        self.validation = validation
        order = np.argsort(train_data.point_ids, kind="stable")
        self._sorted_ids = train_data.point_ids[order]
        self._order = order
        self._cache = CoalitionCache(max_entries)

    def resolve(self, coalition) -> tuple[np.ndarray, np.ndarray]:
        """Canonicalize a coalition: (sorted unique ids, matching row indices)."""
        if isinstance(coalition, (set, frozenset)):
            coalition = list(coalition)
        ids = np.unique(np.asarray(coalition, dtype=np.int64))
        if ids.size == 0:
            return ids, ids
        pos = np.searchsorted(self._sorted_ids, ids)
        bad = (pos >= self._sorted_ids.size) | (
            self._sorted_ids[np.minimum(pos, self._sorted_ids.size - 1)] != ids
        )
        if bad.any():
            raise KeyError(
                f"coalition contains ids not in the training set: {ids[bad][:5].tolist()}"
            )
        return ids, self._order[pos]

    def probabilities(self, coalition) -> np.ndarray:
        """Validation probabilities of the model trained on the coalition."""
        ids, rows = self.resolve(coalition)
        if ids.size == 0:
            raise ValueError("cannot train on an empty coalition")
        key = ids.tobytes()
        return self._cache.get_or_compute(key, lambda: self._train_and_predict(rows))

    def _train_and_predict(self, rows: np.ndarray) -> np.ndarray:
        model = train(self.train_data.subset_rows(rows), self.train_config)
        probs = model.predict_proba_batch(self.validation.features)
        probs.setflags(write=False)
        return probs

    @property
    def trainings(self) -> int:
        return self._cache.misses

    @property
    def hits(self) -> int:
        return self._cache.hits


class UtilityEvaluator:
    """Maps a coalition of training ids to a utility in [0, 1].

    Pure function of (coalition, train_config, validation, kind): results are
    cached by coalition id-set, the empty coalition scores exactly 0, and
    concurrent evaluation of the same coalition trains only once. Pass a
    shared :class:`CoalitionModelCache` to let evaluators with different
    utility kinds reuse each other's trained models.
    """

    def __init__(
        self,
        train_config: TrainConfig,
        validation: Dataset,
        kind: UtilityKind,
        *,
        model_cache: CoalitionModelCache | None = None,
        max_cache_entries: int = 131072,
        classification_threshold: float = 0.5,
    ):
        self.train_config = train_config
        self.validation = validation
        self.kind = kind
        self.classification_threshold = classification_threshold
        if model_cache is not None:
            if model_cache.validation is not validation:
                raise ValueError("shared model cache is bound to a different validation set")
            if model_cache.train_config != train_config:
                raise ValueError("shared model cache is bound to a different train config")
        self._model_cache = model_cache
        self._max_cache_entries = max_cache_entries
        self._values = CoalitionCache(max_cache_entries)
        self._bind_lock = threading.Lock()

    def _cache_for(self, train_data: Dataset) -> CoalitionModelCache:
        with self._bind_lock:
            if self._model_cache is None:
                self._model_cache = CoalitionModelCache(
                    self.train_config,
                    train_data,
                    self.validation,
                    self._max_cache_entries,
                )
            elif self._model_cache.train_data is not train_data:
                raise ValueError(
                    "evaluator is bound to a different training set; "
                    "create one evaluator per training set"
                )
            return self._model_cache

    def evaluate_coalition(self, coalition, train_data: Dataset) -> float:
        """Utility of the model trained on the coalition; 0 for the empty set."""
        cache = self._cache_for(train_data)
        ids, _ = cache.resolve(coalition)
        if ids.size == 0:
            return 0.0
        key = ids.tobytes()
        return self._values.get_or_compute(
            key,
            lambda: _utility_from_probs(
                cache.probabilities(ids),
                self.validation.labels,
                self.kind,
                self.classification_threshold,
            ),
        )

    @property
    def model_cache(self) -> CoalitionModelCache | None:
        return self._model_cache

    @property
    def stats(self) -> dict:
        out = {"utility_hits": self._values.hits, "utility_misses": self._values.misses}
        if self._model_cache is not None:
            out["trainings"] = self._model_cache.trainings
        return out
