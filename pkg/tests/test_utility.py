import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import pshapley as ps
from conftest import confidence_validation

RELU = ps.ActivationKind("relu")
SQUARE = ps.ActivationKind("square")
MISH = ps.ActivationKind("mish")
SWISH = ps.ActivationKind("swish")

# reference values computed once with 40-digit mpmath and frozen
MISH_AT = {0.0: 0.0, 0.5: 0.37524521130489510, 0.9: 0.76120592895251527, 1.0: 0.86509838826731035}
SWISH_AT = {0.0: 0.0, 0.5: 0.31122966560092728, 0.9: 0.63985455236250357, 1.0: 0.73105857863000488}
MISH_D_AT = {0.0: 0.6, 0.5: 0.88642437535772726, 0.9: 1.0279182005317524}
SWISH_D_AT = {0.0: 0.5, 0.5: 0.73996118730265181, 0.9: 0.89589977923304106, 1.0: 0.92767051187148673}


class TestActivationEval:
    def test_square_half(self):
        assert ps.activation_eval(SQUARE, 0.5) == 0.25

    def test_zero_and_negative_cases(self):
        assert ps.activation_eval(MISH, 0.0) == 0.0
        assert ps.activation_eval(SWISH, 0.0) == 0.0
        assert ps.activation_eval(RELU, -0.3) == 0.0

    def test_swish_at_one(self):
        assert ps.activation_eval(SWISH, 1.0) == pytest.approx(0.7310585786300049, abs=1e-15)

    @pytest.mark.parametrize("x,expected", sorted(MISH_AT.items()))
    def test_mish_reference_values(self, x, expected):
        assert ps.activation_eval(MISH, x) == pytest.approx(expected, abs=1e-14)

    @pytest.mark.parametrize("x,expected", sorted(SWISH_AT.items()))
    def test_swish_reference_values(self, x, expected):
        assert ps.activation_eval(SWISH, x) == pytest.approx(expected, abs=1e-14)

    @pytest.mark.parametrize("kind", [RELU, SQUARE, MISH, SWISH])
    @pytest.mark.parametrize("x", [-1e4, -50.0, 50.0, 1e4])
    def test_overflow_safe_for_large_inputs(self, kind, x):
        with np.errstate(over="raise", invalid="raise"):
            value = ps.activation_eval(kind, x)
        assert np.isfinite(value)

    def test_vectorized(self):
        xs = np.linspace(0, 1, 7)
        out = ps.activation_eval(SQUARE, xs)
        np.testing.assert_allclose(out, xs**2)

    def test_unknown_variant_rejected(self):
        with pytest.raises(ValueError, match="unknown activation"):
            ps.ActivationKind("gelu")

    def test_swish_beta_validated(self):
        with pytest.raises(ValueError, match="swish_beta"):
            ps.ActivationKind("swish", swish_beta=0.0)

    @given(st.floats(0.0, 1.0))
    @settings(max_examples=100)
    def test_unit_interval_bounds(self, x):
        assert ps.activation_eval(RELU, x) == x
        assert ps.activation_eval(SQUARE, x) == x * x
        assert -1e-12 <= ps.activation_eval(SWISH, x) <= x + 1e-12
        assert -1e-12 <= ps.activation_eval(MISH, x) <= x + 1e-12


class TestActivationDerivative:
    def test_square(self):
        assert ps.activation_derivative(SQUARE, 0.9) == pytest.approx(1.8, abs=1e-15)

    def test_swish_at_zero(self):
        assert ps.activation_derivative(SWISH, 0.0) == 0.5

    def test_mish_at_zero(self):
        # omega = 15, delta = 5 -> 15/25
        assert ps.activation_derivative(MISH, 0.0) == pytest.approx(0.6, abs=1e-15)

    @pytest.mark.parametrize("x,expected", sorted(MISH_D_AT.items()))
    def test_mish_closed_form(self, x, expected):
        assert ps.activation_derivative(MISH, x) == pytest.approx(expected, abs=1e-14)

    @pytest.mark.parametrize("x,expected", sorted(SWISH_D_AT.items()))
    def test_swish_closed_form(self, x, expected):
        assert ps.activation_derivative(SWISH, x) == pytest.approx(expected, abs=1e-14)

    def test_relu_sign_split(self):
        assert ps.activation_derivative(RELU, -0.5) == 0.0
        assert ps.activation_derivative(RELU, 0.5) == 1.0

    def test_relu_undefined_at_zero(self):
        with pytest.raises(ValueError, match="undefined"):
            ps.activation_derivative(RELU, 0.0)

    @pytest.mark.parametrize("kind", [RELU, SQUARE, MISH, SWISH, ps.ActivationKind("swish", swish_beta=2.5)])
    def test_matches_finite_differences_on_grid(self, kind):
        xs = np.linspace(0.01, 0.99, 50)
        step = 1e-6
        fd = (ps.activation_eval(kind, xs + step) - ps.activation_eval(kind, xs - step)) / (
            2 * step
        )
        np.testing.assert_allclose(ps.activation_derivative(kind, xs), fd, rtol=1e-5)

    def test_mish_derivative_stable_for_large_x(self):
        with np.errstate(over="raise", invalid="raise"):
            hi = ps.activation_derivative(MISH, 500.0)
            lo = ps.activation_derivative(MISH, -500.0)
        assert hi == pytest.approx(1.0, abs=1e-12)
        assert lo == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("kind", [SQUARE, MISH, SWISH])
    def test_convex_on_unit_interval(self, kind):
        h = 1e-4
        xs = np.linspace(h, 1 - h, 200)
        second = (
            ps.activation_eval(kind, xs + h)
            - 2 * ps.activation_eval(kind, xs)
            + ps.activation_eval(kind, xs - h)
        ) / h**2
        assert (second >= -1e-9).all()


class TestUtilities:
    def test_motivating_scenario_accuracy_ties(self):
        model_a, val_a = confidence_validation([0.9, 0.3])
        model_b, val_b = confidence_validation([0.6, 0.3])
        assert ps.accuracy_utility(model_a, val_a) == 0.5
        assert ps.accuracy_utility(model_b, val_b) == 0.5

    def test_motivating_scenario_probability_separates(self):
        model_a, val_a = confidence_validation([0.9, 0.3])
        model_b, val_b = confidence_validation([0.6, 0.3])
        assert ps.probability_utility(model_a, val_a, RELU) == pytest.approx(0.45, abs=1e-12)
        assert ps.probability_utility(model_b, val_b, RELU) == pytest.approx(0.30, abs=1e-12)

    def test_motivating_scenario_square(self):
        model_a, val_a = confidence_validation([0.9, 0.3])
        assert ps.probability_utility(model_a, val_a, SQUARE) == pytest.approx(0.405, abs=1e-12)

    def test_perfect_model_scores_one(self):
        model, val = confidence_validation([0.99, 0.99], labels=[1, 0])
        assert ps.accuracy_utility(model, val) == 1.0

    def test_class_zero_confidence_used(self):
        # label 0 with class-1 probability 0.2 -> true-class confidence 0.8
        model, val = confidence_validation([0.8], labels=[0])
        assert ps.probability_utility(model, val, RELU) == pytest.approx(0.8, abs=1e-12)

    @given(
        probs=st.lists(st.floats(0.01, 0.99), min_size=1, max_size=12),
        labels_seed=st.integers(0, 1000),
    )
    @settings(max_examples=50, deadline=None)
    def test_probability_below_accuracy(self, probs, labels_seed):
        rng = np.random.default_rng(labels_seed)
        labels = rng.integers(0, 2, len(probs))
        model, val = confidence_validation(probs, labels=labels)
        acc = ps.accuracy_utility(model, val)
        for kind in (RELU, SQUARE, MISH, SWISH):
            pu = ps.probability_utility(model, val, kind)
            assert -1e-12 <= pu <= acc + 1e-12 <= 1 + 1e-12

    @pytest.mark.parametrize("kind", [RELU, SQUARE, MISH, SWISH])
    def test_monotone_in_correct_confidence(self, kind):
        base = [0.7, 0.9, 0.3]
        bumped = [0.75, 0.9, 0.3]  # raise a correct point's confidence
        model_a, val_a = confidence_validation(base)
        model_b, val_b = confidence_validation(bumped)
        assert ps.probability_utility(model_b, val_b, kind) >= ps.probability_utility(
            model_a, val_a, kind
        )

    def test_empty_validation_rejected(self, small_split, fast_config):
        model = ps.train(small_split.train, fast_config)
        with pytest.raises(ValueError):
            ps.accuracy_utility(model, small_split.validation.subset_rows([]))


class TestEvaluator:
    def test_empty_coalition_is_exactly_zero(self, small_split, fast_config):
        ev = ps.UtilityEvaluator(fast_config, small_split.validation, ps.UtilityKind.accuracy())
        assert ev.evaluate_coalition([], small_split.train) == 0.0
        assert ev.evaluate_coalition(frozenset(), small_split.train) == 0.0

    def test_full_coalition_cached(self, small_split, fast_config):
        ev = ps.UtilityEvaluator(
            fast_config, small_split.validation, ps.UtilityKind.probability(SQUARE)
        )
        ids = small_split.train.point_ids
        first = ev.evaluate_coalition(ids, small_split.train)
        trainings = ev.stats["trainings"]
        second = ev.evaluate_coalition(ids, small_split.train)
        assert first == second
        assert ev.stats["trainings"] == trainings == 1
        assert ev.stats["utility_hits"] == 1

    def test_single_class_coalition_finite(self, small_split, fast_config):
        ev = ps.UtilityEvaluator(
            fast_config, small_split.validation, ps.UtilityKind.probability(MISH)
        )
        ones = small_split.train.point_ids[small_split.train.labels == 1]
        value = ev.evaluate_coalition(ones, small_split.train)
        assert 0.0 <= value <= 1.0

    def test_unknown_id_rejected(self, small_split, fast_config):
        ev = ps.UtilityEvaluator(fast_config, small_split.validation, ps.UtilityKind.accuracy())
        with pytest.raises(KeyError, match="not in the training set"):
            ev.evaluate_coalition([10**9], small_split.train)

    def test_order_and_type_of_coalition_irrelevant(self, small_split, fast_config):
        ev = ps.UtilityEvaluator(fast_config, small_split.validation, ps.UtilityKind.accuracy())
        ids = [int(i) for i in small_split.train.point_ids[:5]]
        a = ev.evaluate_coalition(ids, small_split.train)
        b = ev.evaluate_coalition(frozenset(reversed(ids)), small_split.train)
        assert a == b
        assert ev.stats["trainings"] == 1

    def test_shared_model_cache_across_kinds(self, small_split, fast_config):
        cache = ps.CoalitionModelCache(fast_config, small_split.train, small_split.validation)
        evaluators = [
            ps.UtilityEvaluator(
                fast_config, small_split.validation, kind, model_cache=cache
            )
            for kind in (
                ps.UtilityKind.accuracy(),
                ps.UtilityKind.probability(SQUARE),
                ps.UtilityKind.probability(MISH),
            )
        ]
        ids = small_split.train.point_ids[:6]
        for ev in evaluators:
            ev.evaluate_coalition(ids, small_split.train)
        assert cache.trainings == 1

    def test_concurrent_same_coalition_trains_once(self, small_split, fast_config):
        ev = ps.UtilityEvaluator(
            fast_config, small_split.validation, ps.UtilityKind.probability(SWISH)
        )
        ids = small_split.train.point_ids
        barrier = threading.Barrier(8)

        def job():
            barrier.wait()
            return ev.evaluate_coalition(ids, small_split.train)

        with ThreadPoolExecutor(max_workers=8) as pool:
            values = [f.result() for f in [pool.submit(job) for _ in range(8)]]
        assert len(set(values)) == 1
        assert ev.stats["trainings"] == 1

    def test_concurrent_distinct_coalitions_consistent(self, small_split, fast_config):
        ev = ps.UtilityEvaluator(fast_config, small_split.validation, ps.UtilityKind.accuracy())
        ids = small_split.train.point_ids

        def job(k):
            return ev.evaluate_coalition(ids[: k + 1], small_split.train)

        with ThreadPoolExecutor(max_workers=6) as pool:
            concurrent = list(pool.map(job, range(12)))
        fresh = ps.UtilityEvaluator(fast_config, small_split.validation, ps.UtilityKind.accuracy())
        sequential = [fresh.evaluate_coalition(ids[: k + 1], small_split.train) for k in range(12)]
        assert concurrent == sequential

    def test_mismatched_train_data_rejected(self, small_split, fast_config):
        ev = ps.UtilityEvaluator(fast_config, small_split.validation, ps.UtilityKind.accuracy())
        ev.evaluate_coalition(small_split.train.point_ids[:3], small_split.train)
        other = small_split.train.subset_rows(range(5))
        with pytest.raises(ValueError, match="different training set"):
            ev.evaluate_coalition(other.point_ids[:2], other)


class TestCoalitionCache:
    def test_lru_eviction(self):
        cache = ps.CoalitionCache(max_entries=2)
        calls = []

        def make(v):
            def compute():
                calls.append(v)
                return v

            return compute

        cache.get_or_compute(b"a", make(1))
        cache.get_or_compute(b"b", make(2))
        cache.get_or_compute(b"a", make(1))  # refresh a
        cache.get_or_compute(b"c", make(3))  # evicts b
        cache.get_or_compute(b"b", make(2))  # recompute
        assert calls == [1, 2, 3, 2]

    def test_compute_error_propagates_and_clears(self):
        cache = ps.CoalitionCache()

        def boom():
            raise RuntimeError("nope")

        with pytest.raises(RuntimeError):
            cache.get_or_compute(b"k", boom)
        assert cache.get_or_compute(b"k", lambda: 7) == 7
