"""Per-point valuation methods.

All methods consume an evaluator exposing ``evaluate_coalition(coalition,
train_data) -> float`` (the production :class:`~pshapley.utility.UtilityEvaluator`
or any constructed-game stand-in) and return a :class:`ValuationResult` keyed
by training point ids.

Monte Carlo methods share one permutation-scan engine: a master seed spawns an
independent child seed per permutation, permutations are Fisher-Yates shuffles,
and aggregation sums contributions in fixed (permutation, position) order, so
results are bit-reproducible for a given seed regardless of scheduling. The
scan truncates once the running prefix utility is within ``epsilon`` of the
full-set utility: every remaining marginal in that permutation is recorded as
0 without further training (``epsilon = 0`` disables truncation).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from math import comb, lgamma

import numpy as np

from .data import Dataset

__all__ = [
    "ValuationResult",
    "exact_shapley",
    "tmc_shapley",
    "leave_one_out",
    "beta_shapley",
    "beta_cardinality_weights",
]


@dataclass
class ValuationResult:
    """Per-point values plus estimator diagnostics.

    ``per_point_stderr`` is populated by Monte Carlo methods only;
    ``permutations_used`` is 0 for exact and leave-one-out methods.
    ``truncation_rate`` is the fraction of marginal evaluations skipped.
    """

    method: str
    values: dict[int, float]
    permutations_used: int = 0
    per_point_stderr: dict[int, float] = field(default_factory=dict)
    truncation_rate: float = 0.0
    run_metadata: dict = field(default_factory=dict)

    def ranked_ids(self) -> list[int]:
        """Point ids in descending value order; ties broken by ascending id."""
        return [
            pid for pid, _ in sorted(self.values.items(), key=lambda kv: (-kv[1], kv[0]))
        ]

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "values": {str(k): float(v) for k, v in self.values.items()},
            "stderr": {str(k): float(v) for k, v in self.per_point_stderr.items()},
            "permutations_used": int(self.permutations_used),
            "truncation_rate": float(self.truncation_rate),
            "metadata": self.run_metadata,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ValuationResult":
        return cls(
            method=obj["method"],
            values={int(k): float(v) for k, v in obj["values"].items()},
            per_point_stderr={int(k): float(v) for k, v in obj.get("stderr", {}).items()},
            permutations_used=int(obj.get("permutations_used", 0)),
            truncation_rate=float(obj.get("truncation_rate", 0.0)),
            run_metadata=obj.get("metadata", {}),
        )

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def load_json(cls, path) -> "ValuationResult":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def _base_metadata(evaluator, train_data: Dataset) -> dict:
    meta = {"n_train": train_data.n}
    kind = getattr(evaluator, "kind", None)
    if kind is not None:
        meta["utility"] = kind.tag
        if kind.activation is not None:
            meta["swish_beta"] = kind.activation.swish_beta
    validation = getattr(evaluator, "validation", None)
    if validation is not None:
        meta["n_valid"] = validation.n
    return meta


def exact_shapley(
    evaluator,
    train_data: Dataset,
    *,
    oracle_cap: int = 16,
    method: str = "exact",
    metadata: dict | None = None,
) -> ValuationResult:
    """Shapley values by full subset enumeration (2^n utility evaluations).

    value_i = (1/n) * sum over S not containing i of
              binom(n-1, |S|)^{-1} * (U(S + i) - U(S))

    Works for any utility kind the evaluator carries; intended as the oracle
    for small n (guarded by ``oracle_cap``).
    """
    n = train_data.n
    if n > oracle_cap:
        raise ValueError(
            f"exact enumeration needs 2^n utility evaluations; n={n} exceeds "
            f"oracle_cap={oracle_cap}"
        )
    ids = train_data.point_ids
    total = 1 << n
    utilities = np.empty(total)
    members = [np.flatnonzero([(mask >> i) & 1 for i in range(n)]) for mask in range(total)]
    for mask in range(total):
        utilities[mask] = evaluator.evaluate_coalition(ids[members[mask]], train_data)
    weights = np.array([1.0 / (n * comb(n - 1, s)) for s in range(n)])
    values = np.zeros(n)
    for i in range(n):
        bit = 1 << i
        for mask in range(total):
            if mask & bit:
                continue
            size = mask.bit_count()
            values[i] += weights[size] * (utilities[mask | bit] - utilities[mask])
    meta = _base_metadata(evaluator, train_data)
    meta.update(metadata or {})
    return ValuationResult(
        method=method,
        values={int(ids[i]): float(values[i]) for i in range(n)},
        run_metadata=meta,
    )


def _spawned_rngs(seed: int, m: int):
    root = np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in root.spawn(m)]


def _permutation_scan(
    evaluator,
    train_data: Dataset,
    m: int,
    epsilon: float,
    seed: int,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Scan m seeded permutations; collect per-(permutation, player) marginals.

    Returns (marginals, positions, skipped): marginals[t, i] is player i's
    marginal in permutation t, positions[t, i] its 1-based scan position, and
    skipped the number of truncated marginal evaluations.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    n = train_data.n
    ids = train_data.point_ids
    full_utility = evaluator.evaluate_coalition(ids, train_data)
    empty_utility = evaluator.evaluate_coalition(ids[:0], train_data)
    marginals = np.zeros((m, n))
    positions = np.empty((m, n), dtype=np.int64)
    skipped = 0
    for t, rng in enumerate(_spawned_rngs(seed, m)):
        perm = rng.permutation(n)
        positions[t, perm] = np.arange(1, n + 1)
        previous = empty_utility
        for j in range(1, n + 1):
            if abs(full_utility - previous) < epsilon:
                skipped += n - (j - 1)
                break
            current = evaluator.evaluate_coalition(ids[perm[:j]], train_data)
            marginals[t, perm[j - 1]] = current - previous
            previous = current
    return marginals, positions, skipped


def _mc_result(
    method: str,
    ids: np.ndarray,
    samples: np.ndarray,
    skipped: int,
    meta: dict,
) -> ValuationResult:
    m, n = samples.shape
    values = samples.mean(axis=0)
    if m > 1:
        stderr = samples.std(axis=0, ddof=1) / math.sqrt(m)
    else:
        stderr = np.zeros(n)
    return ValuationResult(
        method=method,
        values={int(ids[i]): float(values[i]) for i in range(n)},
        permutations_used=m,
        per_point_stderr={int(ids[i]): float(stderr[i]) for i in range(n)},
        truncation_rate=skipped / (m * n),
        run_metadata=meta,
    )


def tmc_shapley(
    evaluator,
    train_data: Dataset,
    m: int,
    epsilon: float,
    seed: int,
    *,
    method: str = "tmc",
    metadata: dict | None = None,
) -> ValuationResult:
    """Truncated Monte Carlo Shapley estimate under the evaluator's utility.

    With an accuracy evaluator this is the classic TMC-Shapley estimator; with
    a probability evaluator it estimates the probability-wise value. Each
    permutation contributes one marginal per player; the estimate is the mean
    over permutations and ``per_point_stderr`` its sample standard error.
    """
    marginals, _, skipped = _permutation_scan(evaluator, train_data, m, epsilon, seed)
    meta = _base_metadata(evaluator, train_data)
    meta.update({"m": m, "epsilon": epsilon, "seed": seed})
    meta.update(metadata or {})
    return _mc_result(method, train_data.point_ids, marginals, skipped, meta)


def leave_one_out(
    evaluator,
    train_data: Dataset,
    *,
    method: str = "loo",
    metadata: dict | None = None,
) -> ValuationResult:
    """value_i = U(N) - U(N without i); n + 1 utility evaluations."""
    n = train_data.n
    if n < 2:
        raise ValueError(f"leave-one-out needs n >= 2, got n={n}")
    ids = train_data.point_ids
    full_utility = evaluator.evaluate_coalition(ids, train_data)
    values = {}
    for i in range(n):
        rest = np.delete(ids, i)
        values[int(ids[i])] = float(
            full_utility - evaluator.evaluate_coalition(rest, train_data)
        )
    meta = _base_metadata(evaluator, train_data)
    meta.update(metadata or {})
    return ValuationResult(method=method, values=values, run_metadata=meta)


def beta_cardinality_weights(n: int, alpha: float, beta: float) -> np.ndarray:
    """Semivalue weight w_j for scan positions j = 1..n.

    w_j = n * binom(n-1, j-1) * B(j + alpha - 1, n - j + beta) / B(alpha, beta)

    computed in log space. alpha = beta = 1 gives uniform weights (the plain
    Shapley value); large beta shifts weight onto small coalitions, e.g.
    (alpha, beta) = (1, 16) weights a cardinality-0 marginal 16x a
    cardinality-1 marginal when n = 2. The weights average to 1: sum_j w_j = n.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if alpha <= 0 or beta <= 0:
        raise ValueError(f"alpha and beta must be > 0, got {alpha}, {beta}")
    j = np.arange(1, n + 1, dtype=np.float64)
    log_binom = lgamma(n) - np.array([lgamma(v) for v in j]) - np.array(
        [lgamma(n - v + 1) for v in j]
    )
    log_beta_num = (
        np.array([lgamma(v + alpha - 1) for v in j])
        + np.array([lgamma(n - v + beta) for v in j])
        - lgamma(n - 1 + alpha + beta)
    )
    log_beta_den = lgamma(alpha) + lgamma(beta) - lgamma(alpha + beta)
    return np.exp(math.log(n) + log_binom + log_beta_num - log_beta_den)


def beta_shapley(
    evaluator,
    train_data: Dataset,
    alpha: float,
    beta: float,
    m: int,
    epsilon: float,
    seed: int,
    *,
    method: str = "beta",
    metadata: dict | None = None,
) -> ValuationResult:
    """Monte Carlo Beta(alpha, beta) semivalue from the shared permutation scan.

    Each scanned marginal is reweighted by the cardinality weight of its scan
    position before averaging over permutations; under a uniform permutation
    the estimator is unbiased for the semivalue, and alpha = beta = 1 recovers
    :func:`tmc_shapley` exactly (weight 1 everywhere). Truncation fires in the
    same scan positions as TMC under the same seed and utility.
    """
    marginals, positions, skipped = _permutation_scan(
        evaluator, train_data, m, epsilon, seed
    )
    weights = beta_cardinality_weights(train_data.n, alpha, beta)
    samples = marginals * weights[positions - 1]
    meta = _base_metadata(evaluator, train_data)
    meta.update({"m": m, "epsilon": epsilon, "seed": seed, "alpha": alpha, "beta": beta})
    meta.update(metadata or {})
    return _mc_result(method, train_data.point_ids, samples, skipped, meta)
