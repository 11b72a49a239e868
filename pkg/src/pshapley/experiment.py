"""End-to-end runs: value a training set, remove high-value points, report.

A run is driven by a :class:`RunConfig` and writes a fixed directory layout:

    out/
      config.json           config echo + derived seeds and split fingerprint
      flipped_ids.json      JSON array of flipped ids (synthetic sources only)
      values/<method>.json  one ValuationResult per requested method
      curves/<method>.csv   removal curve per method
      summary.csv           rows = methods, columns = WAD/WBD/WCD (+ max marks)
      summary.json          same table as JSON

Everything downstream of the config is deterministic: one master seed spawns
the synthetic-data, split, and Monte Carlo child seeds, and reruns with an
identical config produce byte-identical values, curves, and summaries. All
Monte Carlo methods in a suite share the same permutation stream and one
coalition model cache, so a coalition trained for one method is reused by the
others.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import (
    DataSplit,
    Dataset,
    generate_synthetic,
    load_csv,
    split_fingerprint,
    split_train_valid,
)
from .metrics import (
    RemovalCurve,
    RoundMetrics,
    brier_from_probs,
    cross_entropy_from_probs,
    curve_from_csv,
    curve_to_csv,
    wad,
    wbd,
    wcd,
)
from .model import TrainConfig
from .utility import (
    ActivationKind,
    CoalitionModelCache,
    UtilityEvaluator,
    UtilityKind,
)
from .valuation import (
    ValuationResult,
    beta_shapley,
    exact_shapley,
    leave_one_out,
    tmc_shapley,
)

__all__ = [
    "SyntheticSpec",
    "MethodSpec",
    "parse_method",
    "RunConfig",
    "RunContext",
    "materialize",
    "run_valuation_suite",
    "run_removal_experiment",
    "emit_report",
    "run_pipeline",
    "method_filename",
]


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the built-in two-cluster synthetic dataset."""

    n_per_class: int
    d: int = 2
    class_separation: float = 2.0
    noise_fraction: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "n_per_class": self.n_per_class,
            "d": self.d,
            "class_separation": self.class_separation,
            "noise_fraction": self.noise_fraction,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SyntheticSpec":
        return cls(
            n_per_class=int(obj["n_per_class"]),
            d=int(obj["d"]),
            class_separation=float(obj["class_separation"]),
            noise_fraction=float(obj["noise_fraction"]),
        )


@dataclass(frozen=True)
class MethodSpec:
    """One requested valuation method: estimator family + utility kind."""

    tag: str
    family: str  # exact | tmc | loo | beta
    utility: UtilityKind
    alpha: float | None = None
    beta: float | None = None


def _format_num(x: float) -> str:
    return str(int(x)) if float(x) == int(x) else repr(float(x))


def parse_method(text: str, *, swish_beta: float = 1.0) -> MethodSpec:
    """Parse a CLI method tag.

    Supported forms:
      loo                    leave-one-out (accuracy utility)
      tmc                    truncated MC Shapley, accuracy utility
      pshapley:ACT           truncated MC Shapley, probability utility with
                             activation ACT in {relu, square, mish, swish}
      beta:A:B               truncated MC Beta(A, B) semivalue, accuracy utility
      exact | exact:ACT      exact enumeration (accuracy or probability)
    """
    parts = [p.strip() for p in str(text).strip().lower().split(":")]
    head, rest = parts[0], parts[1:]

    def activation(name: str) -> ActivationKind:
        return ActivationKind(name, swish_beta=swish_beta)

    if head == "loo":
        if rest:
            raise ValueError(f"loo takes no arguments, got {text!r}")
        return MethodSpec(tag="loo", family="loo", utility=UtilityKind.accuracy())
    if head == "tmc":
        if rest:
            raise ValueError(f"tmc takes no arguments, got {text!r}")
        return MethodSpec(tag="tmc", family="tmc", utility=UtilityKind.accuracy())
    if head == "pshapley":
        if len(rest) != 1:
            raise ValueError(
                f"pshapley needs an activation, e.g. pshapley:square; got {text!r}"
            )
        act = activation(rest[0])
        return MethodSpec(
            tag=f"pshapley:{act.variant}",
            family="tmc",
            utility=UtilityKind.probability(act),
        )
    if head == "beta":
        if len(rest) != 2:
            raise ValueError(f"beta needs alpha and beta, e.g. beta:1:16; got {text!r}")
        alpha, beta = float(rest[0]), float(rest[1])
        if alpha <= 0 or beta <= 0:
            raise ValueError(f"beta parameters must be > 0, got {text!r}")
        return MethodSpec(
            tag=f"beta:{_format_num(alpha)}:{_format_num(beta)}",
            family="beta",
            utility=UtilityKind.accuracy(),
            alpha=alpha,
            beta=beta,
        )
    if head == "exact":
        if not rest:
            return MethodSpec(tag="exact", family="exact", utility=UtilityKind.accuracy())
        if len(rest) == 1:
            act = activation(rest[0])
            return MethodSpec(
                tag=f"exact:{act.variant}",
                family="exact",
                utility=UtilityKind.probability(act),
            )
        raise ValueError(f"exact takes at most one activation, got {text!r}")
    raise ValueError(
        f"unknown method {text!r}; expected loo, tmc, pshapley:ACT, beta:A:B, "
        "or exact[:ACT]"
    )


def method_filename(tag: str) -> str:
    return tag.replace(":", "_")


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run byte-for-byte."""

    methods: tuple[MethodSpec, ...]
    out_dir: str
    csv_path: str | None = None
    label_column: str = "label"
    synthetic: SyntheticSpec | None = None
    valid_fraction: float = 0.25
    seed: int = 0
    standardize: bool = False
    train_config: TrainConfig = field(default_factory=TrainConfig)
    permutations: int = 500
    epsilon: float = 0.001
    removal_count: int | None = None
    oracle_cap: int = 16
    cache_entries: int = 131072

    def __post_init__(self):
        if not self.methods:
            raise ValueError("at least one method must be requested")
        if (self.csv_path is None) == (self.synthetic is None):
            raise ValueError("exactly one of csv_path or synthetic must be given")
        if not 0.0 < self.valid_fraction < 1.0:
            raise ValueError(f"valid_fraction must be in (0, 1), got {self.valid_fraction}")
        if self.permutations < 1:
            raise ValueError(f"permutations must be >= 1, got {self.permutations}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.removal_count is not None and self.removal_count < 1:
            raise ValueError(f"removal_count must be >= 1, got {self.removal_count}")
        tags = [m.tag for m in self.methods]
        if len(set(tags)) != len(tags):
            raise ValueError(f"duplicate method tags: {tags}")

    def to_json_dict(self) -> dict:
        return {
            "methods": [m.tag for m in self.methods],
            "swish_beta": self._swish_beta(),
            "out_dir": self.out_dir,
            "csv_path": self.csv_path,
            "label_column": self.label_column,
            "synthetic": None if self.synthetic is None else self.synthetic.to_json_dict(),
            "valid_fraction": self.valid_fraction,
            "seed": self.seed,
            "standardize": self.standardize,
            "train_config": self.train_config.to_json_dict(),
            "permutations": self.permutations,
            "epsilon": self.epsilon,
            "removal_count": self.removal_count,
            "oracle_cap": self.oracle_cap,
            "cache_entries": self.cache_entries,
        }

    def _swish_beta(self) -> float:
        for m in self.methods:
            act = m.utility.activation
            if act is not None and act.variant == "swish":
                return act.swish_beta
        return 1.0

    @classmethod
    def from_json_dict(cls, obj: dict) -> "RunConfig":
        swish_beta = float(obj.get("swish_beta", 1.0))
        return cls(
            methods=tuple(parse_method(t, swish_beta=swish_beta) for t in obj["methods"]),
            out_dir=obj["out_dir"],
            csv_path=obj.get("csv_path"),
            label_column=obj.get("label_column", "label"),
            synthetic=(
                None
                if obj.get("synthetic") is None
                else SyntheticSpec.from_json_dict(obj["synthetic"])
            ),
            valid_fraction=float(obj["valid_fraction"]),
            seed=int(obj["seed"]),
            standardize=bool(obj.get("standardize", False)),
            train_config=TrainConfig.from_json_dict(obj["train_config"]),
            permutations=int(obj["permutations"]),
            epsilon=float(obj["epsilon"]),
            removal_count=obj.get("removal_count"),
            oracle_cap=int(obj.get("oracle_cap", 16)),
            cache_entries=int(obj.get("cache_entries", 131072)),
        )


@dataclass
class RunContext:
    """Materialized inputs shared by every method of one run."""

    config: RunConfig
    split: DataSplit
    flipped_ids: np.ndarray | None
    synth_seed: int
    split_seed: int
    mc_seed: int
    fingerprint: str
    model_cache: CoalitionModelCache = field(init=False)

    def __post_init__(self):
        self.model_cache = CoalitionModelCache(
            self.config.train_config,
            self.split.train,
            self.split.validation,
            max_entries=self.config.cache_entries,
        )

    def evaluator(self, kind: UtilityKind) -> UtilityEvaluator:
        return UtilityEvaluator(
            self.config.train_config,
            self.split.validation,
            kind,
            model_cache=self.model_cache,
            max_cache_entries=self.config.cache_entries,
        )

    def derived_json(self) -> dict:
        return {
            "synth_seed": self.synth_seed,
            "split_seed": self.split_seed,
            "mc_seed": self.mc_seed,
            "split_fingerprint": self.fingerprint,
            "n_train": self.split.train.n,
            "n_valid": self.split.validation.n,
            "flipped_count": None if self.flipped_ids is None else int(self.flipped_ids.size),
        }


def _child_seeds(master_seed: int) -> tuple[int, int, int]:
    state = np.random.SeedSequence(master_seed).generate_state(3)
    return int(state[0]), int(state[1]), int(state[2])


def materialize(config: RunConfig) -> RunContext:
    """Load or synthesize the dataset and produce the deterministic split."""
    synth_seed, split_seed, mc_seed = _child_seeds(config.seed)
    flipped = None
    if config.synthetic is not None:
        spec = config.synthetic
        data, flipped = generate_synthetic(
            spec.n_per_class,
            spec.d,
            spec.class_separation,
            spec.noise_fraction,
            synth_seed,
        )
    else:
        data = load_csv(config.csv_path, config.label_column)
    split = split_train_valid(
        data, config.valid_fraction, split_seed, standardize=config.standardize
    )
    if config.removal_count is not None and config.removal_count > split.train.n - 1:
        raise ValueError(
            f"removal_count={config.removal_count} would empty the training set "
            f"(n_train={split.train.n}); at least one point must remain"
        )
    return RunContext(
        config=config,
        split=split,
        flipped_ids=flipped,
        synth_seed=synth_seed,
        split_seed=split_seed,
        mc_seed=mc_seed,
        fingerprint=split_fingerprint(split),
    )


def _run_method(ctx: RunContext, spec: MethodSpec) -> ValuationResult:
    cfg = ctx.config
    evaluator = ctx.evaluator(spec.utility)
    meta = {
        "method": spec.tag,
        "split_fingerprint": ctx.fingerprint,
        "master_seed": cfg.seed,
        "train_config": cfg.train_config.to_json_dict(),
    }
    if spec.family == "exact":
        return exact_shapley(
            evaluator,
            ctx.split.train,
            oracle_cap=cfg.oracle_cap,
            method=spec.tag,
            metadata=meta,
        )
    if spec.family == "loo":
        return leave_one_out(evaluator, ctx.split.train, method=spec.tag, metadata=meta)
    if spec.family == "tmc":
        return tmc_shapley(
            evaluator,
            ctx.split.train,
            cfg.permutations,
            cfg.epsilon,
            ctx.mc_seed,
            method=spec.tag,
            metadata=meta,
        )
    if spec.family == "beta":
        return beta_shapley(
            evaluator,
            ctx.split.train,
            spec.alpha,
            spec.beta,
            cfg.permutations,
            cfg.epsilon,
            ctx.mc_seed,
            method=spec.tag,
            metadata=meta,
        )
    raise ValueError(f"unknown method family {spec.family!r}")


def _write_json(path: Path, obj: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _persist_config(ctx: RunContext, out: Path) -> None:
    _write_json(
        out / "config.json",
        {"config": ctx.config.to_json_dict(), "derived": ctx.derived_json()},
    )
    if ctx.flipped_ids is not None:
        with open(out / "flipped_ids.json", "w", encoding="utf-8") as fh:
            json.dump([int(i) for i in ctx.flipped_ids], fh)
            fh.write("\n")


def run_valuation_suite(
    config: RunConfig, *, context: RunContext | None = None
) -> dict[str, ValuationResult]:
    """Value the training set with every requested method and persist results.

    All Monte Carlo methods see the same permutation stream (one mc seed), and
    all methods share the split and the coalition model cache. Results are
    computed fully before anything is written, so failures leave no partial
    values/ directory behind.
    """
    ctx = context if context is not None else materialize(config)
    results = {spec.tag: _run_method(ctx, spec) for spec in config.methods}
    out = Path(config.out_dir)
    (out / "values").mkdir(parents=True, exist_ok=True)
    _persist_config(ctx, out)
    for tag, result in results.items():
        result.save_json(out / "values" / f"{method_filename(tag)}.json")
    return results


def _removal_curve(ctx: RunContext, values: ValuationResult, removal_count: int) -> RemovalCurve:
    train = ctx.split.train
    validation = ctx.split.validation
    train_ids = set(int(i) for i in train.point_ids)
    value_ids = set(values.values.keys())
    if value_ids != train_ids:
        missing = sorted(train_ids - value_ids)[:5]
        extra = sorted(value_ids - train_ids)[:5]
        raise ValueError(
            f"values do not cover the training set (missing {missing}, extra {extra})"
        )
    if removal_count > train.n - 1:
        raise ValueError(
            f"removal_count={removal_count} would empty the training set (n={train.n})"
        )
    order = values.ranked_ids()[:removal_count]
    y = validation.labels
    threshold = 0.5
    rounds = []
    remaining = list(int(i) for i in train.point_ids)
    removed: set[int] = set()
    for i in range(removal_count + 1):
        if i > 0:
            removed.add(order[i - 1])
            remaining = [pid for pid in remaining if pid not in removed]
        probs = ctx.model_cache.probabilities(np.asarray(remaining, dtype=np.int64))
        accuracy = float(((probs >= threshold) == (y == 1)).mean())
        rounds.append(
            RoundMetrics(
                accuracy=accuracy,
                brier=brier_from_probs(y, probs),
                cross_entropy=cross_entropy_from_probs(y, probs),
            )
        )
    return RemovalCurve(
        rounds=rounds, removal_order=order, validation_fingerprint=ctx.fingerprint
    )


def run_removal_experiment(
    config: RunConfig,
    values: ValuationResult,
    *,
    context: RunContext | None = None,
    persist: bool = True,
) -> RemovalCurve:
    """Remove points in descending value order, retraining and scoring each round.

    Ties in value are broken by ascending point id. The curve is written to
    curves/<method>.csv under the run directory unless ``persist=False``.
    """
    if config.removal_count is None:
        raise ValueError("config.removal_count is required for removal experiments")
    ctx = context if context is not None else materialize(config)
    curve = _removal_curve(ctx, values, config.removal_count)
    if persist:
        out = Path(config.out_dir) / "curves"
        out.mkdir(parents=True, exist_ok=True)
        curve_to_csv(curve, out / f"{method_filename(values.method)}.csv")
    return curve


def emit_report(curves: dict[str, RemovalCurve], out_dir) -> dict[str, str]:
    """Summary table over methods: WAD/WBD/WCD with per-column maxima marked."""
    if not curves:
        raise ValueError("no curves to report on")
    fingerprints = {
        c.validation_fingerprint
        for c in curves.values()
        if c.validation_fingerprint is not None
    }
    if len(fingerprints) > 1:
        raise ValueError(
            f"curves were computed on different validation sets: {sorted(fingerprints)}"
        )
    table = {
        tag: {"wad": wad(curve), "wbd": wbd(curve), "wcd": wcd(curve)}
        for tag, curve in curves.items()
    }
    best = {
        metric: max(v[metric] for v in table.values()) for metric in ("wad", "wbd", "wcd")
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "summary.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("method,wad,wbd,wcd,wad_is_max,wbd_is_max,wcd_is_max\n")
        for tag, row in table.items():
            marks = ",".join(
                str(row[m] == best[m]).lower() for m in ("wad", "wbd", "wcd")
            )
            fh.write(
                f"{tag},{row['wad']!r},{row['wbd']!r},{row['wcd']!r},{marks}\n"
            )
    json_path = out / "summary.json"
    _write_json(
        json_path,
        {
            "methods": table,
            "max": {
                m: sorted(t for t, row in table.items() if row[m] == best[m])
                for m in ("wad", "wbd", "wcd")
            },
        },
    )
    return {"summary_csv": str(csv_path), "summary_json": str(json_path)}


def run_pipeline(config: RunConfig) -> dict:
    """value -> remove -> report, sharing one materialized context and cache."""
    if config.removal_count is None:
        raise ValueError("config.removal_count is required for the full pipeline")
    ctx = materialize(config)
    results = run_valuation_suite(config, context=ctx)
    curves = {
        tag: run_removal_experiment(config, result, context=ctx)
        for tag, result in results.items()
    }
    report = emit_report(curves, config.out_dir)
    return {"values": results, "curves": curves, "report": report}


def load_run_config(out_dir) -> RunConfig:
    """Reload the config echo of a previous run directory."""
    path = Path(out_dir) / "config.json"
    if not path.exists():
        raise FileNotFoundError(f"no config.json in {out_dir}; run `value` first")
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    cfg = RunConfig.from_json_dict(obj["config"])
    return replace(cfg, out_dir=str(out_dir))


def load_values(out_dir, tags=None) -> dict[str, ValuationResult]:
    """Load persisted ValuationResults for the given (or all configured) tags."""
    config = load_run_config(out_dir)
    wanted = [m.tag for m in config.methods] if tags is None else list(tags)
    results = {}
    for tag in wanted:
        path = Path(out_dir) / "values" / f"{method_filename(tag)}.json"
        if not path.exists():
            raise FileNotFoundError(f"no stored values for method {tag!r} at {path}")
        results[tag] = ValuationResult.load_json(path)
    return results


def load_curves(out_dir, tags=None) -> dict[str, RemovalCurve]:
    """Load persisted removal curves for the given (or all configured) tags."""
    config = load_run_config(out_dir)
    wanted = [m.tag for m in config.methods] if tags is None else list(tags)
    curves = {}
    for tag in wanted:
        path = Path(out_dir) / "curves" / f"{method_filename(tag)}.csv"
        if not path.exists():
            raise FileNotFoundError(f"no stored curve for method {tag!r} at {path}")
        curves[tag] = curve_from_csv(path)
    return curves
