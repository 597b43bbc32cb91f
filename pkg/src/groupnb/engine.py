"""Model bundles, fallback routing, and the batch classification engine.

A ModelBundle holds one trained model per trainable group plus a routing
table that sends files from untrained groups to the nearest trained one
(upward first). Batches are classified either by a single-threaded
baseline loop or by a pool of worker-process lanes; both paths run the
same pure per-sample kernel in the same order, so their predictions are
bit-identical. Elapsed time covers only the classification kernel, not
parsing or serialization.
"""

from __future__ import annotations

import json
import math
import multiprocessing
import time
from bisect import bisect_left
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Sequence, TextIO

from .corpus import GroupedCorpus, GroupingConfig, Label, SampleRecord
from .classifier import CLASSES, GroupModel, Prediction, predict, train_group
from .errors import (
    BundleValidationError,
    EmptyBundleError,
    IntegrityError,
    InvalidConfigError,
    MeasurementError,
)
from .features import FeatureSet, score_opcodes, select_top_k

_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class BundleMeta:
    k: int
    alpha: float
    seed: int
    created_at: str


@dataclass(frozen=True)
class ModelBundle:
    """Immutable collection of per-group models; safe for concurrent readers."""

    config: GroupingConfig
    models: dict[int, GroupModel]
    trained_ids: tuple[int, ...]
    meta: BundleMeta
    # route() precomputed for every possible group id.
    _route_table: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = self.trained_ids
        table = tuple(_route_ids(ids, g) for g in range(self.config.group_count)) if ids else ()
        object.__setattr__(self, "_route_table", table)


@dataclass(frozen=True)
class Workload:
    """An ordered batch of samples plus the lane count to classify it with."""

    samples: tuple[SampleRecord, ...]
    lanes: int

    def __post_init__(self):
        if not isinstance(self.lanes, int) or isinstance(self.lanes, bool) or self.lanes < 1:
            raise InvalidConfigError(f"lanes must be a positive integer, got {self.lanes!r}")


@dataclass(frozen=True)
class TimedRun:
    """Predictions in input order plus kernel wall time.

    predictions has one slot per input sample; a slot is None when that
    sample failed (its (index, message) pair is in errors).
    """

    predictions: tuple[Prediction | None, ...]
    errors: tuple[tuple[int, str], ...]
    elapsed_ns: int


def _route_ids(ids: Sequence[int], group: int) -> int:
    i = bisect_left(ids, group)
    if i < len(ids):
        return ids[i]
    return ids[-1]


def route(bundle: ModelBundle, group: int) -> int:
    """Effective group for a file in ``group``.

    Returns the group itself when trained, otherwise the smallest trained
    id above it; a file above the highest trained group falls back to
    the largest trained id below it.
    """
    if not bundle.trained_ids:
        raise EmptyBundleError("bundle has no trained models")
    return _route_ids(bundle.trained_ids, group)


def _validate_model(model: GroupModel, config: GroupingConfig, meta: BundleMeta) -> None:
    where = f"model for group {model.group}"
    if not (0 <= model.group < config.group_count):
        raise BundleValidationError(f"{where}: group id outside [0, {config.group_count})")
    n_features = len(model.features.opcodes)
    if n_features == 0:
        raise BundleValidationError(f"{where}: empty feature set")
    if n_features > meta.k:
        raise BundleValidationError(f"{where}: {n_features} features exceeds k={meta.k}")
    if len(set(model.features.opcodes)) != n_features:
        raise BundleValidationError(f"{where}: duplicate features")
    if model.alpha <= 0 or not math.isfinite(model.alpha):
        raise BundleValidationError(f"{where}: alpha must be positive and finite")
    prior_sum = sum(math.exp(model.log_prior[c]) for c in CLASSES)
    if abs(prior_sum - 1.0) > _SUM_TOLERANCE:
        raise BundleValidationError(f"{where}: priors sum to {prior_sum!r}, not 1")
    for c in CLASSES:
        if model.train_counts.get(c, 0) < 1:
            raise BundleValidationError(f"{where}: no {c.value} training samples recorded")
        row = model.log_likelihood[c]
        total = 0.0
        for op in model.features.opcodes:
            value = row[op]
            if not math.isfinite(value):
                raise BundleValidationError(f"{where}: non-finite likelihood for {op!r}")
            total += math.exp(value)
        if abs(total - 1.0) > _SUM_TOLERANCE:
            raise BundleValidationError(
                f"{where}: {c.value} likelihoods sum to {total!r}, not 1"
            )


def build_bundle(
    models: Iterable[GroupModel], config: GroupingConfig, meta: BundleMeta
) -> ModelBundle:
    """Assemble and validate a bundle; trained_ids come out sorted ascending."""
    by_group: dict[int, GroupModel] = {}
    for model in models:
        if model.group in by_group:
            raise IntegrityError(f"duplicate model for group {model.group}")
        _validate_model(model, config, meta)
        by_group[model.group] = model
    ids = tuple(sorted(by_group))
    return ModelBundle(
        config=config,
        models={g: by_group[g] for g in ids},
        trained_ids=ids,
        meta=meta,
    )


def train_bundle(
    train: GroupedCorpus,
    k: int,
    alpha: float = 1.0,
    *,
    seed: int = 0,
    created_at: str | None = None,
) -> ModelBundle:
    """Select features and train a model for every trainable group."""
    from .corpus import trainable_groups

    config = train.config
    models = []
    for g in sorted(trainable_groups(train, config)):
        table = score_opcodes(train.groups[g], group=g)
        features = select_top_k(table, k)
        models.append(train_group(train.groups[g], features, alpha, group=g))
    if created_at is None:
        created_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
    meta = BundleMeta(k=k, alpha=float(alpha), seed=seed, created_at=created_at)
    return build_bundle(models, config, meta)


# --- batch classification --------------------------------------------------


def _oversize_message(size_bytes: int, limit: int) -> str:
    return f"size_bytes {size_bytes} outside [0, {limit})"


def _classify_slice(
    bundle: ModelBundle, samples: Sequence[SampleRecord], start: int, end: int
) -> tuple[list[Prediction | None], list[tuple[int, str]]]:
    """Classify samples[start:end]; error indices are absolute."""
    table = bundle._route_table
    models = bundle.models
    width = bundle.config.group_size_bytes
    limit = bundle.config.max_size_bytes
    predictions: list[Prediction | None] = []
    errors: list[tuple[int, str]] = []
    append = predictions.append
    for i in range(start, end):
        sample = samples[i]
        size = sample.size_bytes
        if 0 <= size < limit:
            append(predict(models[table[size // width]], sample.histogram))
        else:
            append(None)
            errors.append((i, _oversize_message(size, limit)))
    return predictions, errors


def classify_sequential(
    bundle: ModelBundle, workload: Workload, *, warmup: bool = True
) -> TimedRun:
    """Single-threaded baseline; this is the Tc side of the speedup ratio.

    Never parallelized internally. With warmup (the default) one full
    unmeasured pass runs first; only the second pass is timed.
    """
    if not bundle.trained_ids:
        raise EmptyBundleError("bundle has no trained models")
    samples = workload.samples
    n = len(samples)
    if warmup:
        _classify_slice(bundle, samples, 0, n)
    t0 = time.perf_counter_ns()
    predictions, errors = _classify_slice(bundle, samples, 0, n)
    elapsed = time.perf_counter_ns() - t0
    return TimedRun(tuple(predictions), tuple(errors), elapsed)


# Read-only state inherited by fork()ed workers; set just before the pool
# starts and cleared afterwards. Avoids pickling the bundle and batch.
_SHARED: tuple[ModelBundle, Sequence[SampleRecord]] | None = None


def _set_shared(bundle: ModelBundle, samples: Sequence[SampleRecord]) -> None:
    global _SHARED
    _SHARED = (bundle, samples)


def _noop(_: int) -> None:
    return None


def _classify_chunk(
    bounds: tuple[int, int],
) -> tuple[list[Prediction | None], list[tuple[int, str]]]:
    bundle, samples = _SHARED
    return _classify_slice(bundle, samples, bounds[0], bounds[1])


def classify_parallel(
    bundle: ModelBundle, workload: Workload, *, warmup: bool = True
) -> TimedRun:
    """Classify with ``workload.lanes`` worker processes; this is the Tp side.

    The batch is cut into contiguous chunks of ceil(N / lanes) samples,
    one per lane, each classified against the shared read-only bundle.
    Output order is the input order and every prediction (label and
    log-scores) is bit-identical to classify_sequential on the same
    workload. elapsed_ns is the wall time of the parallel region only;
    pool startup and the optional warmup pass are excluded.
    """
    if not bundle.trained_ids:
        raise EmptyBundleError("bundle has no trained models")
    samples = workload.samples
    lanes = workload.lanes
    n = len(samples)
    chunk = -(-n // lanes) if n else 1
    bounds = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]

    global _SHARED
    _SHARED = (bundle, samples)
    try:
        if "fork" in multiprocessing.get_all_start_methods():
            ctx = multiprocessing.get_context("fork")
            pool = ctx.Pool(processes=lanes)
        else:
            # No fork: ship the shared state once per worker instead.
            ctx = multiprocessing.get_context("spawn")
            pool = ctx.Pool(processes=lanes, initializer=_set_shared, initargs=(bundle, samples))
        with pool:
            # Make sure every worker is up before the clock starts.
            pool.map(_noop, range(lanes))
            if warmup and bounds:
                pool.map(_classify_chunk, bounds, chunksize=1)
            t0 = time.perf_counter_ns()
            parts = pool.map(_classify_chunk, bounds, chunksize=1)
            elapsed = time.perf_counter_ns() - t0
    finally:
        _SHARED = None

    predictions: list[Prediction | None] = []
    errors: list[tuple[int, str]] = []
    for chunk_predictions, chunk_errors in parts:
        predictions.extend(chunk_predictions)
        errors.extend(chunk_errors)
    return TimedRun(tuple(predictions), tuple(errors), elapsed)


def speedup(tc_ns: int, tp_ns: int) -> float:
    """Sequential-over-parallel time ratio for the same workload."""
    if tp_ns <= 0:
        raise MeasurementError(f"parallel time must be positive, got {tp_ns}")
    if tc_ns < 0:
        raise MeasurementError(f"sequential time must be non-negative, got {tc_ns}")
    return tc_ns / tp_ns


# --- bundle serialization --------------------------------------------------
#
# Doubles are printed with 17 significant digits, which round-trips IEEE-754
# binary64 exactly; key order is fixed, so serialize -> load -> serialize is
# byte-identical.


def _fmt_float(value: float) -> str:
    return format(float(value), ".17g")


def _fmt_float_map(items: Iterable[tuple[str, float]]) -> str:
    body = ", ".join(f"{json.dumps(key)}: {_fmt_float(value)}" for key, value in items)
    return "{" + body + "}"


def bundle_to_json(bundle: ModelBundle) -> str:
    """Canonical single-document JSON text for a bundle."""
    config = bundle.config
    meta = bundle.meta
    config_json = (
        f'{{"group_size_bytes": {config.group_size_bytes}, '
        f'"max_size_bytes": {config.max_size_bytes}, '
        f'"min_per_class": {config.min_per_class}}}'
    )
    meta_json = (
        f'{{"k": {meta.k}, "alpha": {_fmt_float(meta.alpha)}, '
        f'"seed": {meta.seed}, "created_at": {json.dumps(meta.created_at)}}}'
    )
    model_docs = []
    for g in bundle.trained_ids:
        model = bundle.models[g]
        features = model.features.opcodes
        features_json = "[" + ", ".join(json.dumps(op) for op in features) + "]"
        prior_json = _fmt_float_map((c.value, model.log_prior[c]) for c in CLASSES)
        ll_json = (
            "{"
            + ", ".join(
                f"{json.dumps(c.value)}: "
                + _fmt_float_map((op, model.log_likelihood[c][op]) for op in features)
                for c in CLASSES
            )
            + "}"
        )
        counts_json = (
            "{"
            + ", ".join(f"{json.dumps(c.value)}: {model.train_counts[c]}" for c in CLASSES)
            + "}"
        )
        model_docs.append(
            f'{{"group": {model.group}, "features": {features_json}, '
            f'"log_prior": {prior_json}, "log_likelihood": {ll_json}, '
            f'"alpha": {_fmt_float(model.alpha)}, "train_counts": {counts_json}}}'
        )
    models_json = "[\n" + ",\n".join(model_docs) + "\n]" if model_docs else "[]"
    return f'{{"config": {config_json}, "meta": {meta_json}, "models": {models_json}}}\n'


def save_bundle(bundle: ModelBundle, path) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        fp.write(bundle_to_json(bundle))


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise BundleValidationError(message)


def bundle_from_json(text: str) -> ModelBundle:
    """Parse and re-validate a bundle document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BundleValidationError(f"invalid bundle JSON: {exc.msg}") from None
    _require(isinstance(doc, dict), "bundle must be a JSON object")
    raw_config = doc.get("config")
    raw_meta = doc.get("meta")
    raw_models = doc.get("models")
    _require(isinstance(raw_config, dict), "bundle 'config' must be an object")
    _require(isinstance(raw_meta, dict), "bundle 'meta' must be an object")
    _require(isinstance(raw_models, list), "bundle 'models' must be an array")

    try:
        config = GroupingConfig(
            group_size_bytes=raw_config["group_size_bytes"],
            max_size_bytes=raw_config["max_size_bytes"],
            min_per_class=raw_config["min_per_class"],
        )
        meta = BundleMeta(
            k=raw_meta["k"],
            alpha=float(raw_meta["alpha"]),
            seed=raw_meta["seed"],
            created_at=raw_meta["created_at"],
        )
    except (KeyError, TypeError, ValueError, InvalidConfigError) as exc:
        raise BundleValidationError(f"bad bundle config/meta: {exc}") from None

    models = []
    for position, raw in enumerate(raw_models):
        where = f"models[{position}]"
        _require(isinstance(raw, dict), f"{where} must be an object")
        try:
            group = raw["group"]
            feature_list = raw["features"]
            raw_prior = raw["log_prior"]
            raw_ll = raw["log_likelihood"]
            alpha = float(raw["alpha"])
            raw_counts = raw["train_counts"]
        except (KeyError, TypeError, ValueError) as exc:
            raise BundleValidationError(f"{where}: {exc}") from None
        _require(isinstance(group, int) and not isinstance(group, bool), f"{where}: bad group id")
        _require(
            isinstance(feature_list, list) and all(isinstance(op, str) for op in feature_list),
            f"{where}: 'features' must be an array of strings",
        )
        features = FeatureSet(tuple(feature_list), meta.k)
        log_prior: dict[Label, float] = {}
        log_likelihood: dict[Label, dict[str, float]] = {}
        train_counts: dict[Label, int] = {}
        for c in CLASSES:
            _require(
                isinstance(raw_prior, dict) and c.value in raw_prior,
                f"{where}: log_prior missing {c.value!r}",
            )
            log_prior[c] = float(raw_prior[c.value])
            _require(
                isinstance(raw_ll, dict) and isinstance(raw_ll.get(c.value), dict),
                f"{where}: log_likelihood missing {c.value!r}",
            )
            row = raw_ll[c.value]
            _require(
                set(row) == set(feature_list),
                f"{where}: {c.value} likelihood keys do not match the feature list",
            )
            log_likelihood[c] = {op: float(row[op]) for op in feature_list}
            _require(
                isinstance(raw_counts, dict) and c.value in raw_counts,
                f"{where}: train_counts missing {c.value!r}",
            )
            train_counts[c] = raw_counts[c.value]
        models.append(
            GroupModel(
                group=group,
                features=features,
                log_prior=log_prior,
                log_likelihood=log_likelihood,
                alpha=alpha,
                train_counts=train_counts,
            )
        )
    return build_bundle(models, config, meta)


def load_bundle(path) -> ModelBundle:
    with open(path, "r", encoding="utf-8") as fp:
        return bundle_from_json(fp.read())


def write_predictions(run: TimedRun, samples: Sequence[SampleRecord], sink: TextIO) -> None:
    """Emit one JSONL object per input sample (error entries included)."""
    by_index = dict(run.errors)
    for i, sample in enumerate(samples):
        prediction = run.predictions[i]
        if prediction is None:
            sink.write(json.dumps({"id": sample.id, "error": by_index[i]}) + "\n")
            continue
        scores = prediction.log_posterior
        sink.write(
            f'{{"id": {json.dumps(sample.id)}, '
            f'"label": {json.dumps(prediction.label.value)}, '
            f'"log_posterior": {{"malware": {_fmt_float(scores[Label.MALWARE])}, '
            f'"benign": {_fmt_float(scores[Label.BENIGN])}}}, '
            f'"effective_group": {prediction.effective_group}}}\n'
        )
