"""Group-wise opcode-frequency malware classification.

Executables are bucketed into fixed-width file-size groups; each group
gets its own top-k opcode feature set and multinomial Naive Bayes
model, and batches are classified either sequentially or across
worker-process lanes with bit-identical results.
"""

from .bench import (
    BenchConfig,
    BenchReport,
    BenchRow,
    emit_csv,
    make_batches,
    parse_csv,
    run_bench,
    train_bundles,
)
from .classifier import (
    GroupModel,
    Prediction,
    log_posterior,
    normalized_posterior,
    predict,
    train_group,
)
from .corpus import (
    GroupedCorpus,
    GroupingConfig,
    Label,
    OpcodeHistogram,
    SampleRecord,
    SplitResult,
    assign_group,
    parse_corpus,
    partition_by_group,
    serialize_sample,
    split_train_test,
    tokenize_disassembly,
    trainable_groups,
)
from .engine import (
    BundleMeta,
    ModelBundle,
    TimedRun,
    Workload,
    build_bundle,
    bundle_from_json,
    bundle_to_json,
    classify_parallel,
    classify_sequential,
    load_bundle,
    route,
    save_bundle,
    speedup,
    train_bundle,
    write_predictions,
)
from .errors import (
    BundleValidationError,
    EmptyBundleError,
    GroupNBError,
    InsufficientClassError,
    IntegrityError,
    InvalidConfigError,
    MeasurementError,
    ParseError,
    SizeRangeError,
)
from .features import (
    ClassFrequency,
    FeatureSet,
    ScoreTable,
    class_frequency,
    score_opcodes,
    select_top_k,
)
from .synth import SyntheticSpec, class_distributions, generate_synthetic

__all__ = [
    "BenchConfig",
    "BenchReport",
    "BenchRow",
    "BundleMeta",
    "BundleValidationError",
    "ClassFrequency",
    "EmptyBundleError",
    "FeatureSet",
    "GroupModel",
    "GroupNBError",
    "GroupedCorpus",
    "GroupingConfig",
    "InsufficientClassError",
    "IntegrityError",
    "InvalidConfigError",
    "Label",
    "MeasurementError",
    "ModelBundle",
    "OpcodeHistogram",
    "ParseError",
    "Prediction",
    "SampleRecord",
    "ScoreTable",
    "SizeRangeError",
    "SplitResult",
    "SyntheticSpec",
    "TimedRun",
    "Workload",
    "assign_group",
    "build_bundle",
    "bundle_from_json",
    "bundle_to_json",
    "class_distributions",
    "class_frequency",
    "classify_parallel",
    "classify_sequential",
    "emit_csv",
    "generate_synthetic",
    "load_bundle",
    "log_posterior",
    "make_batches",
    "normalized_posterior",
    "parse_corpus",
    "parse_csv",
    "partition_by_group",
    "predict",
    "route",
    "run_bench",
    "save_bundle",
    "score_opcodes",
    "select_top_k",
    "serialize_sample",
    "speedup",
    "split_train_test",
    "tokenize_disassembly",
    "train_bundle",
    "train_bundles",
    "train_group",
    "trainable_groups",
    "write_predictions",
]
