"""Command-line front end.

Subcommands cover the full pipeline: gen (synthetic corpus), split
(stratified train/test), train (per-group models to a bundle file),
classify (sequential or lane-parallel batch prediction), bench (the
timing sweep to CSV), and score (accuracy plus per-class
precision/recall from a prediction file).

Exit codes: 0 success, 1 usage or configuration error, 2 data or
integrity error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from . import bench as bench_mod
from . import engine
from .corpus import (
    GroupingConfig,
    Label,
    parse_corpus,
    partition_by_group,
    serialize_sample,
    split_train_test,
)
from .errors import (
    BundleValidationError,
    EmptyBundleError,
    InsufficientClassError,
    IntegrityError,
    InvalidConfigError,
    MeasurementError,
    ParseError,
    SizeRangeError,
)
from .synth import SyntheticSpec, generate_synthetic

_DATA_ERRORS = (
    ParseError,
    IntegrityError,
    SizeRangeError,
    InsufficientClassError,
    BundleValidationError,
    EmptyBundleError,
    MeasurementError,
)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this tool reserves 2 for data
    # errors, so route usage failures to exit code 1 instead.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _ratio(text: str) -> tuple[int, int]:
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected TRAIN:TEST, got {text!r}")
    try:
        train, test = int(parts[0]), int(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected TRAIN:TEST, got {text!r}") from None
    if train < 1 or test < 1:
        raise argparse.ArgumentTypeError(f"ratio parts must be positive, got {text!r}")
    return train, test


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="groupnb", description="group-wise opcode-frequency classifier")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("gen", help="generate a seeded synthetic corpus")
    p.add_argument("--groups", type=int, required=True, help="number of size groups to cover")
    p.add_argument("--per-class", type=int, required=True, dest="per_class",
                   help="samples per group per class")
    p.add_argument("--vocab", type=int, default=64, help="opcode vocabulary size")
    p.add_argument("--divergence", type=float, default=0.8,
                   help="class-distribution separation in [0, 1]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="corpus JSONL path")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("split", help="stratified train/test split")
    p.add_argument("--in", dest="input", required=True, help="corpus JSONL path")
    p.add_argument("--ratio", type=_ratio, default=(2, 1), help="TRAIN:TEST, default 2:1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train", required=True, help="output train JSONL path")
    p.add_argument("--test", required=True, help="output test JSONL path")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("train", help="train per-group models into a bundle")
    p.add_argument("--in", dest="input", required=True, help="train JSONL path")
    p.add_argument("--k", type=int, required=True, help="features per group")
    p.add_argument("--alpha", type=float, default=1.0, help="smoothing pseudo-count")
    p.add_argument("--group-kb", type=int, default=5, dest="group_kb",
                   help="group width in KiB")
    p.add_argument("--max-kb", type=int, default=500, dest="max_kb",
                   help="size cutoff in KiB")
    p.add_argument("--min-per-class", type=int, default=6, dest="min_per_class",
                   help="fewest samples of each class a trainable group needs")
    p.add_argument("--out", required=True, help="bundle JSON path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("classify", help="classify a corpus with a trained bundle")
    p.add_argument("--bundle", required=True, help="bundle JSON path")
    p.add_argument("--in", dest="input", required=True, help="input JSONL path")
    p.add_argument("--lanes", type=int, default=1, help="worker lanes for --parallel")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--parallel", action="store_true", help="use worker-process lanes")
    mode.add_argument("--sequential", action="store_true", help="single-threaded (default)")
    p.add_argument("--out", required=True, help="prediction JSONL path")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("bench", help="sequential-vs-parallel timing sweep")
    p.add_argument("--train", required=True, help="train JSONL path")
    p.add_argument("--test", required=True, help="test JSONL path")
    p.add_argument("--k", type=_int_list, default=(20, 40, 80, 100, 160, 200),
                   help="comma-separated feature budgets")
    p.add_argument("--batch-multiple", type=int, default=768, dest="batch_multiple")
    p.add_argument("--batch-counts", type=_int_list, default=(1, 2, 4, 8, 16),
                   dest="batch_counts", help="comma-separated batch-size multipliers")
    p.add_argument("--lanes", type=int, default=None,
                   help="worker lanes, default: detected hardware threads")
    p.add_argument("--reps", type=int, default=5, help="repetitions per cell")
    p.add_argument("--out", required=True, help="report CSV path")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("score", help="accuracy and per-class precision/recall")
    p.add_argument("--preds", "--bundle", dest="preds", required=True,
                   help="prediction JSONL path")
    p.add_argument("--truth", required=True, help="labeled JSONL path")
    p.set_defaults(func=_cmd_score)

    return parser


def _read_corpus(path: str, *, allow_unlabeled: bool = False):
    with open(path, "r", encoding="utf-8") as fp:
        return parse_corpus(fp, allow_unlabeled=allow_unlabeled)


def _write_corpus(path: str, samples) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        for sample in samples:
            fp.write(serialize_sample(sample) + "\n")


def _cmd_gen(args) -> int:
    spec = SyntheticSpec(
        group_count=args.groups,
        samples_per_group_per_class=args.per_class,
        vocabulary_size=args.vocab,
        divergence=args.divergence,
        seed=args.seed,
    )
    samples = generate_synthetic(spec)
    _write_corpus(args.out, samples)
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def _cmd_split(args) -> int:
    samples = _read_corpus(args.input)
    config = GroupingConfig()
    grouped, rejected = partition_by_group(samples, config)
    if rejected:
        print(f"warning: skipped {len(rejected)} samples outside the size range",
              file=sys.stderr)
    result = split_train_test(grouped, args.ratio, args.seed)
    _write_corpus(args.train, result.train.all_samples())
    _write_corpus(args.test, result.test.all_samples())
    print(
        f"split {grouped.sample_count()} samples "
        f"{args.ratio[0]}:{args.ratio[1]} -> "
        f"{result.train.sample_count()} train, {result.test.sample_count()} test"
    )
    return 0


def _cmd_train(args) -> int:
    config = GroupingConfig(
        group_size_bytes=args.group_kb * 1024,
        max_size_bytes=args.max_kb * 1024,
        min_per_class=args.min_per_class,
    )
    samples = _read_corpus(args.input)
    grouped, rejected = partition_by_group(samples, config)
    if rejected:
        print(f"warning: skipped {len(rejected)} samples outside the size range",
              file=sys.stderr)
    bundle = engine.train_bundle(grouped, args.k, args.alpha)
    engine.save_bundle(bundle, args.out)
    print(f"trained {len(bundle.trained_ids)} group models (k={args.k}) to {args.out}")
    return 0


def _cmd_classify(args) -> int:
    bundle = engine.load_bundle(args.bundle)
    samples = _read_corpus(args.input, allow_unlabeled=True)
    workload = engine.Workload(samples=tuple(samples), lanes=args.lanes)
    if args.parallel:
        run = engine.classify_parallel(bundle, workload, warmup=False)
    else:
        run = engine.classify_sequential(bundle, workload, warmup=False)
    with open(args.out, "w", encoding="utf-8") as fp:
        engine.write_predictions(run, samples, fp)
    mode = "parallel" if args.parallel else "sequential"
    print(
        f"classified {len(samples)} samples ({mode}, {len(run.errors)} errors) "
        f"in {run.elapsed_ns} ns"
    )
    return 0


def _cmd_bench(args) -> int:
    config = _bench_config(args)
    train_samples = _read_corpus(args.train)
    test_samples = _read_corpus(args.test)
    grouped, rejected = partition_by_group(train_samples, GroupingConfig())
    if rejected:
        print(f"warning: skipped {len(rejected)} train samples outside the size range",
              file=sys.stderr)
    bundles = bench_mod.train_bundles(grouped, config.k_values)
    report = bench_mod.run_bench(bundles, test_samples, config)
    with open(args.out, "w", encoding="utf-8") as fp:
        bench_mod.emit_csv(report, fp)
    print(f"wrote {len(report.rows)} bench rows to {args.out}")
    return 0


def _bench_config(args) -> bench_mod.BenchConfig:
    return bench_mod.BenchConfig(
        k_values=tuple(args.k),
        batch_multiple=args.batch_multiple,
        batch_counts=tuple(args.batch_counts),
        lanes=args.lanes,
        repetitions=args.reps,
    )


def _division(numerator: int, denominator: int) -> float | None:
    return numerator / denominator if denominator else None


def _cmd_score(args) -> int:
    truth = {s.id: s.label for s in _read_corpus(args.truth)}
    predicted: dict[str, Label] = {}
    errors = 0
    with open(args.preds, "r", encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"invalid prediction JSON: {exc.msg}") from None
            if not isinstance(doc, dict) or "id" not in doc:
                raise ParseError(line_no, "prediction must be an object with an 'id'")
            if "error" in doc:
                errors += 1
                continue
            raw = doc.get("label")
            if raw not in (Label.MALWARE.value, Label.BENIGN.value):
                raise ParseError(line_no, f"bad label {raw!r}")
            predicted[doc["id"]] = Label(raw)
    unknown = set(predicted) - set(truth)
    if unknown:
        raise IntegrityError(f"predictions for ids missing from truth: {sorted(unknown)[:5]}")

    correct = sum(1 for i, label in predicted.items() if truth[i] is label)
    per_class = {}
    for c in (Label.MALWARE, Label.BENIGN):
        tp = sum(1 for i, label in predicted.items() if label is c and truth[i] is c)
        predicted_c = sum(1 for label in predicted.values() if label is c)
        truth_c = sum(1 for i in predicted if truth[i] is c)
        per_class[c.value] = {
            "precision": _division(tp, predicted_c),
            "recall": _division(tp, truth_c),
        }
    payload = {
        "accuracy": _division(correct, len(predicted)),
        "samples": len(predicted),
        "errors": errors,
        "per_class": per_class,
    }
    print(json.dumps(payload))
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 0 if code is None else 1
    try:
        return args.func(args)
    except InvalidConfigError as exc:
        print(f"groupnb: config error: {exc}", file=sys.stderr)
        return 1
    except _DATA_ERRORS as exc:
        print(f"groupnb: data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"groupnb: i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
