"""Benchmark sweep: sequential vs lane-parallel classification time.

Workloads are built in multiples of a fixed batch size by cycling the
test set, classified repeatedly at each feature-budget k in both modes,
and summarized as median/min elapsed nanoseconds plus the
median-over-median speedup. Reports serialize to CSV deterministically
and parse back for self-consistency checks.
"""

from __future__ import annotations

import os
import statistics
from dataclasses import dataclass
from typing import Mapping, Sequence, TextIO

from . import engine
from .classifier import train_group
from .corpus import GroupedCorpus, SampleRecord, trainable_groups
from .engine import BundleMeta, ModelBundle, Workload, build_bundle
from .errors import InvalidConfigError, ParseError
from .features import score_opcodes, select_top_k

CSV_HEADER = "k,batch_size,mode,lanes,elapsed_ns_median,elapsed_ns_min,speedup"

MODE_SEQUENTIAL = "sequential"
MODE_PARALLEL = "parallel"


def _check_positive_ints(name: str, values: Sequence[int]) -> None:
    if not values:
        raise InvalidConfigError(f"{name} must be non-empty")
    for value in values:
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise InvalidConfigError(f"{name} entries must be positive integers, got {value!r}")


@dataclass(frozen=True)
class BenchConfig:
    k_values: tuple[int, ...] = (20, 40, 80, 100, 160, 200)
    batch_multiple: int = 768
    batch_counts: tuple[int, ...] = (1, 2, 4, 8, 16)
    lanes: int | None = None  # None: detected hardware threads
    repetitions: int = 5

    def __post_init__(self):
        _check_positive_ints("k_values", self.k_values)
        _check_positive_ints("batch_counts", self.batch_counts)
        if self.lanes is None:
            object.__setattr__(self, "lanes", os.cpu_count() or 1)
        _check_positive_ints("batch_multiple", (self.batch_multiple,))
        _check_positive_ints("lanes", (self.lanes,))
        _check_positive_ints("repetitions", (self.repetitions,))


@dataclass(frozen=True)
class BenchRow:
    k: int
    batch_size: int
    mode: str
    lanes: int
    elapsed_ns_median: int
    elapsed_ns_min: int
    speedup: float | None  # None on sequential rows


@dataclass(frozen=True)
class BenchReport:
    rows: tuple[BenchRow, ...]


def make_batches(
    test_samples: Sequence[SampleRecord],
    batch_multiple: int,
    batch_count: int,
    lanes: int,
) -> Workload:
    """Workload of exactly batch_multiple * batch_count samples.

    The test set is cycled round-robin in its given order, so every
    original sample appears either floor or ceil of total/len times.
    """
    if not test_samples:
        raise InvalidConfigError("no test samples to batch")
    total = batch_multiple * batch_count
    n = len(test_samples)
    samples = tuple(test_samples[i % n] for i in range(total))
    return Workload(samples=samples, lanes=lanes)


def train_bundles(
    train: GroupedCorpus,
    k_values: Sequence[int],
    alpha: float = 1.0,
    *,
    seed: int = 0,
    created_at: str = "",
) -> dict[int, ModelBundle]:
    """One bundle per k, sharing the per-group score tables across all k."""
    config = train.config
    groups = sorted(trainable_groups(train, config))
    tables = {g: score_opcodes(train.groups[g], group=g) for g in groups}
    bundles: dict[int, ModelBundle] = {}
    for k in k_values:
        models = [
            train_group(train.groups[g], select_top_k(tables[g], k), alpha, group=g)
            for g in groups
        ]
        meta = BundleMeta(k=k, alpha=float(alpha), seed=seed, created_at=created_at)
        bundles[k] = build_bundle(models, config, meta)
    return bundles


def run_bench(
    bundles: Mapping[int, ModelBundle],
    test_samples: Sequence[SampleRecord],
    config: BenchConfig,
) -> BenchReport:
    """Time every (k, batch_size) cell in both modes.

    Rows come out ordered k ascending, batch size ascending, sequential
    before parallel; each mode runs config.repetitions times and the
    speedup is the ratio of the two stored medians.
    """
    missing = [k for k in config.k_values if k not in bundles]
    if missing:
        raise InvalidConfigError(f"no bundle trained for k={missing}")
    k_values = sorted(set(config.k_values))
    counts = sorted(set(config.batch_counts))
    workloads = {
        count: make_batches(test_samples, config.batch_multiple, count, config.lanes)
        for count in counts
    }
    rows: list[BenchRow] = []
    for k in k_values:
        bundle = bundles[k]
        for count in counts:
            workload = workloads[count]
            batch_size = len(workload.samples)
            seq_ns = [
                engine.classify_sequential(bundle, workload).elapsed_ns
                for _ in range(config.repetitions)
            ]
            par_ns = [
                engine.classify_parallel(bundle, workload).elapsed_ns
                for _ in range(config.repetitions)
            ]
            seq_median = int(round(statistics.median(seq_ns)))
            par_median = int(round(statistics.median(par_ns)))
            rows.append(
                BenchRow(
                    k=k,
                    batch_size=batch_size,
                    mode=MODE_SEQUENTIAL,
                    lanes=1,
                    elapsed_ns_median=seq_median,
                    elapsed_ns_min=min(seq_ns),
                    speedup=None,
                )
            )
            rows.append(
                BenchRow(
                    k=k,
                    batch_size=batch_size,
                    mode=MODE_PARALLEL,
                    lanes=config.lanes,
                    elapsed_ns_median=par_median,
                    elapsed_ns_min=min(par_ns),
                    speedup=engine.speedup(seq_median, par_median),
                )
            )
    return BenchReport(rows=tuple(rows))


def emit_csv(report: BenchReport, sink: TextIO) -> None:
    """Write the report; emitting the same report twice is byte-identical."""
    sink.write(CSV_HEADER + "\n")
    for row in report.rows:
        speedup = "" if row.speedup is None else repr(row.speedup)
        sink.write(
            f"{row.k},{row.batch_size},{row.mode},{row.lanes},"
            f"{row.elapsed_ns_median},{row.elapsed_ns_min},{speedup}\n"
        )


def parse_csv(text: str) -> BenchReport:
    """Inverse of emit_csv; emit(parse(emit(r))) == emit(r)."""
    lines = [line for line in text.splitlines() if line]
    if not lines or lines[0] != CSV_HEADER:
        raise ParseError(1, f"expected header {CSV_HEADER!r}")
    rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 7:
            raise ParseError(line_no, f"expected 7 fields, got {len(parts)}")
        try:
            k, batch_size, mode, lanes, median, minimum, raw_speedup = parts
            if mode not in (MODE_SEQUENTIAL, MODE_PARALLEL):
                raise ValueError(f"unknown mode {mode!r}")
            rows.append(
                BenchRow(
                    k=int(k),
                    batch_size=int(batch_size),
                    mode=mode,
                    lanes=int(lanes),
                    elapsed_ns_median=int(median),
                    elapsed_ns_min=int(minimum),
                    speedup=None if raw_speedup == "" else float(raw_speedup),
                )
            )
        except ValueError as exc:
            raise ParseError(line_no, str(exc)) from None
    return BenchReport(rows=tuple(rows))
