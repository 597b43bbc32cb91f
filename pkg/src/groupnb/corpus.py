"""Corpus ingestion, size grouping, and stratified train/test splitting.

A corpus is a set of labeled executables, each reduced to its opcode
histogram and file size. Executables are bucketed into fixed-width size
groups (5120 bytes wide by default, 100 groups below the 512000-byte
cutoff) and every group later gets its own feature set and model.

All functions here are pure transformations; returned objects are not
mutated afterwards and are safe to share across worker processes.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from .errors import IntegrityError, InvalidConfigError, ParseError, SizeRangeError


class Label(Enum):
    MALWARE = "malware"
    BENIGN = "benign"
    # Produced only for unlabeled classification input; never accepted
    # from training corpora.
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class OpcodeHistogram:
    """Opcode mnemonic -> occurrence count.

    Canonical form: keys are non-empty lowercase tokens, counts are
    positive (zero-count entries are absent).
    """

    entries: dict[str, int]

    @classmethod
    def from_counts(cls, counts: Mapping[str, int]) -> "OpcodeHistogram":
        """Build a canonical histogram, case-folding mnemonics and dropping zeros."""
        entries: dict[str, int] = {}
        for mnemonic, count in counts.items():
            if not isinstance(mnemonic, str) or not mnemonic:
                raise ValueError(f"opcode mnemonic must be a non-empty string, got {mnemonic!r}")
            if not isinstance(count, int) or isinstance(count, bool) or count < 0:
                raise ValueError(f"count for {mnemonic!r} must be a non-negative integer, got {count!r}")
            if count:
                key = mnemonic.lower()
                entries[key] = entries.get(key, 0) + count
        return cls(entries)

    def total(self) -> int:
        return sum(self.entries.values())

    def get(self, mnemonic: str, default: int = 0) -> int:
        return self.entries.get(mnemonic, default)


@dataclass(frozen=True)
class SampleRecord:
    """One executable: id, class label, file size, opcode histogram."""

    id: str
    label: Label
    size_bytes: int
    histogram: OpcodeHistogram


@dataclass(frozen=True)
class GroupingConfig:
    """Size-group geometry and the per-class trainability threshold.

    With the defaults (5120-byte groups, 512000-byte cutoff) there are
    exactly 100 groups. ``max_size_bytes`` must be divisible by
    ``group_size_bytes``.
    """

    group_size_bytes: int = 5120
    max_size_bytes: int = 512000
    min_per_class: int = 6

    def __post_init__(self):
        for name in ("group_size_bytes", "max_size_bytes", "min_per_class"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise InvalidConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.max_size_bytes % self.group_size_bytes != 0:
            raise InvalidConfigError(
                f"max_size_bytes ({self.max_size_bytes}) must be divisible by "
                f"group_size_bytes ({self.group_size_bytes})"
            )

    @property
    def group_count(self) -> int:
        return self.max_size_bytes // self.group_size_bytes


@dataclass(frozen=True)
class GroupedCorpus:
    """Samples bucketed by size group; only non-empty groups are present."""

    config: GroupingConfig
    groups: dict[int, list[SampleRecord]]

    def sample_count(self) -> int:
        return sum(len(samples) for samples in self.groups.values())

    def all_samples(self) -> list[SampleRecord]:
        """All samples in ascending group order."""
        out: list[SampleRecord] = []
        for g in sorted(self.groups):
            out.extend(self.groups[g])
        return out


@dataclass(frozen=True)
class SplitResult:
    train: GroupedCorpus
    test: GroupedCorpus
    seed: int
    ratio: tuple[int, int]


def _lines(stream: Iterable[str] | str) -> Iterable[str]:
    if isinstance(stream, str):
        return stream.splitlines()
    return stream


def parse_corpus(stream: Iterable[str] | str, *, allow_unlabeled: bool = False) -> list[SampleRecord]:
    """Parse a JSONL corpus: one ``{"id", "label", "size_bytes", "opcodes"}`` object per line.

    Unknown top-level keys are ignored; blank lines are skipped. With
    ``allow_unlabeled`` a record may omit the label field and comes back
    as ``Label.UNKNOWN`` (classification input); a label string other
    than "malware"/"benign" is always a parse error.

    Raises ParseError (with line number) on a malformed line and
    IntegrityError on a duplicate id.
    """
    records: list[SampleRecord] = []
    seen: set[str] = set()
    for line_no, line in enumerate(_lines(stream), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(line_no, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise ParseError(line_no, "record must be a JSON object")

        rid = obj.get("id")
        if not isinstance(rid, str) or not rid:
            raise ParseError(line_no, "missing or empty 'id'")
        if rid in seen:
            raise IntegrityError(f"duplicate id {rid!r} at line {line_no}")

        if "label" in obj:
            raw_label = obj["label"]
            if raw_label == Label.MALWARE.value:
                label = Label.MALWARE
            elif raw_label == Label.BENIGN.value:
                label = Label.BENIGN
            else:
                raise ParseError(line_no, f"unknown label {raw_label!r}")
        elif allow_unlabeled:
            label = Label.UNKNOWN
        else:
            raise ParseError(line_no, "missing 'label'")

        size = obj.get("size_bytes")
        if not isinstance(size, int) or isinstance(size, bool) or size < 0:
            raise ParseError(line_no, "'size_bytes' must be a non-negative integer")

        raw_ops = obj.get("opcodes")
        if not isinstance(raw_ops, dict):
            raise ParseError(line_no, "'opcodes' must be an object")
        try:
            histogram = OpcodeHistogram.from_counts(raw_ops)
        except ValueError as exc:
            raise ParseError(line_no, str(exc)) from None

        seen.add(rid)
        records.append(SampleRecord(rid, label, size, histogram))
    return records


def serialize_sample(record: SampleRecord) -> str:
    """One canonical JSONL line for a record (opcode keys sorted).

    Unlabeled records omit the label field, mirroring parse_corpus.
    """
    obj: dict = {"id": record.id}
    if record.label is not Label.UNKNOWN:
        obj["label"] = record.label.value
    obj["size_bytes"] = record.size_bytes
    obj["opcodes"] = {op: record.histogram.entries[op] for op in sorted(record.histogram.entries)}
    return json.dumps(obj)


def tokenize_disassembly(stream: Iterable[str] | str) -> OpcodeHistogram:
    """Count mnemonics in a text disassembly dump, one instruction per line.

    The first whitespace-delimited token of each line is the mnemonic,
    case-folded to lowercase; operands are ignored. Blank lines and
    comment lines starting with ';' are skipped.
    """
    counts: dict[str, int] = {}
    for line in _lines(stream):
        stripped = line.strip()
        if not stripped or stripped.startswith(";"):
            continue
        mnemonic = stripped.split(None, 1)[0].lower()
        counts[mnemonic] = counts.get(mnemonic, 0) + 1
    return OpcodeHistogram(counts)


def assign_group(size_bytes: int, config: GroupingConfig) -> int:
    """Size group index for a file size: floor(size / group width).

    Group intervals are half-open [i*width, (i+1)*width). Sizes at or
    above the cutoff (and negative sizes) raise SizeRangeError.
    """
    if size_bytes < 0 or size_bytes >= config.max_size_bytes:
        raise SizeRangeError(
            f"size_bytes {size_bytes} outside [0, {config.max_size_bytes})"
        )
    return size_bytes // config.group_size_bytes


def partition_by_group(
    samples: Iterable[SampleRecord], config: GroupingConfig
) -> tuple[GroupedCorpus, list[SampleRecord]]:
    """Bucket samples into size groups.

    Samples outside the admissible size range are not a failure: they
    come back in the second element ("rejected") so callers can report
    them.
    """
    groups: dict[int, list[SampleRecord]] = {}
    rejected: list[SampleRecord] = []
    for sample in samples:
        if 0 <= sample.size_bytes < config.max_size_bytes:
            g = sample.size_bytes // config.group_size_bytes
            groups.setdefault(g, []).append(sample)
        else:
            rejected.append(sample)
    return GroupedCorpus(config, groups), rejected


def split_train_test(
    grouped: GroupedCorpus, ratio: tuple[int, int] = (2, 1), seed: int = 0
) -> SplitResult:
    """Seeded stratified split, per (group, class) stratum.

    A stratum of n samples contributes ceil(n * r_train / (r_train +
    r_test)) samples to the training side (rounding favors training)
    and the rest to the test side. Deterministic for a given seed.
    """
    r_train, r_test = ratio
    if not isinstance(r_train, int) or not isinstance(r_test, int) or r_train <= 0 or r_test <= 0:
        raise InvalidConfigError(f"ratio components must be positive integers, got {ratio!r}")

    rng = random.Random(seed)
    train_groups: dict[int, list[SampleRecord]] = {}
    test_groups: dict[int, list[SampleRecord]] = {}
    denom = r_train + r_test
    for g in sorted(grouped.groups):
        bucket = grouped.groups[g]
        for sample in bucket:
            if sample.label is Label.UNKNOWN:
                raise IntegrityError(f"unlabeled sample {sample.id!r} cannot be split")
        for label in (Label.MALWARE, Label.BENIGN):
            stratum = sorted((s for s in bucket if s.label is label), key=lambda s: s.id)
            if not stratum:
                continue
            rng.shuffle(stratum)
            n_train = (len(stratum) * r_train + denom - 1) // denom
            if stratum[:n_train]:
                train_groups.setdefault(g, []).extend(stratum[:n_train])
            if stratum[n_train:]:
                test_groups.setdefault(g, []).extend(stratum[n_train:])
    return SplitResult(
        train=GroupedCorpus(grouped.config, train_groups),
        test=GroupedCorpus(grouped.config, test_groups),
        seed=seed,
        ratio=(r_train, r_test),
    )


def trainable_groups(train: GroupedCorpus, config: GroupingConfig) -> set[int]:
    """Groups with at least ``min_per_class`` samples of each class.

    Groups failing the threshold get no model of their own; their files
    are classified with a neighboring group's model (see engine.route).
    """
    out: set[int] = set()
    for g, samples in train.groups.items():
        malware = sum(1 for s in samples if s.label is Label.MALWARE)
        benign = sum(1 for s in samples if s.label is Label.BENIGN)
        if malware >= config.min_per_class and benign >= config.min_per_class:
            out.add(g)
    return out
