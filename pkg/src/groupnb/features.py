"""Per-group feature scoring and top-k selection.

An opcode's score within a group is the absolute difference between its
normalized occurrence frequency in the malware class and in the benign
class; the k highest-scoring opcodes become the group's feature set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import Label, SampleRecord
from .errors import InsufficientClassError, InvalidConfigError


@dataclass(frozen=True)
class ClassFrequency:
    """Normalized opcode frequencies of one class (values sum to 1)."""

    freqs: dict[str, float]
    total_count: int


@dataclass(frozen=True)
class ScoreTable:
    """Opcode -> |f_malware - f_benign| for one group."""

    scores: dict[str, float]
    group: int | None = None


@dataclass(frozen=True)
class FeatureSet:
    """Top-k opcodes, ordered by descending score then ascending mnemonic."""

    opcodes: tuple[str, ...]
    k: int


def class_frequency(samples: Sequence[SampleRecord], label: Label) -> ClassFrequency:
    """Aggregate opcode counts of one class and normalize by the class total.

    An absent class yields total_count 0 and an empty frequency map.
    """
    counts: dict[str, int] = {}
    total = 0
    for sample in samples:
        if sample.label is not label:
            continue
        for op, n in sample.histogram.entries.items():
            counts[op] = counts.get(op, 0) + n
            total += n
    if total == 0:
        return ClassFrequency({}, 0)
    return ClassFrequency({op: n / total for op, n in counts.items()}, total)


def score_opcodes(samples: Sequence[SampleRecord], group: int | None = None) -> ScoreTable:
    """Score every opcode seen in either class of one group's training samples.

    Requires opcode occurrences from both classes; a class that is absent
    (or contributes no opcodes at all) raises InsufficientClassError.
    """
    f_malware = class_frequency(samples, Label.MALWARE)
    f_benign = class_frequency(samples, Label.BENIGN)
    if f_malware.total_count == 0:
        raise InsufficientClassError(f"group {group}: no malware opcode occurrences to score")
    if f_benign.total_count == 0:
        raise InsufficientClassError(f"group {group}: no benign opcode occurrences to score")
    vocab = sorted(set(f_malware.freqs) | set(f_benign.freqs))
    scores = {
        op: abs(f_malware.freqs.get(op, 0.0) - f_benign.freqs.get(op, 0.0)) for op in vocab
    }
    return ScoreTable(scores, group)


def select_top_k(table: ScoreTable, k: int) -> FeatureSet:
    """Deterministic top-k: score descending, ties broken by mnemonic ascending.

    If fewer than k opcodes were scored, all of them are returned.
    """
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise InvalidConfigError(f"k must be a positive integer, got {k!r}")
    ordered = sorted(table.scores.items(), key=lambda item: (-item[1], item[0]))
    return FeatureSet(tuple(op for op, _ in ordered[:k]), k)
