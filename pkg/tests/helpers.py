"""Small builders shared across the test suite."""

from groupnb.corpus import (
    GroupedCorpus,
    GroupingConfig,
    Label,
    OpcodeHistogram,
    SampleRecord,
    partition_by_group,
)


def make_sample(sid: str, label: Label, size_bytes: int, opcodes: dict) -> SampleRecord:
    return SampleRecord(
        id=sid,
        label=label,
        size_bytes=size_bytes,
        histogram=OpcodeHistogram.from_counts(opcodes),
    )


def grouped(samples, config: GroupingConfig | None = None) -> GroupedCorpus:
    corpus, rejected = partition_by_group(samples, config or GroupingConfig())
    assert not rejected, "helper corpora must fit the size range"
    return corpus


def two_class_group(
    group: int,
    n_malware: int = 6,
    n_benign: int = 6,
    width: int = 5120,
) -> list[SampleRecord]:
    """Separable malware/benign samples all falling inside one size group."""
    base = group * width
    samples = []
    for i in range(n_malware):
        samples.append(
            make_sample(
                f"m{group:03d}-{i:03d}",
                Label.MALWARE,
                base + i,
                {"evil": 3 + i % 2, "mov": 1},
            )
        )
    for i in range(n_benign):
        samples.append(
            make_sample(
                f"b{group:03d}-{i:03d}",
                Label.BENIGN,
                base + i,
                {"mov": 3, "add": 1 + i % 2},
            )
        )
    return samples
