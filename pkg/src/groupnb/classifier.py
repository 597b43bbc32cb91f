"""Multinomial Naive Bayes over a group's selected opcode features.

Training and scoring work entirely in log space with Laplace smoothing,
so no feature/class pair ever scores -inf. Opcodes outside the feature
set are ignored at both train and predict time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import Label, OpcodeHistogram, SampleRecord
from .errors import InsufficientClassError, IntegrityError, InvalidConfigError
from .features import FeatureSet

CLASSES = (Label.MALWARE, Label.BENIGN)


@dataclass(frozen=True)
class GroupModel:
    """Trained Naive Bayes parameters for one size group.

    log_prior exponentiates to class probabilities summing to 1;
    log_likelihood holds ln theta(class, opcode) for every feature, and
    exp of each class's row sums to 1 over the feature set.
    """

    group: int
    features: FeatureSet
    log_prior: dict[Label, float]
    log_likelihood: dict[Label, dict[str, float]]
    alpha: float
    train_counts: dict[Label, int]
    # (opcode, ln theta_malware, ln theta_benign) rows in feature order;
    # fixes the summation order so every scoring path is bit-identical.
    _packed: tuple[tuple[str, float, float], ...] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self):
        ll_m = self.log_likelihood.get(Label.MALWARE, {})
        ll_b = self.log_likelihood.get(Label.BENIGN, {})
        packed = []
        for op in self.features.opcodes:
            if op not in ll_m or op not in ll_b:
                raise IntegrityError(
                    f"group {self.group}: log_likelihood missing feature {op!r}"
                )
            packed.append((op, ll_m[op], ll_b[op]))
        object.__setattr__(self, "_packed", tuple(packed))


@dataclass(frozen=True)
class Prediction:
    """Classification verdict plus the unnormalized joint log-scores.

    label is MALWARE iff the malware score is strictly higher; ties go
    to BENIGN. effective_group is the group whose model produced it.
    """

    label: Label
    log_posterior: dict[Label, float]
    effective_group: int


def train_group(
    samples: Sequence[SampleRecord],
    features: FeatureSet,
    alpha: float = 1.0,
    *,
    group: int = 0,
) -> GroupModel:
    """Train one group's model on its training samples.

    Priors are sample-count fractions; likelihoods are smoothed count
    fractions restricted to the feature set:

        theta(c, o) = (count_c(o) + alpha) / (total_c + alpha * |features|)

    where total_c sums counts over the feature set only.
    """
    if not (isinstance(alpha, (int, float)) and not isinstance(alpha, bool)) or alpha <= 0:
        raise InvalidConfigError(f"alpha must be positive, got {alpha!r}")
    if not features.opcodes:
        raise InvalidConfigError("feature set is empty")

    feature_index = set(features.opcodes)
    counts: dict[Label, dict[str, int]] = {
        c: {op: 0 for op in features.opcodes} for c in CLASSES
    }
    n_samples = {c: 0 for c in CLASSES}
    for sample in samples:
        if sample.label not in counts:
            raise IntegrityError(f"sample {sample.id!r} has no training label")
        n_samples[sample.label] += 1
        class_counts = counts[sample.label]
        for op, n in sample.histogram.entries.items():
            if op in feature_index:
                class_counts[op] += n

    for c in CLASSES:
        if n_samples[c] == 0:
            raise InsufficientClassError(
                f"group {group}: no {c.value} samples to train on"
            )

    n_total = n_samples[Label.MALWARE] + n_samples[Label.BENIGN]
    log_prior = {c: math.log(n_samples[c] / n_total) for c in CLASSES}

    n_features = len(features.opcodes)
    alpha = float(alpha)
    log_likelihood: dict[Label, dict[str, float]] = {}
    for c in CLASSES:
        total_c = sum(counts[c].values())
        denom = total_c + alpha * n_features
        log_likelihood[c] = {
            op: math.log((counts[c][op] + alpha) / denom) for op in features.opcodes
        }

    return GroupModel(
        group=group,
        features=features,
        log_prior=log_prior,
        log_likelihood=log_likelihood,
        alpha=alpha,
        train_counts=dict(n_samples),
    )


def log_posterior(model: GroupModel, histogram: OpcodeHistogram) -> dict[Label, float]:
    """Unnormalized joint log-score per class.

    score(c) = log_prior(c) + sum over features of count(o) * ln theta(c, o).
    The evidence term is class-constant and intentionally omitted; use
    normalized_posterior for actual probabilities. Opcodes outside the
    feature set contribute nothing.
    """
    score_m = model.log_prior[Label.MALWARE]
    score_b = model.log_prior[Label.BENIGN]
    get = histogram.entries.get
    for op, ll_m, ll_b in model._packed:
        n = get(op)
        if n is not None:
            score_m += n * ll_m
            score_b += n * ll_b
    return {Label.MALWARE: score_m, Label.BENIGN: score_b}


def predict(model: GroupModel, histogram: OpcodeHistogram) -> Prediction:
    """Classify one histogram: malware iff its log-score is strictly higher."""
    scores = log_posterior(model, histogram)
    if scores[Label.MALWARE] > scores[Label.BENIGN]:
        label = Label.MALWARE
    else:
        label = Label.BENIGN
    return Prediction(label=label, log_posterior=scores, effective_group=model.group)


def normalized_posterior(scores: Mapping[Label, float]) -> dict[Label, float]:
    """Diagnostic accessor: exponentiate-and-normalize joint log-scores."""
    peak = max(scores.values())
    exps = {c: math.exp(s - peak) for c, s in scores.items()}
    total = sum(exps.values())
    return {c: e / total for c, e in exps.items()}
