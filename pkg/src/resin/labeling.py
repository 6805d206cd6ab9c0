"""Per-subject high/low labels from static valence/arousal annotations.

Each subject's annotations on one axis are split by the exact one-dimensional
2-means optimum; the midpoint of the two cluster centres is that subject's threshold
and a clip is labelled high (1) when its value lies strictly above it.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from loguru import logger

from resin.errors import DegenerateValuesError, MissingThresholdError, ParameterError
from resin.signals import read_table

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping
    from pathlib import Path

    from resin.signals import Annotation, AnnotationSet, Dataset, SignalKey

AXES = ('valence', 'arousal')
LABELS_HEADER = ('subject_id', 'song_id', 'valence_label', 'arousal_label')
THRESHOLDS_HEADER = ('subject_id', 'v_threshold', 'a_threshold', 'v_degenerate', 'a_degenerate')


@dataclass(frozen=True)
class TwoMeans:
    """Optimal two-cluster split of a set of scalars.

    Attributes:
        c_low: Centre of the low cluster.
        c_high: Centre of the high cluster.
        assignment: 1 for members of the high cluster, in input order.
    """

    c_low: float
    c_high: float
    assignment: tuple[int, ...]

    @property
    def threshold(self) -> float:
        return (self.c_low + self.c_high) / 2


@dataclass(frozen=True)
class SubjectThreshold:
    subject_id: str
    valence_threshold: float
    arousal_threshold: float
    degenerate_v: bool = False
    degenerate_a: bool = False

    def threshold(self, axis: str) -> float:
        return self.valence_threshold if axis == 'valence' else self.arousal_threshold

    def degenerate(self, axis: str) -> bool:
        return self.degenerate_v if axis == 'valence' else self.degenerate_a


@dataclass(frozen=True)
class LabelPair:
    valence: int
    arousal: int


@dataclass(frozen=True)
class LabelSet:
    """Binary labels keyed by (subject, song)."""

    entries: Mapping[SignalKey, LabelPair]

    def get(self, key: SignalKey) -> LabelPair | None:
        return self.entries.get(key)


def two_means_1d(values: Iterable[float]) -> TwoMeans:
    """Exact 2-means clustering of scalars.

    Optimal clusters are contiguous once the values are sorted, so every one of the
    n - 1 split points is scored. Among equal-cost splits the one with the smaller
    high cluster wins.

    Raises:
        DegenerateValuesError: If all values are equal.
        ParameterError: If no values are given.
    """
    array = np.asarray(list(values), dtype=np.float64)
    if array.size == 0:
        raise ParameterError('values', '[]', 'need at least one value')
    order = np.argsort(array, kind='stable')
    ordered = array[order]
    if ordered[0] == ordered[-1]:
        raise DegenerateValuesError(float(ordered[0]))

    best_split, best_cost = 0, np.inf
    for split in range(1, ordered.size):
        low, high = ordered[:split], ordered[split:]
        cost = float(np.sum((low - low.mean()) ** 2) + np.sum((high - high.mean()) ** 2))
        if cost <= best_cost:
            best_split, best_cost = split, cost

    assignment = np.zeros(array.size, dtype=np.int64)
    assignment[order[best_split:]] = 1
    return TwoMeans(
        c_low=float(ordered[:best_split].mean()),
        c_high=float(ordered[best_split:].mean()),
        assignment=tuple(int(bit) for bit in assignment),
    )


def _axis_threshold(values: list[float]) -> tuple[float, bool]:
    try:
        return two_means_1d(values).threshold, False
    except DegenerateValuesError as exc:
        return exc.value, True


def subject_threshold(subject_id: str, annotations: Iterable[Annotation]) -> SubjectThreshold:
    """Compute one subject's valence and arousal thresholds.

    An axis whose values are all identical gets the common value as its threshold and
    its degenerate flag set.
    """
    rows = list(annotations)
    valence, degenerate_v = _axis_threshold([row.valence for row in rows])
    arousal, degenerate_a = _axis_threshold([row.arousal for row in rows])
    if degenerate_v or degenerate_a:
        logger.warning(
            'Subject {} has constant annotations on {}; all its labels on that axis are low',
            subject_id,
            ', '.join(axis for axis, flag in zip(AXES, (degenerate_v, degenerate_a), strict=True) if flag),
        )
    return SubjectThreshold(
        subject_id=subject_id,
        valence_threshold=valence,
        arousal_threshold=arousal,
        degenerate_v=degenerate_v,
        degenerate_a=degenerate_a,
    )


def compute_thresholds(annotations: AnnotationSet) -> dict[str, SubjectThreshold]:
    return {
        subject: subject_threshold(subject, annotations.for_subject(subject).values())
        for subject in sorted(annotations.subjects())
    }


def binarize(annotations: AnnotationSet, thresholds: Mapping[str, SubjectThreshold]) -> LabelSet:
    """Label each annotation 1 if it lies strictly above its subject's threshold.

    Raises:
        MissingThresholdError: If an annotated subject has no threshold.
    """
    entries: dict[SignalKey, LabelPair] = {}
    for key, annotation in sorted(annotations.entries.items()):
        threshold = thresholds.get(key[0])
        if threshold is None:
            raise MissingThresholdError(key[0])
        entries[key] = LabelPair(
            valence=int(not threshold.degenerate_v and annotation.valence > threshold.valence_threshold),
            arousal=int(not threshold.degenerate_a and annotation.arousal > threshold.arousal_threshold),
        )
    return LabelSet(entries=entries)


def label_dataset(dataset: Dataset, labels: LabelSet) -> Dataset:
    """Attach labels to every dataset item.

    Raises:
        MissingThresholdError: If an item has no label.
    """
    items = []
    for item in dataset.items:
        pair = labels.get(item.key)
        if pair is None:
            raise MissingThresholdError(item.subject_id)
        items.append(dataclasses.replace(item, valence_label=pair.valence, arousal_label=pair.arousal))
    return dataclasses.replace(dataset, items=tuple(items))


def write_labels_csv(labels: LabelSet, path: Path) -> None:
    rows = [(subject, song, pair.valence, pair.arousal) for (subject, song), pair in sorted(labels.entries.items())]
    pd.DataFrame(rows, columns=list(LABELS_HEADER)).to_csv(path, index=False, lineterminator='\n')


def load_labels_csv(path: Path) -> LabelSet:
    frame = read_table(
        path,
        header=LABELS_HEADER,
        dtypes={'subject_id': str, 'song_id': str, 'valence_label': int, 'arousal_label': int},
    )
    entries = {
        (str(subject), str(song)): LabelPair(valence=int(valence), arousal=int(arousal))
        for subject, song, valence, arousal in frame.itertuples(index=False)
    }
    return LabelSet(entries=entries)


def write_thresholds_csv(thresholds: Mapping[str, SubjectThreshold], path: Path) -> None:
    rows = [
        (
            subject,
            value.valence_threshold,
            value.arousal_threshold,
            int(value.degenerate_v),
            int(value.degenerate_a),
        )
        for subject, value in sorted(thresholds.items())
    ]
    pd.DataFrame(rows, columns=list(THRESHOLDS_HEADER)).to_csv(path, index=False, lineterminator='\n')
