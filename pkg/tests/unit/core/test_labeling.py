from __future__ import annotations

import itertools
from typing import TYPE_CHECKING

import numpy as np
import pytest

from resin.errors import DegenerateValuesError, MissingThresholdError, ParameterError
from resin.labeling import (
    binarize,
    compute_thresholds,
    label_dataset,
    load_labels_csv,
    two_means_1d,
    write_labels_csv,
)
from resin.signals import Annotation, AnnotationSet, Dataset, DatasetItem, EdaSignal, MusicFeatureTable

if TYPE_CHECKING:
    from pathlib import Path


def _subject(valences: list[float], arousals: list[float] | None = None, subject: str = 's1') -> AnnotationSet:
    arousals = arousals or valences
    return AnnotationSet(
        entries={
            (subject, f'song{i}'): Annotation(valence=v, arousal=a)
            for i, (v, a) in enumerate(zip(valences, arousals, strict=True))
        },
    )


def _brute_force_cost(values: np.ndarray) -> float:
    best = np.inf
    for bits in itertools.product((0, 1), repeat=values.size):
        mask = np.array(bits, dtype=bool)
        if mask.all() or not mask.any():
            continue
        low, high = values[~mask], values[mask]
        best = min(best, float(np.sum((low - low.mean()) ** 2) + np.sum((high - high.mean()) ** 2)))
    return best


def test_two_means_finds_the_obvious_split() -> None:
    result = two_means_1d([0.2, 0.3, 0.8, 0.9])

    assert result.c_low == pytest.approx(0.25)
    assert result.c_high == pytest.approx(0.85)
    assert result.threshold == pytest.approx(0.55)
    assert result.assignment == (0, 0, 1, 1)


def test_two_means_matches_exhaustive_search() -> None:
    rng = np.random.default_rng(0)
    for _ in range(50):
        values = rng.uniform(0.0, 1.0, size=int(rng.integers(2, 9)))
        result = two_means_1d(values)
        bits = np.array(result.assignment, dtype=bool)
        low, high = values[~bits], values[bits]
        cost = float(np.sum((low - low.mean()) ** 2) + np.sum((high - high.mean()) ** 2))

        assert cost == pytest.approx(_brute_force_cost(values), abs=1e-12)
        assert result.c_low < result.c_high


def test_two_means_with_two_values_splits_them() -> None:
    result = two_means_1d([0.7, 0.1])

    assert result.threshold == pytest.approx(0.4)
    assert result.assignment == (1, 0)


def test_two_means_rejects_constant_values() -> None:
    with pytest.raises(DegenerateValuesError):
        two_means_1d([0.4, 0.4, 0.4])


def test_two_means_rejects_empty_input() -> None:
    with pytest.raises(ParameterError):
        two_means_1d([])


def test_binarize_labels_strictly_above_threshold() -> None:
    annotations = _subject([0.2, 0.3, 0.8, 0.9])

    labels = binarize(annotations, compute_thresholds(annotations))

    assert [labels.entries[('s1', f'song{i}')].valence for i in range(4)] == [0, 0, 1, 1]


def test_binarize_value_equal_to_threshold_is_low() -> None:
    annotations = _subject([0.2, 0.3, 0.8, 0.9])
    thresholds = compute_thresholds(annotations)
    at_threshold = AnnotationSet(entries={('s1', 'x'): Annotation(valence=0.55, arousal=0.55)})

    labels = binarize(at_threshold, thresholds)

    assert labels.entries[('s1', 'x')].valence == 0


def test_constant_axis_is_degenerate_and_all_low() -> None:
    annotations = _subject([0.5, 0.5, 0.5], [0.1, 0.2, 0.9])

    thresholds = compute_thresholds(annotations)
    labels = binarize(annotations, thresholds)

    assert thresholds['s1'].degenerate_v
    assert not thresholds['s1'].degenerate_a
    assert {pair.valence for pair in labels.entries.values()} == {0}
    assert {pair.arousal for pair in labels.entries.values()} == {0, 1}


def test_thresholds_are_per_subject() -> None:
    first = _subject([0.1, 0.2, 0.3, 0.4], subject='s1')
    second = _subject([0.6, 0.7, 0.8, 0.9], subject='s2')
    annotations = AnnotationSet(entries={**first.entries, **second.entries})

    thresholds = compute_thresholds(annotations)

    assert thresholds['s1'].valence_threshold < 0.5 < thresholds['s2'].valence_threshold


def test_labels_are_monotone_within_subject() -> None:
    rng = np.random.default_rng(3)
    values = rng.uniform(size=12).tolist()
    annotations = _subject(values)

    labels = binarize(annotations, compute_thresholds(annotations))
    pairs = sorted((values[i], labels.entries[('s1', f'song{i}')].valence) for i in range(12))

    assert [bit for _, bit in pairs] == sorted(bit for _, bit in pairs)


def test_binarize_requires_threshold_for_every_subject() -> None:
    with pytest.raises(MissingThresholdError):
        binarize(_subject([0.1, 0.9]), {})


def test_labels_csv_round_trip(tmp_path: Path) -> None:
    annotations = _subject([0.2, 0.3, 0.8, 0.9], [0.9, 0.1, 0.5, 0.2])
    labels = binarize(annotations, compute_thresholds(annotations))
    path = tmp_path / 'labels.csv'

    write_labels_csv(labels, path)

    assert load_labels_csv(path) == labels


def test_label_dataset_attaches_labels() -> None:
    annotations = _subject([0.2, 0.9])
    labels = binarize(annotations, compute_thresholds(annotations))
    items = tuple(
        DatasetItem(
            signal=EdaSignal(subject_id='s1', song_id=song, samples=np.ones(3)),
            valence=annotation.valence,
            arousal=annotation.arousal,
        )
        for (_, song), annotation in sorted(annotations.entries.items())
    )
    dataset = Dataset(items=items, features=MusicFeatureTable(dimension=2, entries={}))

    labelled = label_dataset(dataset, labels)

    assert labelled.is_labelled
    assert [item.label('valence') for item in labelled.items] == [0, 1]


def test_labels_do_not_depend_on_row_order() -> None:
    rng = np.random.default_rng(8)
    entries = {
        (f's{s}', f'song{k}'): Annotation(valence=float(v), arousal=float(a))
        for s in range(3)
        for k, (v, a) in enumerate(rng.uniform(size=(6, 2)))
    }
    keys = list(entries)
    shuffled = AnnotationSet(entries={keys[i]: entries[keys[i]] for i in rng.permutation(len(keys))})
    ordered = AnnotationSet(entries=entries)

    assert compute_thresholds(shuffled) == compute_thresholds(ordered)
    labels = binarize(shuffled, compute_thresholds(shuffled))
    assert labels.entries == binarize(ordered, compute_thresholds(ordered)).entries
