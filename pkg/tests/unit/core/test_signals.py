from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest

from resin.errors import (
    AnnotationRangeError,
    CsvHeaderError,
    CsvParseError,
    DuplicateAnnotationError,
    InterleavedSignalError,
    ParameterError,
    SampleIndexGapError,
    SignalTooShortError,
)
from resin.signals import (
    Annotation,
    AnnotationSet,
    EdaSignal,
    MusicFeatureTable,
    assemble_dataset,
    load_annotations,
    load_eda_csv,
    load_music_features,
    signal_path,
    trim_lead,
    write_eda_csv,
)

if TYPE_CHECKING:
    from pathlib import Path

EDA_HEADER = 'subject_id,song_id,sample_index,eda_us\n'


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding='utf-8')
    return path


def test_load_eda_csv_groups_samples_per_signal(tmp_path: Path) -> None:
    path = _write(tmp_path / 'eda.csv', EDA_HEADER + 's1,a,0,0.5\ns1,a,1,0.6\n')

    signals = load_eda_csv(path)

    assert len(signals) == 1
    assert signals[0].key == ('s1', 'a')
    assert signals[0].samples.tolist() == [0.5, 0.6]
    assert signals[0].sample_rate_hz == 50.0


def test_load_eda_csv_header_only_is_empty(tmp_path: Path) -> None:
    path = _write(tmp_path / 'eda.csv', EDA_HEADER)

    assert load_eda_csv(path) == []


def test_load_eda_csv_rejects_sample_index_gap(tmp_path: Path) -> None:
    path = _write(tmp_path / 'eda.csv', EDA_HEADER + 's1,a,0,1.0\ns1,a,1,1.1\ns1,a,3,1.2\n')

    with pytest.raises(SampleIndexGapError) as excinfo:
        load_eda_csv(path)

    assert excinfo.value.expected == 2
    assert excinfo.value.found == 3


def test_load_eda_csv_rejects_interleaved_signals(tmp_path: Path) -> None:
    path = _write(tmp_path / 'eda.csv', EDA_HEADER + 's1,a,0,1.0\ns1,b,0,2.0\ns1,a,1,1.1\n')

    with pytest.raises(InterleavedSignalError) as excinfo:
        load_eda_csv(path)

    assert excinfo.value.subject_id == 's1'
    assert excinfo.value.song_id == 'a'
    assert excinfo.value.line == 4


def test_load_eda_csv_reports_line_of_bad_value(tmp_path: Path) -> None:
    path = _write(tmp_path / 'eda.csv', EDA_HEADER + 's1,a,0,1.0\ns1,a,1,oops\n')

    with pytest.raises(CsvParseError) as excinfo:
        load_eda_csv(path)

    assert excinfo.value.line == 3


def test_load_eda_csv_rejects_wrong_header(tmp_path: Path) -> None:
    path = _write(tmp_path / 'eda.csv', 'subject,song,i,value\ns1,a,0,1.0\n')

    with pytest.raises(CsvHeaderError):
        load_eda_csv(path)


def test_load_eda_csv_missing_file(tmp_path: Path) -> None:
    with pytest.raises(CsvParseError, match='file not found'):
        load_eda_csv(tmp_path / 'missing.csv')


def test_eda_csv_round_trip_is_byte_identical(tmp_path: Path) -> None:
    text = EDA_HEADER + 's1,a,0,0.5\ns1,a,1,0.625\ns1,b,0,1.25\ns2,a,0,2.0\ns2,a,1,2.5\n'
    source = _write(tmp_path / 'eda.csv', text)
    target = tmp_path / 'copy.csv'

    write_eda_csv(load_eda_csv(source), target)

    assert target.read_bytes() == source.read_bytes()


def test_trim_lead_drops_floor_seconds_times_rate() -> None:
    signal = EdaSignal(subject_id='s1', song_id='a', samples=np.arange(2000.0))

    trimmed = trim_lead(signal, 15)

    assert trimmed.samples.size == 1250
    assert trimmed.samples[0] == 750.0
    assert trimmed.key == signal.key


def test_trim_lead_zero_is_identity() -> None:
    signal = EdaSignal(subject_id='s1', song_id='a', samples=np.ones(10))

    trimmed = trim_lead(signal, 0)

    assert trimmed is signal
    assert trimmed.samples.size == 10


def test_trim_lead_longer_than_signal_raises() -> None:
    signal = EdaSignal(subject_id='s1', song_id='a', samples=np.ones(100))

    with pytest.raises(SignalTooShortError):
        trim_lead(signal, 15)


def test_load_annotations_rejects_out_of_range(tmp_path: Path) -> None:
    path = _write(tmp_path / 'ann.csv', 'subject_id,song_id,valence,arousal\ns1,a,1.2,0.5\n')

    with pytest.raises(AnnotationRangeError) as excinfo:
        load_annotations(path)

    assert excinfo.value.axis == 'valence'


def test_load_annotations_rejects_duplicates(tmp_path: Path) -> None:
    path = _write(tmp_path / 'ann.csv', 'subject_id,song_id,valence,arousal\ns1,a,0.2,0.5\ns1,a,0.3,0.4\n')

    with pytest.raises(DuplicateAnnotationError):
        load_annotations(path)


def test_load_music_features_reads_dimension_from_header(tmp_path: Path) -> None:
    path = _write(tmp_path / 'music.csv', 'song_id,f0,f1,f2\na,1,2,3\nb,4,5,6\n')

    table = load_music_features(path)

    assert table.dimension == 3
    assert table.matrix(['b', 'a']).tolist() == [[4.0, 5.0, 6.0], [1.0, 2.0, 3.0]]


def _sources(songs: list[str]) -> tuple[list[EdaSignal], AnnotationSet, MusicFeatureTable]:
    signals = [EdaSignal(subject_id='s1', song_id=song, samples=np.ones(5)) for song in songs]
    annotations = AnnotationSet(entries={('s1', song): Annotation(valence=0.5, arousal=0.5) for song in songs})
    features = MusicFeatureTable(dimension=2, entries={song: np.zeros(2) for song in songs})
    return signals, annotations, features


def test_assemble_dataset_joins_all_sources() -> None:
    signals, annotations, features = _sources(['a', 'b', 'c'])

    dataset = assemble_dataset(signals, annotations, features)

    assert [item.key for item in dataset.items] == [('s1', 'a'), ('s1', 'b'), ('s1', 'c')]
    assert dataset.skip_report == ()
    assert not dataset.is_labelled


def test_assemble_dataset_reports_missing_annotation() -> None:
    signals, annotations, features = _sources(['a', 'b', 'c'])
    annotations = AnnotationSet(entries={k: v for k, v in annotations.entries.items() if k[1] != 'b'})

    dataset = assemble_dataset(signals, annotations, features)

    assert len(dataset.items) == 2
    assert len(dataset.skip_report) == 1
    assert dataset.skip_report[0].song_id == 'b'
    assert dataset.skip_report[0].reason == 'no annotation'


def test_assemble_dataset_is_order_independent() -> None:
    signals, annotations, features = _sources(['c', 'a', 'b'])

    forward = assemble_dataset(signals, annotations, features)
    backward = assemble_dataset(list(reversed(signals)), annotations, features)

    assert [item.key for item in forward.items] == [item.key for item in backward.items]


def test_signal_path_keeps_underscored_ids_apart(tmp_path: Path) -> None:
    first = signal_path(tmp_path, ('a_b', 'c'))
    second = signal_path(tmp_path, ('a', 'b_c'))

    assert first != second
    assert first == tmp_path / 'a_b' / 'c.csv'


@pytest.mark.parametrize('subject_id', ['', '..', 'a/b', 'a\\b'])
def test_eda_signal_rejects_ids_that_are_not_path_components(subject_id: str) -> None:
    with pytest.raises(ParameterError):
        EdaSignal(subject_id, 'a', np.ones(3))
