"""Domain types for EDA recordings and their CSV ingestion.

Three long-format CSV files feed the pipeline:

- `eda.csv`: `subject_id,song_id,sample_index,eda_us`, one sample per row,
  sorted by (subject_id, song_id, sample_index) with 0-based contiguous indices.
- `annotations.csv`: `subject_id,song_id,valence,arousal` with values in [0, 1].
- `music_features.csv`: `song_id,f0,...,f{D-1}`; D is read from the header.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from loguru import logger

from resin.errors import (
    AnnotationRangeError,
    CsvHeaderError,
    CsvParseError,
    DuplicateAnnotationError,
    FeatureDimensionError,
    InterleavedSignalError,
    ParameterError,
    SampleIndexGapError,
    SignalTooShortError,
)

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping
    from pathlib import Path

DATASET_RATE_HZ = 50.0
DEFAULT_MUSIC_DIM = 6373

EDA_HEADER = ('subject_id', 'song_id', 'sample_index', 'eda_us')
ANNOTATION_HEADER = ('subject_id', 'song_id', 'valence', 'arousal')

SignalKey = tuple[str, str]


def check_id(name: str, value: str) -> None:
    """Identifiers double as file and directory names, so they must be plain path components."""
    if not value or value in {'.', '..'} or any(sep in value for sep in ('/', '\\')):
        raise ParameterError(name, value, 'must be non-empty, not . or .., and free of path separators')


def signal_path(directory: Path, key: SignalKey, suffix: str = '.csv') -> Path:
    """Per-signal file `directory/<subject>/<song><suffix>`."""
    subject_id, song_id = key
    return directory / subject_id / f'{song_id}{suffix}'


def _frozen_array(values: object) -> np.ndarray:
    array = np.array(values, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class EdaSignal:
    """One subject x song skin-conductance recording.

    Attributes:
        subject_id: Subject identifier.
        song_id: Stimulus identifier.
        samples: Conductance values in microsiemens.
        sample_rate_hz: Sampling rate; 50 Hz for dataset recordings.
    """

    subject_id: str
    song_id: str
    samples: np.ndarray
    sample_rate_hz: float = DATASET_RATE_HZ

    def __post_init__(self) -> None:
        check_id('subject_id', self.subject_id)
        check_id('song_id', self.song_id)
        samples = _frozen_array(self.samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ParameterError('samples', samples.shape, 'must be a non-empty 1-D sequence')
        if not np.isfinite(samples).all():
            raise ParameterError('samples', 'non-finite', 'all samples must be finite')
        if not self.sample_rate_hz > 0:
            raise ParameterError('sample_rate_hz', self.sample_rate_hz, 'must be positive')
        object.__setattr__(self, 'samples', samples)

    @property
    def key(self) -> SignalKey:
        return (self.subject_id, self.song_id)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def with_samples(self, samples: np.ndarray) -> EdaSignal:
        """Return a copy carrying new samples and the same identifiers."""
        return replace(self, samples=samples)


@dataclass(frozen=True)
class Annotation:
    """Static valence/arousal rating of one clip by one subject."""

    valence: float
    arousal: float


@dataclass(frozen=True)
class AnnotationSet:
    """Per-(subject, song) static annotations, all within [0, 1]."""

    entries: Mapping[SignalKey, Annotation]

    def subjects(self) -> list[str]:
        return sorted({subject for subject, _ in self.entries})

    def for_subject(self, subject_id: str) -> dict[str, Annotation]:
        """Annotations of one subject keyed by song, in song order."""
        return {song: self.entries[(subject, song)] for subject, song in sorted(self.entries) if subject == subject_id}


@dataclass(frozen=True)
class MusicFeatureTable:
    """Precomputed acoustic feature vectors keyed by song."""

    dimension: int
    entries: Mapping[str, np.ndarray]

    def __post_init__(self) -> None:
        for song_id, vector in self.entries.items():
            if vector.shape != (self.dimension,):
                raise FeatureDimensionError(
                    expected=self.dimension,
                    found=vector.shape[0] if vector.ndim else 0,
                    where=f'music features of song {song_id!r}',
                )

    def matrix(self, song_ids: Iterable[str]) -> np.ndarray:
        """Stack the vectors of `song_ids` into an (n, dimension) matrix."""
        rows = [self.entries[song] for song in song_ids]
        if not rows:
            return np.zeros((0, self.dimension))
        return np.vstack(rows)


@dataclass(frozen=True)
class SkipEntry:
    """A (subject, song) pair dropped while assembling a dataset."""

    subject_id: str
    song_id: str
    reason: str


@dataclass(frozen=True)
class DatasetItem:
    """One labelled example.

    Attributes:
        signal: The (trimmed) EDA recording.
        valence: Static valence annotation in [0, 1].
        arousal: Static arousal annotation in [0, 1].
        valence_label: High/low valence bit, `None` until labelling runs.
        arousal_label: High/low arousal bit, `None` until labelling runs.
    """

    signal: EdaSignal
    valence: float
    arousal: float
    valence_label: int | None = None
    arousal_label: int | None = None

    @property
    def key(self) -> SignalKey:
        return self.signal.key

    @property
    def subject_id(self) -> str:
        return self.signal.subject_id

    @property
    def song_id(self) -> str:
        return self.signal.song_id

    def label(self, axis: str) -> int | None:
        return self.valence_label if axis == 'valence' else self.arousal_label


@dataclass(frozen=True)
class Dataset:
    """Items present in all three sources, ordered by (subject, song)."""

    items: tuple[DatasetItem, ...]
    features: MusicFeatureTable
    skip_report: tuple[SkipEntry, ...] = field(default=())

    @property
    def subjects(self) -> frozenset[str]:
        return frozenset(item.subject_id for item in self.items)

    @property
    def is_labelled(self) -> bool:
        return all(item.valence_label is not None and item.arousal_label is not None for item in self.items)

    def music_matrix(self, items: Iterable[DatasetItem] | None = None) -> np.ndarray:
        selected = self.items if items is None else items
        return self.features.matrix(item.song_id for item in selected)

    def subset(self, subjects: Iterable[str]) -> tuple[DatasetItem, ...]:
        """Items whose subject is in `subjects`, preserving dataset order."""
        wanted = set(subjects)
        return tuple(item for item in self.items if item.subject_id in wanted)


_PARSER_LINE_RE = re.compile(r'line (\d+)')


def _read_header(path: Path) -> list[str]:
    if not path.is_file():
        raise CsvParseError(path=path, line=0, reason='file not found')
    try:
        return [str(column) for column in pd.read_csv(path, nrows=0).columns]
    except pd.errors.EmptyDataError:
        return []


def _locate_bad_value(path: Path, dtypes: Mapping[str, type]) -> CsvParseError:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    for row, values in enumerate(frame.itertuples(index=False), start=2):
        record = values._asdict()
        for column, kind in dtypes.items():
            raw = record.get(column, '')
            try:
                kind(raw)
            except (TypeError, ValueError):
                return CsvParseError(
                    path=path,
                    line=row,
                    reason=f'{column}={raw!r} is not a valid {kind.__name__}',
                )
    return CsvParseError(path=path, line=0, reason='unparseable content')


def read_table(path: Path, *, header: tuple[str, ...], dtypes: Mapping[str, type]) -> pd.DataFrame:
    """Read a CSV whose header must equal `header`, parsing columns as `dtypes`.

    Raises:
        CsvHeaderError: If the header differs.
        CsvParseError: If the file is missing or a row is malformed; carries the line number.
    """
    found = _read_header(path)
    if tuple(found) != header:
        raise CsvHeaderError(path=path, expected=header, found=found)
    try:
        frame = pd.read_csv(
            path,
            dtype={column: ('string' if kind is str else kind) for column, kind in dtypes.items()},
            float_precision='round_trip',
            keep_default_na=False,
            na_values=[''],
        )
    except pd.errors.ParserError as exc:
        match = _PARSER_LINE_RE.search(str(exc))
        line = int(match.group(1)) if match else 0
        raise CsvParseError(path=path, line=line, reason='wrong number of fields') from exc
    except (TypeError, ValueError) as exc:
        raise _locate_bad_value(path, dtypes) from exc

    missing = frame.isna().any(axis=1).to_numpy()
    if missing.any():
        row = int(np.flatnonzero(missing)[0])
        raise CsvParseError(path=path, line=row + 2, reason='missing field')
    return frame


def load_eda_csv(path: Path) -> list[EdaSignal]:
    """Load long-format EDA samples, one signal per (subject, song) group.

    Args:
        path: Path to an `eda.csv` file.

    Returns:
        The signals in file order.

    Raises:
        CsvHeaderError: If the header is not `subject_id,song_id,sample_index,eda_us`.
        CsvParseError: If a row is malformed or a sample is not finite.
        SampleIndexGapError: If a group's sample_index is not 0, 1, 2, ...
        InterleavedSignalError: If the rows of one signal are not contiguous.
        ParameterError: If an identifier is not usable as a file name.
    """
    frame = read_table(
        path,
        header=EDA_HEADER,
        dtypes={'subject_id': str, 'song_id': str, 'sample_index': int, 'eda_us': float},
    )
    keys = frame['subject_id'] + '\x00' + frame['song_id']
    run_starts = keys[keys.ne(keys.shift())]
    resumed = run_starts[run_starts.duplicated()]
    if not resumed.empty:
        row = int(resumed.index[0])
        raise InterleavedSignalError(
            subject_id=str(frame.at[row, 'subject_id']),
            song_id=str(frame.at[row, 'song_id']),
            line=row + 2,
        )
    signals: list[EdaSignal] = []
    for (subject_id, song_id), group in frame.groupby(['subject_id', 'song_id'], sort=False):
        indices = group['sample_index'].to_numpy()
        gaps = np.flatnonzero(indices != np.arange(indices.size))
        if gaps.size:
            first = int(gaps[0])
            raise SampleIndexGapError(
                subject_id=str(subject_id),
                song_id=str(song_id),
                expected=first,
                found=int(indices[first]),
            )
        samples = group['eda_us'].to_numpy(dtype=np.float64)
        bad = np.flatnonzero(~np.isfinite(samples))
        if bad.size:
            raise CsvParseError(path=path, line=int(group.index[bad[0]]) + 2, reason='eda_us is not finite')
        signals.append(EdaSignal(subject_id=str(subject_id), song_id=str(song_id), samples=samples))
    logger.info('Loaded {} EDA signal(s) from {}', len(signals), path)
    return signals


def write_eda_csv(signals: Iterable[EdaSignal], path: Path) -> None:
    """Write signals in the canonical long format read by `load_eda_csv`."""
    frames = [
        pd.DataFrame(
            {
                'subject_id': signal.subject_id,
                'song_id': signal.song_id,
                'sample_index': np.arange(signal.samples.size),
                'eda_us': signal.samples,
            },
        )
        for signal in signals
    ]
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=list(EDA_HEADER))
    frame.to_csv(path, index=False, lineterminator='\n')


def trim_lead(signal: EdaSignal, seconds: float) -> EdaSignal:
    """Drop the first `seconds` of a signal.

    Args:
        signal: The signal to trim.
        seconds: Non-negative lead duration; floor(seconds x rate) samples are removed.

    Returns:
        The trimmed signal with identifiers preserved.

    Raises:
        ParameterError: If `seconds` is negative.
        SignalTooShortError: If nothing would remain after trimming.
    """
    if seconds < 0:
        raise ParameterError('seconds', seconds, 'must be non-negative')
    drop = math.floor(seconds * signal.sample_rate_hz + 1e-9)
    if drop >= signal.samples.size:
        raise SignalTooShortError(
            length=int(signal.samples.size),
            required=drop + 1,
            operation=f'Trimming {seconds} s',
        )
    if drop == 0:
        return signal
    return signal.with_samples(signal.samples[drop:])


def load_annotations(path: Path) -> AnnotationSet:
    """Load static V/A annotations.

    Raises:
        DuplicateAnnotationError: If a (subject, song) pair appears twice.
        AnnotationRangeError: If a value is outside [0, 1].
    """
    frame = read_table(
        path,
        header=ANNOTATION_HEADER,
        dtypes={'subject_id': str, 'song_id': str, 'valence': float, 'arousal': float},
    )
    entries: dict[SignalKey, Annotation] = {}
    for subject_id, song_id, valence, arousal in frame.itertuples(index=False):
        key = (str(subject_id), str(song_id))
        if key in entries:
            raise DuplicateAnnotationError(subject_id=key[0], song_id=key[1])
        for axis, value in (('valence', valence), ('arousal', arousal)):
            if not 0.0 <= value <= 1.0:
                raise AnnotationRangeError(subject_id=key[0], song_id=key[1], axis=axis, value=float(value))
        entries[key] = Annotation(valence=float(valence), arousal=float(arousal))
    return AnnotationSet(entries=entries)


def write_annotations_csv(annotations: AnnotationSet, path: Path) -> None:
    rows = [
        (subject, song, value.valence, value.arousal) for (subject, song), value in sorted(annotations.entries.items())
    ]
    pd.DataFrame(rows, columns=list(ANNOTATION_HEADER)).to_csv(path, index=False, lineterminator='\n')


def load_music_features(path: Path) -> MusicFeatureTable:
    """Load precomputed music features; the dimension comes from the header.

    Raises:
        CsvHeaderError: If the header is not `song_id,f0,...,f{D-1}`.
        CsvParseError: If a value is not finite or a song appears twice.
    """
    found = _read_header(path)
    dimension = max(len(found) - 1, 0)
    header = ('song_id', *(f'f{i}' for i in range(dimension)))
    frame = read_table(
        path,
        header=header,
        dtypes={'song_id': str, **dict.fromkeys(header[1:], float)},
    )
    values = frame[list(header[1:])].to_numpy(dtype=np.float64)
    entries: dict[str, np.ndarray] = {}
    for row, song_id in enumerate(frame['song_id']):
        if song_id in entries:
            raise CsvParseError(path=path, line=row + 2, reason=f'duplicate song_id {song_id!r}')
        if not np.isfinite(values[row]).all():
            raise CsvParseError(path=path, line=row + 2, reason='non-finite feature value')
        entries[str(song_id)] = _frozen_array(values[row])
    return MusicFeatureTable(dimension=dimension, entries=entries)


def write_music_features_csv(table: MusicFeatureTable, path: Path) -> None:
    songs = sorted(table.entries)
    frame = pd.DataFrame(table.matrix(songs), columns=[f'f{i}' for i in range(table.dimension)])
    frame.insert(0, 'song_id', songs)
    frame.to_csv(path, index=False, lineterminator='\n')


def assemble_dataset(
    signals: Iterable[EdaSignal],
    annotations: AnnotationSet,
    features: MusicFeatureTable,
) -> Dataset:
    """Join signals, annotations and music features on (subject, song).

    Only pairs present in all three sources become items; every other pair is listed in
    the skip report. Items are ordered by (subject, song) so the result does not depend
    on input order.
    """
    by_key = {signal.key: signal for signal in signals}
    skipped: list[SkipEntry] = []
    items: list[DatasetItem] = []
    for key in sorted(by_key):
        annotation = annotations.entries.get(key)
        if annotation is None:
            skipped.append(SkipEntry(*key, reason='no annotation'))
            continue
        if key[1] not in features.entries:
            skipped.append(SkipEntry(*key, reason='no music feature vector'))
            continue
        items.append(DatasetItem(signal=by_key[key], valence=annotation.valence, arousal=annotation.arousal))
    skipped.extend(SkipEntry(*key, reason='no EDA signal') for key in sorted(annotations.entries) if key not in by_key)
    if skipped:
        logger.warning('Skipped {} (subject, song) pair(s) missing from a source', len(skipped))
    return Dataset(items=tuple(items), features=features, skip_report=tuple(skipped))
