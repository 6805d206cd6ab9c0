from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class ResinError(RuntimeError):
    """Base error for resin."""

    exit_code: int = EXIT_DATA


class DataError(ResinError):
    """Base for errors caused by input data or configuration."""

    exit_code = EXIT_DATA


class NumericalError(ResinError):
    """Base for errors raised when a computation fails numerically."""

    exit_code = EXIT_NUMERICAL


class ParameterError(DataError):
    """Raised when a function parameter violates its documented range."""

    name: str
    value: object

    def __init__(self, name: str, value: object, requirement: str) -> None:
        self.name = name
        self.value = value
        super().__init__(f'Invalid {name}={value!r}: {requirement}.')


class CsvParseError(DataError):
    """Raised when a CSV row cannot be parsed."""

    path: Path
    line: int

    def __init__(self, *, path: Path, line: int, reason: str) -> None:
        self.path = path
        self.line = line
        super().__init__(f'{path}:{line}: {reason}')


class CsvHeaderError(DataError):
    """Raised when a CSV file does not carry the expected header."""

    path: Path

    def __init__(self, *, path: Path, expected: Sequence[str], found: Sequence[str]) -> None:
        self.path = path
        super().__init__(
            f'{path}: expected header {",".join(expected)!r}; got {",".join(found)!r}.',
        )


class SampleIndexGapError(DataError):
    """Raised when a signal's sample_index sequence is not contiguous."""

    subject_id: str
    song_id: str
    expected: int
    found: int

    def __init__(self, *, subject_id: str, song_id: str, expected: int, found: int) -> None:
        self.subject_id = subject_id
        self.song_id = song_id
        self.expected = expected
        self.found = found
        super().__init__(
            f'Signal ({subject_id}, {song_id}): sample_index gap, expected {expected} but found {found}.',
        )


class InterleavedSignalError(DataError):
    """Raised when the rows of one signal are split by rows of another."""

    subject_id: str
    song_id: str
    line: int

    def __init__(self, *, subject_id: str, song_id: str, line: int) -> None:
        self.subject_id = subject_id
        self.song_id = song_id
        self.line = line
        super().__init__(
            f'Signal ({subject_id}, {song_id}) resumes at line {line} after rows of another signal; '
            'rows of one signal must be contiguous.',
        )


class AnnotationRangeError(DataError):
    """Raised when an annotation value falls outside [0, 1]."""

    subject_id: str
    song_id: str
    axis: str
    value: float

    def __init__(self, *, subject_id: str, song_id: str, axis: str, value: float) -> None:
        self.subject_id = subject_id
        self.song_id = song_id
        self.axis = axis
        self.value = value
        super().__init__(
            f'Annotation ({subject_id}, {song_id}) {axis}={value} is outside [0, 1].',
        )


class DuplicateAnnotationError(DataError):
    """Raised when a (subject, song) pair is annotated more than once."""

    subject_id: str
    song_id: str

    def __init__(self, *, subject_id: str, song_id: str) -> None:
        self.subject_id = subject_id
        self.song_id = song_id
        super().__init__(f'Duplicate annotation for ({subject_id}, {song_id}).')


class FeatureDimensionError(DataError):
    """Raised when feature vectors do not share the declared dimension."""

    expected: int
    found: int

    def __init__(self, *, expected: int, found: int, where: str) -> None:
        self.expected = expected
        self.found = found
        super().__init__(f'{where}: expected dimension {expected}; got {found}.')


class SignalTooShortError(DataError):
    """Raised when a signal is shorter than an operation requires."""

    length: int
    required: int

    def __init__(self, *, length: int, required: int, operation: str) -> None:
        self.length = length
        self.required = required
        super().__init__(
            f'{operation} needs at least {required} samples; signal has {length}.',
        )


class MissingThresholdError(DataError):
    """Raised when a subject has annotations but no computed threshold."""

    subject_id: str

    def __init__(self, subject_id: str) -> None:
        self.subject_id = subject_id
        super().__init__(f'No threshold computed for subject {subject_id!r}.')


class DegenerateValuesError(DataError):
    """Raised when 2-means is asked to split values that are all identical."""

    value: float

    def __init__(self, value: float) -> None:
        self.value = value
        super().__init__(f'All values equal {value}; there is no 2-means split.')


class SingleClassError(DataError):
    """Raised when a classifier is trained on a single class."""

    label: int

    def __init__(self, label: int) -> None:
        self.label = label
        super().__init__(f'Training labels contain only class {label}; both classes are required.')


class TooFewSubjectsError(DataError):
    """Raised when there are fewer subjects than cross-validation folds."""

    subjects: int
    folds: int

    def __init__(self, *, subjects: int, folds: int) -> None:
        self.subjects = subjects
        self.folds = folds
        super().__init__(f'Cannot split {subjects} subject(s) into {folds} folds.')


class LeakageError(DataError):
    """Raised when a fold's learned statistics do not come from its training subjects alone."""

    fold: int
    axis: str
    statistic: str

    def __init__(self, *, fold: int, axis: str, statistic: str) -> None:
        self.fold = fold
        self.axis = axis
        self.statistic = statistic
        super().__init__(
            f'Leakage audit failed for fold {fold} ({axis}): {statistic} do not match the training subjects.',
        )


class ConfigError(DataError):
    """Raised when the configuration file is missing or invalid."""

    def __init__(self, message: str) -> None:
        super().__init__(f'Invalid configuration: {message}')


class ShapeMismatchError(NumericalError):
    """Raised when array dimensions do not agree."""

    def __init__(self, *, what: str, expected: object, found: object) -> None:
        super().__init__(f'{what}: expected shape {expected}; got {found}.')


class QpSizeError(NumericalError):
    """Raised when the dense reference solver is given a problem that is too large."""

    size: int
    limit: int

    def __init__(self, *, size: int, limit: int) -> None:
        self.size = size
        self.limit = limit
        super().__init__(f'Dense reference solver limited to {limit} variables; got {size}.')


class DecompositionError(NumericalError):
    """Raised when the cvxEDA quadratic program is not solved."""

    status: str

    def __init__(self, *, status: str, subject_id: str, song_id: str) -> None:
        self.status = status
        super().__init__(
            f'Decomposition of ({subject_id}, {song_id}) failed: solver status {status!r}.',
        )


class NonFiniteLossError(NumericalError):
    """Raised when training produces a NaN or infinite loss."""

    iteration: int
    lr: float

    def __init__(self, *, iteration: int, lr: float, loss: float) -> None:
        self.iteration = iteration
        self.lr = lr
        super().__init__(
            f'Training loss became {loss} at iteration {iteration} (lr={lr:g}); '
            'lower train.lr0 or check inputs for non-finite values.',
        )


class CheckpointError(DataError):
    """Raised when a model checkpoint cannot be read."""

    path: Path

    def __init__(self, *, path: Path, reason: str) -> None:
        self.path = path
        super().__init__(f'Cannot load checkpoint {path}: {reason}')
