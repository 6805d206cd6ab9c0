"""Cross-validation harness and its reports.

Each (fold, axis) cell trains its own model on the training subjects of the fold. All
learned state (channel means, head z-score statistics, weights) comes from the training
subjects; labels come from per-subject thresholds over all of a subject's ratings.
"""

from __future__ import annotations

import dataclasses
import functools
import hashlib
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel

from resin.baselines import BaselineConfig, music_svm_fold
from resin.errors import LeakageError, ParameterError, ResinError
from resin.folds import FoldPlan, make_folds
from resin.imaging import IMAGE_SIZE, ChannelMode, compute_channel_means, make_image_tensor
from resin.labeling import AXES
from resin.metrics import ClassificationMetrics
from resin.nn.checkpoint import LOSS_CURVE_HEADER, write_loss_curve_csv
from resin.nn.fusion import HEAD_HIDDEN, FeatureMode, ResSin
from resin.nn.resnet import ResSiConfig
from resin.nn.train import LossPoint, TrainConfig, TrainingSet, evaluate, train

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping, Sequence
    from pathlib import Path

    from resin.cvxeda import ComponentChannels
    from resin.signals import Dataset, DatasetItem, SignalKey

METRIC_NAMES = ('accuracy', 'f1', 'precision', 'recall')
METRICS_HEADER = ('fold', 'axis', *METRIC_NAMES)
TABLE2_HEADER = ('axis', 'method', 'channel_mode', 'feature_mode', *METRIC_NAMES)
REFERENCE_BAND = 0.05

# Published mix + fusion results on the full dataset; compared for information only.
REFERENCE_ROWS: dict[str, dict[str, float]] = {
    'valence': {'accuracy': 0.7343, 'f1': 0.7754},
    'arousal': {'accuracy': 0.7365, 'f1': 0.7856},
}

METHOD_NAMES = {
    FeatureMode.eda_only: 'res-si eda',
    FeatureMode.music_only: 'res-sin music',
    FeatureMode.fusion: 'res-sin fusion',
}
SVM_METHOD = 'svm music'


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a cross-validation run depends on besides the data.

    `res_si.in_channels` is replaced by the depth of `channel_mode`; `train.seed` is
    replaced by a seed derived from `seed`, the fold and the axis.
    """

    channel_mode: ChannelMode = ChannelMode.mix
    feature_mode: FeatureMode = FeatureMode.fusion
    folds: int = 10
    seed: int = 0
    image_size: int = IMAGE_SIZE
    res_si: ResSiConfig = ResSiConfig()
    hidden: int = HEAD_HIDDEN
    train: TrainConfig = TrainConfig()
    baseline: BaselineConfig = BaselineConfig()
    settings_echo: dict[str, Any] = field(default_factory=dict)

    @property
    def network(self) -> ResSiConfig:
        return dataclasses.replace(self.res_si, in_channels=self.channel_mode.depth)


def derive_seed(seed: int, *parts: int) -> int:
    """Independent 32-bit seed for a sub-task, fixed by the root seed and `parts`."""
    return int(np.random.SeedSequence([seed, *parts]).generate_state(1)[0])


def digest(*arrays: np.ndarray) -> str:
    """sha256 over the float64 bytes of `arrays`."""
    hasher = hashlib.sha256()
    for array in arrays:
        hasher.update(np.ascontiguousarray(array, dtype=np.float64).tobytes())
    return hasher.hexdigest()


def split_items(dataset: Dataset, plan: FoldPlan, fold: int) -> tuple[tuple[DatasetItem, ...], tuple[DatasetItem, ...]]:
    """(train, test) items of `fold`, each in dataset order."""
    return dataset.subset(plan.train_subjects(fold)), dataset.subset(plan.test_subjects(fold))


def build_images(
    items: Sequence[DatasetItem],
    channels: Mapping[SignalKey, ComponentChannels],
    means: np.ndarray,
    config: ExperimentConfig,
) -> np.ndarray | None:
    """Evaluation-view image tensors for `items`, or `None` when the mode ignores EDA."""
    if not config.feature_mode.uses_eda:
        return None
    if not items:
        size = config.image_size
        return np.zeros((0, config.channel_mode.depth, size, size))
    return np.stack(
        [
            make_image_tensor(
                channels[item.key],
                means,
                mode=config.channel_mode,
                image_size=config.image_size,
                crop_pad=config.train.crop_pad,
            )
            for item in items
        ],
    )


def channel_means_for(
    items: Sequence[DatasetItem],
    channels: Mapping[SignalKey, ComponentChannels],
    config: ExperimentConfig,
) -> np.ndarray:
    return compute_channel_means(
        [channels[item.key] for item in items],
        mode=config.channel_mode,
        image_size=config.image_size,
    )


def training_set(
    dataset: Dataset,
    items: Sequence[DatasetItem],
    images: np.ndarray | None,
    config: ExperimentConfig,
    axis: str,
) -> TrainingSet:
    labels = [item.label(axis) for item in items]
    if any(label is None for label in labels):
        raise ParameterError('dataset', 'unlabelled', 'run labelling first')
    music = dataset.music_matrix(items) if config.feature_mode.uses_music else None
    return TrainingSet(images=images, music=music, labels=np.asarray(labels, dtype=np.int64))


def new_model(config: ExperimentConfig, music_dim: int, seed: int) -> ResSin:
    return ResSin(
        res_si=config.network,
        music_dim=music_dim,
        feature_mode=config.feature_mode,
        hidden=config.hidden,
        rng=np.random.default_rng(seed),
    )


@dataclass
class FittedModel:
    """A trained model with the channel means its inputs were centred on."""

    model: ResSin
    channel_means: np.ndarray
    losses: list[LossPoint]
    seed: int


def fit_model(
    dataset: Dataset,
    channels: Mapping[SignalKey, ComponentChannels],
    items: Sequence[DatasetItem],
    config: ExperimentConfig,
    *,
    axis: str,
    seed: int,
) -> FittedModel:
    """Train one model for `axis` on `items`; every learned statistic comes from `items`."""
    means = channel_means_for(items, channels, config)
    data = training_set(dataset, items, build_images(items, channels, means, config), config, axis)
    model = new_model(config, dataset.features.dimension, seed)
    result = train(model, data, dataclasses.replace(config.train, seed=seed))
    return FittedModel(model=model, channel_means=means, losses=result.losses, seed=seed)


class MetricsRecord(BaseModel):
    accuracy: float
    f1: float
    precision: float
    recall: float

    @classmethod
    def of(cls, metrics: ClassificationMetrics) -> MetricsRecord:
        return cls(**metrics.as_dict())

    @classmethod
    def mean(cls, records: Sequence[MetricsRecord]) -> MetricsRecord:
        return cls(**{name: float(np.mean([getattr(r, name) for r in records])) for name in METRIC_NAMES})


class AuditRecord(BaseModel):
    """Learned statistics checked against training-only and leaky recomputations.

    `*_match` holds when the fitted statistics equal those recomputed from the training
    subjects; `*_leak_free` holds when they differ from those recomputed with the test
    subjects included (vacuously, when both recomputations agree).
    """

    channel_means_sha256: str
    head_stats_sha256: str
    channel_means_match: bool
    channel_means_leak_free: bool
    head_stats_match: bool
    head_stats_leak_free: bool
    disjoint_subjects: bool

    @property
    def passed(self) -> bool:
        return (
            self.disjoint_subjects
            and self.channel_means_match
            and self.channel_means_leak_free
            and self.head_stats_match
            and self.head_stats_leak_free
        )

    @property
    def failed_statistic(self) -> str | None:
        if not self.disjoint_subjects:
            return 'fold subjects'
        if not (self.channel_means_match and self.channel_means_leak_free):
            return 'channel means'
        if not (self.head_stats_match and self.head_stats_leak_free):
            return 'head statistics'
        return None


class FoldRecord(BaseModel):
    fold: int
    axis: str
    seed: int
    train_subjects: int
    test_subjects: int
    test_items: int
    final_loss: float
    metrics: MetricsRecord
    audit: AuditRecord
    audit_passed: bool


class ErrorRecord(BaseModel):
    fold: int
    axis: str
    error: str
    exit_code: int


class ReferenceComparison(BaseModel):
    axis: str
    metric: str
    reference: float
    observed: float
    within_band: bool


class CvReport(BaseModel):
    """Everything `report.json` holds; no timestamps so equal seeds give equal files."""

    channel_mode: ChannelMode
    feature_mode: FeatureMode
    folds: int
    seed: int
    records: list[FoldRecord]
    means: dict[str, MetricsRecord]
    errors: list[ErrorRecord]
    audit_passed: bool
    reference: list[ReferenceComparison] = []
    settings: dict[str, Any] = {}

    @property
    def exit_code(self) -> int:
        return self.errors[0].exit_code if self.errors else 0


@dataclass
class CvOutcome:
    report: CvReport
    losses: dict[tuple[int, str], list[LossPoint]]


def _tolerances(dtype: np.dtype) -> dict[str, float]:
    return {'rtol': 1e-9, 'atol': 1e-12} if dtype == np.float64 else {'rtol': 1e-4, 'atol': 1e-6}


def _pixel_means(
    items: Sequence[DatasetItem],
    channels: Mapping[SignalKey, ComponentChannels],
    config: ExperimentConfig,
) -> np.ndarray:
    """Mean pixel of each plane of the uncentred evaluation views of `items`."""
    depth = config.channel_mode.depth
    if not items:
        return np.zeros(depth)
    views = np.stack(
        [
            make_image_tensor(
                channels[item.key],
                np.zeros(depth),
                mode=config.channel_mode,
                image_size=config.image_size,
                crop_pad=config.train.crop_pad,
            )
            for item in items
        ],
    )
    return views.mean(axis=(0, 2, 3))


def _feature_stats(
    dataset: Dataset,
    items: Sequence[DatasetItem],
    channels: Mapping[SignalKey, ComponentChannels],
    means: np.ndarray,
    config: ExperimentConfig,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Population mean and std of the head inputs of a freshly initialised model over `items`."""
    dtype = np.dtype(config.train.dtype)
    model = new_model(config, dataset.features.dimension, seed)
    model.astype(dtype)
    images = build_images(items, channels, means, config)
    music = dataset.music_matrix(items) if config.feature_mode.uses_music else None
    step = config.train.batch_size
    features = np.concatenate(
        [
            model.features(
                images[start : start + step].astype(dtype) if images is not None else None,
                music[start : start + step].astype(dtype) if music is not None else None,
            )
            for start in range(0, len(items), step)
        ],
    ).astype(np.float64)
    return features.mean(axis=0), features.std(axis=0)


def audit_fold(
    dataset: Dataset,
    channels: Mapping[SignalKey, ComponentChannels],
    plan: FoldPlan,
    fold: int,
    fitted: FittedModel,
    config: ExperimentConfig,
    *,
    axis: str,
) -> AuditRecord:
    """Check that the fitted channel means and head statistics come from the training subjects only.

    Both statistics are recomputed from the training items and again from the training
    and test items together. The fitted values must match the first and, where the two
    recomputations differ, must not match the second.

    Raises:
        LeakageError: If any check fails.
    """
    train_subjects = set(plan.train_subjects(fold))
    test_subjects = set(plan.test_subjects(fold))
    train_items = dataset.subset(train_subjects)
    all_items = dataset.subset(train_subjects | test_subjects)

    clean_means = _pixel_means(train_items, channels, config)
    leaky_means = _pixel_means(all_items, channels, config)
    means_close = functools.partial(np.allclose, **_tolerances(np.dtype(np.float64)))
    means_distinct = not means_close(clean_means, leaky_means)

    clean_stats = np.concatenate(_feature_stats(dataset, train_items, channels, clean_means, config, fitted.seed))
    leaky_stats = np.concatenate(_feature_stats(dataset, all_items, channels, leaky_means, config, fitted.seed))
    stats_close = functools.partial(np.allclose, **_tolerances(np.dtype(config.train.dtype)))
    stats_distinct = not stats_close(clean_stats, leaky_stats)

    head = fitted.model.head.stats
    fitted_stats = np.concatenate([head.mean, head.std])
    record = AuditRecord(
        channel_means_sha256=digest(fitted.channel_means),
        head_stats_sha256=digest(head.mean, head.std),
        channel_means_match=means_close(fitted.channel_means, clean_means),
        channel_means_leak_free=not (means_distinct and means_close(fitted.channel_means, leaky_means)),
        head_stats_match=fitted_stats.shape == clean_stats.shape and stats_close(fitted_stats, clean_stats),
        head_stats_leak_free=not (
            stats_distinct and fitted_stats.shape == leaky_stats.shape and stats_close(fitted_stats, leaky_stats)
        ),
        disjoint_subjects=train_subjects.isdisjoint(test_subjects),
    )
    if not means_distinct or not stats_distinct:
        logger.debug('Fold {} ({}): test subjects leave some statistics unchanged', fold, axis)
    failed = record.failed_statistic
    if failed is not None:
        raise LeakageError(fold=fold, axis=axis, statistic=failed)
    return record


def run_fold(
    dataset: Dataset,
    channels: Mapping[SignalKey, ComponentChannels],
    plan: FoldPlan,
    fold: int,
    axis: str,
    config: ExperimentConfig,
) -> tuple[FoldRecord, list[LossPoint]]:
    train_items, test_items = split_items(dataset, plan, fold)
    seed = derive_seed(config.seed, fold, AXES.index(axis))
    fitted = fit_model(dataset, channels, train_items, config, axis=axis, seed=seed)
    test_images = build_images(test_items, channels, fitted.channel_means, config)
    metrics = evaluate(fitted.model, training_set(dataset, test_items, test_images, config, axis))
    audit = audit_fold(dataset, channels, plan, fold, fitted, config, axis=axis)
    record = FoldRecord(
        fold=fold,
        axis=axis,
        seed=seed,
        train_subjects=len(plan.train_subjects(fold)),
        test_subjects=len(plan.test_subjects(fold)),
        test_items=len(test_items),
        final_loss=fitted.losses[-1].loss if fitted.losses else float('nan'),
        metrics=MetricsRecord.of(metrics),
        audit=audit,
        audit_passed=audit.passed,
    )
    return record, fitted.losses


def compare_to_reference(means: Mapping[str, MetricsRecord]) -> list[ReferenceComparison]:
    """Advisory comparison of mean metrics with the published mix + fusion rows."""
    comparisons = []
    for axis, reference in REFERENCE_ROWS.items():
        if axis not in means:
            continue
        for metric, value in reference.items():
            observed = getattr(means[axis], metric)
            comparisons.append(
                ReferenceComparison(
                    axis=axis,
                    metric=metric,
                    reference=value,
                    observed=observed,
                    within_band=abs(observed - value) <= REFERENCE_BAND,
                ),
            )
    for comparison in comparisons:
        if not comparison.within_band:
            logger.info(
                '{} {} is {:.4f}; published {:.4f} (advisory only)',
                comparison.axis,
                comparison.metric,
                comparison.observed,
                comparison.reference,
            )
    return comparisons


def run_cv(
    dataset: Dataset,
    channels: Mapping[SignalKey, ComponentChannels],
    config: ExperimentConfig,
    *,
    plan: FoldPlan | None = None,
    axes: Sequence[str] = AXES,
) -> CvOutcome:
    """k-fold cross-validation over subjects for the configured channel and feature modes.

    A failing (fold, axis) cell is recorded in `errors` and the run continues, so the
    report always holds every result that could be computed.

    Raises:
        ParameterError: If the dataset is not labelled.
        TooFewSubjectsError: If there are fewer subjects than folds.
    """
    if not dataset.is_labelled:
        raise ParameterError('dataset', 'unlabelled', 'run labelling first')
    plan = plan or make_folds(dataset.subjects, config.folds, config.seed)
    logger.info(
        'Cross-validating {} subject(s) in {} subject-disjoint folds ({} / {})',
        len(dataset.subjects),
        plan.k,
        config.channel_mode,
        config.feature_mode,
    )
    records: list[FoldRecord] = []
    errors: list[ErrorRecord] = []
    leaked = False
    losses: dict[tuple[int, str], list[LossPoint]] = {}
    for fold in range(plan.k):
        for axis in axes:
            try:
                record, curve = run_fold(dataset, channels, plan, fold, axis, config)
            except ResinError as exc:
                logger.error('Fold {} ({}) failed: {}', fold, axis, exc)
                errors.append(ErrorRecord(fold=fold, axis=axis, error=str(exc), exit_code=exc.exit_code))
                leaked |= isinstance(exc, LeakageError)
                continue
            records.append(record)
            losses[fold, axis] = curve
            logger.info('Fold {} {}: accuracy {:.4f}', fold, axis, record.metrics.accuracy)

    means = {
        axis: MetricsRecord.mean([r.metrics for r in records if r.axis == axis])
        for axis in axes
        if any(r.axis == axis for r in records)
    }
    reference = (
        compare_to_reference(means)
        if config.channel_mode is ChannelMode.mix and config.feature_mode is FeatureMode.fusion
        else []
    )
    report = CvReport(
        channel_mode=config.channel_mode,
        feature_mode=config.feature_mode,
        folds=plan.k,
        seed=config.seed,
        records=records,
        means=means,
        errors=errors,
        audit_passed=not leaked and all(r.audit_passed for r in records),
        reference=reference,
        settings=config.settings_echo,
    )
    return CvOutcome(report=report, losses=losses)


def write_metrics_csv(records: Iterable[FoldRecord], path: Path) -> None:
    rows = [(r.fold, r.axis, *(getattr(r.metrics, name) for name in METRIC_NAMES)) for r in records]
    pd.DataFrame(rows, columns=list(METRICS_HEADER)).to_csv(path, index=False, lineterminator='\n')


def mean_loss_curve(losses: Mapping[tuple[int, str], list[LossPoint]]) -> pd.DataFrame:
    """Per-iteration mean of the (fold, axis) loss curves, as `iter,loss,lr` rows."""
    rows = [(point.iteration, point.loss, point.lr) for curve in losses.values() for point in curve]
    frame = pd.DataFrame(rows, columns=list(LOSS_CURVE_HEADER))
    return frame.groupby('iter', as_index=False, sort=True).mean()


def write_loss_curves_csv(losses: Mapping[tuple[int, str], list[LossPoint]], directory: Path) -> None:
    """Write the mean curve to `loss_curve.csv` and each cell to `loss_curves/fold<k>_<axis>.csv`."""
    mean_loss_curve(losses).to_csv(directory / 'loss_curve.csv', index=False, lineterminator='\n')
    cells = directory / 'loss_curves'
    cells.mkdir(exist_ok=True)
    for (fold, axis), curve in sorted(losses.items()):
        write_loss_curve_csv(curve, cells / f'fold{fold}_{axis}.csv')


def write_cv_outputs(outcome: CvOutcome, directory: Path) -> None:
    """Write report.json, metrics.csv and the loss curves into `directory`."""
    directory.mkdir(parents=True, exist_ok=True)
    (directory / 'report.json').write_text(outcome.report.model_dump_json(indent=2) + '\n', encoding='utf-8')
    write_metrics_csv(outcome.report.records, directory / 'metrics.csv')
    write_loss_curves_csv(outcome.losses, directory)


class Table2Row(BaseModel):
    axis: str
    method: str
    channel_mode: str
    feature_mode: str
    metrics: MetricsRecord


def sweep_modes() -> list[tuple[ChannelMode, FeatureMode]]:
    """Every EDA-using channel mode with and without music, plus music alone."""
    modes = [(channel, feature) for feature in (FeatureMode.eda_only, FeatureMode.fusion) for channel in ChannelMode]
    modes.append((ChannelMode.mix, FeatureMode.music_only))
    return modes


def run_sweep(
    dataset: Dataset,
    channels: Mapping[SignalKey, ComponentChannels],
    config: ExperimentConfig,
) -> tuple[list[Table2Row], list[CvOutcome]]:
    """Cross-validate every mode combination and the music SVM on a shared fold plan.

    Returns:
        The comparison rows (by axis, then method) and each combination's outcome.
    """
    plan = make_folds(dataset.subjects, config.folds, config.seed)
    rows: list[Table2Row] = []
    outcomes: list[CvOutcome] = []
    for channel_mode, feature_mode in sweep_modes():
        run_config = dataclasses.replace(config, channel_mode=channel_mode, feature_mode=feature_mode)
        outcome = run_cv(dataset, channels, run_config, plan=plan)
        outcomes.append(outcome)
        for axis, mean in outcome.report.means.items():
            rows.append(
                Table2Row(
                    axis=axis,
                    method=METHOD_NAMES[feature_mode],
                    channel_mode='-' if feature_mode is FeatureMode.music_only else channel_mode.value,
                    feature_mode=feature_mode.value,
                    metrics=mean,
                ),
            )
    for axis in AXES:
        folds = []
        for fold in range(plan.k):
            try:
                folds.append(MetricsRecord.of(music_svm_fold(dataset, plan, fold, axis, config.baseline)))
            except ResinError as exc:
                logger.error('Music SVM fold {} ({}) failed: {}', fold, axis, exc)
        if not folds:
            logger.error('Music SVM produced no fold for {}; row skipped', axis)
            continue
        rows.append(
            Table2Row(
                axis=axis,
                method=SVM_METHOD,
                channel_mode='-',
                feature_mode=FeatureMode.music_only.value,
                metrics=MetricsRecord.mean(folds),
            ),
        )
    rows.sort(key=lambda row: AXES.index(row.axis))
    return rows, outcomes


def write_table2_csv(rows: Iterable[Table2Row], path: Path) -> None:
    records = [
        (row.axis, row.method, row.channel_mode, row.feature_mode, *(getattr(row.metrics, n) for n in METRIC_NAMES))
        for row in rows
    ]
    pd.DataFrame(records, columns=list(TABLE2_HEADER)).to_csv(path, index=False, lineterminator='\n')
