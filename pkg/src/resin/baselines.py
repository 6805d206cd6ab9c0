"""Classical baselines: filtered-signal regression and the SVM on music features.

The regression experiment fits the static valence/arousal ratings from a fixed-length
rendering of one signal channel (origin, tonic or phasic): low-pass filter, resample
to `resample_length` points, z-score each point with training-fold statistics. Both
regressors and the classifier are linear and trained deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import StrEnum
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from loguru import logger
from scipy import linalg, signal

from resin.errors import ParameterError, ShapeMismatchError, SingleClassError
from resin.labeling import AXES
from resin.metrics import ClassificationMetrics, ZScoreStats, classify_metrics, pearson_r, rmse
from resin.signals import DATASET_RATE_HZ

if TYPE_CHECKING:
    from collections.abc import Callable, Iterable, Mapping, Sequence
    from pathlib import Path

    from resin.cvxeda import ComponentChannels
    from resin.folds import FoldPlan
    from resin.signals import Dataset, DatasetItem, SignalKey

DEFAULT_CUTOFF_HZ = 0.6
FILTER_ORDER = 2
RIDGE = 1e-8
INPUT_CHANNELS = ('origin', 'tonic', 'phasic')
TABLE1_HEADER = ('method', 'axis', 'input', 'rmse', 'r')


class RegressionMethod(StrEnum):
    MLR = 'MLR'
    SVR = 'SVR'


@dataclass(frozen=True)
class BaselineConfig:
    """Baseline hyperparameters.

    Attributes:
        cutoff_hz: Low-pass cutoff applied before resampling.
        resample_length: Points per resampled signal.
        svr_epsilon: Half-width of the SVR insensitive band.
        svr_c: SVR loss weight.
        svm_c: SVM loss weight.
        iterations: Subgradient steps per restart.
        restarts: Restarts per fit; restart 0 starts at zero.
    """

    cutoff_hz: float = DEFAULT_CUTOFF_HZ
    resample_length: int = 256
    svr_epsilon: float = 0.1
    svr_c: float = 1.0
    svm_c: float = 1.0
    iterations: int = 1000
    restarts: int = 5

    def validate(self) -> None:
        if self.cutoff_hz <= 0:
            raise ParameterError('cutoff_hz', self.cutoff_hz, 'must be positive')
        if self.resample_length < 2:  # noqa: PLR2004
            raise ParameterError('resample_length', self.resample_length, 'must be at least 2')
        if self.svr_epsilon < 0 or self.svr_c <= 0 or self.svm_c <= 0:
            raise ParameterError(
                'svr_epsilon/svr_c/svm_c',
                (self.svr_epsilon, self.svr_c, self.svm_c),
                'need epsilon >= 0 and positive C',
            )
        if self.iterations < 1 or self.restarts < 1:
            raise ParameterError('iterations/restarts', (self.iterations, self.restarts), 'must be positive')


def lowpass(
    values: np.ndarray,
    cutoff_hz: float = DEFAULT_CUTOFF_HZ,
    rate: float = DATASET_RATE_HZ,
) -> np.ndarray:
    """Second-order Butterworth low-pass run forward then backward (zero phase).

    Raises:
        ParameterError: If the cutoff is not below the Nyquist frequency.
    """
    nyquist = rate / 2
    if not 0 < cutoff_hz < nyquist:
        raise ParameterError('cutoff_hz', cutoff_hz, f'must lie in (0, {nyquist:g}) at {rate:g} Hz')
    b, a = signal.butter(FILTER_ORDER, cutoff_hz / nyquist, btype='lowpass')
    data = np.asarray(values, dtype=np.float64)
    if data.size < 2:  # noqa: PLR2004
        return data.copy()
    padlen = min(3 * max(len(a), len(b)), data.size - 1)
    return signal.filtfilt(b, a, data, padlen=padlen)


def resample_linear(values: np.ndarray, length: int) -> np.ndarray:
    """Linear interpolation onto `length` evenly spaced points spanning the signal."""
    data = np.asarray(values, dtype=np.float64)
    if data.size == 1:
        return np.full(length, data[0])
    return np.interp(np.linspace(0, data.size - 1, length), np.arange(data.size), data)


@dataclass(frozen=True)
class LinearModel:
    """f(x) = x @ weights + intercept.

    Attributes:
        weights: Coefficient per feature.
        intercept: Offset.
        objective: Training objective at the returned point (0 for least squares).
        history: Best objective so far, sampled every 10 steps of the winning restart.
    """

    weights: np.ndarray
    intercept: float
    objective: float = 0.0
    history: tuple[float, ...] = field(default=())

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=np.float64) @ self.weights + self.intercept


def _check_xy(features: np.ndarray, targets: np.ndarray, *, minimum: int) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:  # noqa: PLR2004
        raise ShapeMismatchError(what='training data', expected=(y.size, 'features'), found=X.shape)
    if y.size < minimum:
        raise ParameterError('samples', y.size, f'need at least {minimum}')
    return X, y


def fit_mlr(features: np.ndarray, targets: np.ndarray, *, ridge: float = RIDGE) -> LinearModel:
    """Least squares with an intercept and a small ridge on the coefficients."""
    X, y = _check_xy(features, targets, minimum=1)
    n, d = X.shape
    design = np.hstack([X, np.ones((n, 1))])
    penalty = np.hstack([np.sqrt(ridge) * np.eye(d), np.zeros((d, 1))])
    solution, *_ = linalg.lstsq(np.vstack([design, penalty]), np.concatenate([y, np.zeros(d)]))
    return LinearModel(weights=solution[:d], intercept=float(solution[d]))


def _subgradient_descent(
    X: np.ndarray,
    loss: Callable[[np.ndarray], float],
    loss_grad: Callable[[np.ndarray], np.ndarray],
    *,
    config: BaselineConfig,
    seed: int,
) -> LinearModel:
    """Minimise 0.5 ||w||^2 + loss(f) over (w, b) with steps 1 / (t + 1).

    `loss` maps predictions to the data term and `loss_grad` to its subgradient with
    respect to the predictions. Each restart keeps its best iterate; the best restart wins.
    """
    n, d = X.shape
    rng = np.random.default_rng(seed)
    best: LinearModel | None = None
    for restart in range(config.restarts):
        w = np.zeros(d) if restart == 0 else rng.normal(scale=0.1, size=d)
        b = 0.0
        run_best = (np.inf, w.copy(), b)
        history = []
        for t in range(config.iterations):
            predictions = X @ w + b
            objective = 0.5 * float(w @ w) + loss(predictions)
            if objective < run_best[0]:
                run_best = (objective, w.copy(), b)
            if t % 10 == 0:
                history.append(run_best[0])
            g = loss_grad(predictions)
            step = 1.0 / (t + 1)
            w = w - step * (w + X.T @ g)
            b -= step * float(np.sum(g))
        predictions = X @ w + b
        objective = 0.5 * float(w @ w) + loss(predictions)
        if objective < run_best[0]:
            run_best = (objective, w, b)
        history.append(run_best[0])
        if best is None or run_best[0] < best.objective:
            best = LinearModel(weights=run_best[1], intercept=run_best[2], objective=run_best[0], history=tuple(history))
    assert best is not None  # noqa: S101
    logger.debug('Subgradient fit on {} samples: objective {:.6g}', n, best.objective)
    return best


def fit_linear_svr(
    features: np.ndarray,
    targets: np.ndarray,
    *,
    epsilon: float = 0.1,
    C: float = 1.0,  # noqa: N803
    config: BaselineConfig | None = None,
    seed: int = 0,
) -> LinearModel:
    """Linear epsilon-insensitive regression: 0.5 ||w||^2 + C mean(max(0, |y - f| - epsilon))."""
    config = config or BaselineConfig()
    X, y = _check_xy(features, targets, minimum=2)
    n = y.size

    def loss(predictions: np.ndarray) -> float:
        return C * float(np.mean(np.maximum(0.0, np.abs(y - predictions) - epsilon)))

    def loss_grad(predictions: np.ndarray) -> np.ndarray:
        residual = predictions - y
        return C / n * np.sign(residual) * (np.abs(residual) > epsilon)

    return _subgradient_descent(X, loss, loss_grad, config=config, seed=seed)


def fit_linear_svm(
    features: np.ndarray,
    labels: np.ndarray,
    *,
    C: float = 1.0,  # noqa: N803
    config: BaselineConfig | None = None,
    seed: int = 0,
) -> LinearModel:
    """Linear hinge-loss classifier: 0.5 ||w||^2 + C mean(max(0, 1 - s f)) with s = 2 bit - 1.

    Raises:
        SingleClassError: If only one class is present.
    """
    config = config or BaselineConfig()
    X, bits = _check_xy(features, labels, minimum=2)
    classes = np.unique(bits)
    if classes.size < 2:  # noqa: PLR2004
        raise SingleClassError(int(classes[0]))
    signs = np.where(bits > 0, 1.0, -1.0)
    n = signs.size

    def loss(predictions: np.ndarray) -> float:
        return C * float(np.mean(np.maximum(0.0, 1.0 - signs * predictions)))

    def loss_grad(predictions: np.ndarray) -> np.ndarray:
        return -C / n * signs * (signs * predictions < 1.0)

    return _subgradient_descent(X, loss, loss_grad, config=config, seed=seed)


def classify(model: LinearModel, features: np.ndarray) -> np.ndarray:
    """Label 1 where the decision value is positive."""
    return (model.predict(features) > 0).astype(np.int64)


@dataclass(frozen=True)
class RegressionResult:
    """One cell of the regression table, averaged over folds.

    `pearson_r` is `None` when the correlation is undefined on every test fold.
    """

    method: RegressionMethod
    axis: str
    input: str
    rmse: float
    pearson_r: float | None
    folds: int


def signal_features(
    items: Sequence[DatasetItem],
    channels: Mapping[SignalKey, ComponentChannels],
    channel: str,
    config: BaselineConfig,
) -> np.ndarray:
    """Filtered, resampled rendering of one channel per item, one row per item."""
    rows = []
    for item in items:
        values = getattr(channels[item.key], channel)
        filtered = lowpass(values, config.cutoff_hz, item.signal.sample_rate_hz)
        rows.append(resample_linear(filtered, config.resample_length))
    return np.vstack(rows) if rows else np.zeros((0, config.resample_length))


def _fit_regressor(method: RegressionMethod, X: np.ndarray, y: np.ndarray, config: BaselineConfig) -> LinearModel:
    if method is RegressionMethod.MLR:
        return fit_mlr(X, y)
    return fit_linear_svr(X, y, epsilon=config.svr_epsilon, C=config.svr_c, config=config)


def run_correlation_experiment(
    dataset: Dataset,
    channels: Mapping[SignalKey, ComponentChannels],
    plan: FoldPlan,
    config: BaselineConfig | None = None,
) -> list[RegressionResult]:
    """Regress each rating axis on each signal channel under the fold plan.

    Per fold the z-score statistics come from the training subjects only. RMSE and
    Pearson r are computed on every test fold and averaged; folds where r is undefined
    are left out of its average.

    Returns:
        Results ordered by method, then axis, then input channel.
    """
    config = config or BaselineConfig()
    config.validate()
    scores: dict[tuple[RegressionMethod, str, str], tuple[list[float], list[float]]] = {}
    for channel in INPUT_CHANNELS:
        features = signal_features(dataset.items, channels, channel, config)
        for fold in range(plan.k):
            train_mask = np.array([plan.fold_of(item.subject_id) != fold for item in dataset.items])
            if train_mask.all() or not train_mask.any():
                continue
            stats = ZScoreStats.fit(features[train_mask])
            train_x, test_x = stats.transform(features[train_mask]), stats.transform(features[~train_mask])
            for axis in AXES:
                targets = np.array([getattr(item, axis) for item in dataset.items])
                for method in RegressionMethod:
                    model = _fit_regressor(method, train_x, targets[train_mask], config)
                    predictions = model.predict(test_x)
                    errors, correlations = scores.setdefault((method, axis, channel), ([], []))
                    errors.append(rmse(predictions, targets[~train_mask]))
                    r = pearson_r(predictions, targets[~train_mask])
                    if r is not None:
                        correlations.append(r)
        logger.info('Regression baseline finished for the {} channel', channel)

    results = []
    for method in RegressionMethod:
        for axis in AXES:
            for channel in INPUT_CHANNELS:
                errors, correlations = scores.get((method, axis, channel), ([], []))
                results.append(
                    RegressionResult(
                        method=method,
                        axis=axis,
                        input=channel,
                        rmse=float(np.mean(errors)) if errors else float('nan'),
                        pearson_r=float(np.mean(correlations)) if correlations else None,
                        folds=len(errors),
                    ),
                )
    return results


def music_svm_fold(
    dataset: Dataset,
    plan: FoldPlan,
    fold: int,
    axis: str,
    config: BaselineConfig | None = None,
) -> ClassificationMetrics:
    """Linear SVM on z-scored music features, trained on the subjects outside `fold`.

    Raises:
        SingleClassError: If the training subjects hold a single class.
        ParameterError: If the dataset is not labelled.
    """
    config = config or BaselineConfig()
    config.validate()
    if not dataset.is_labelled:
        raise ParameterError('dataset', 'unlabelled', 'run labelling first')
    music = dataset.music_matrix()
    labels = np.array([item.label(axis) for item in dataset.items], dtype=np.int64)
    train_mask = np.array([plan.fold_of(item.subject_id) != fold for item in dataset.items])
    stats = ZScoreStats.fit(music[train_mask])
    model = fit_linear_svm(stats.transform(music[train_mask]), labels[train_mask], C=config.svm_c, config=config)
    predictions = classify(model, stats.transform(music[~train_mask]))
    return classify_metrics(predictions, labels[~train_mask])


def write_table1_csv(results: Iterable[RegressionResult], path: Path) -> None:
    rows = [
        (result.method.value, result.axis, result.input, result.rmse, result.pearson_r)
        for result in results
    ]
    frame = pd.DataFrame(rows, columns=list(TABLE1_HEADER))
    frame.to_csv(path, index=False, lineterminator='\n', na_rep='')
