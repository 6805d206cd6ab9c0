"""Evaluation metrics and z-score normalisation shared by the network and baselines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from resin.errors import ShapeMismatchError

STD_FLOOR = 1e-8


def _pair(a: np.ndarray, b: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    left = np.asarray(a, dtype=np.float64).ravel()
    right = np.asarray(b, dtype=np.float64).ravel()
    if left.shape != right.shape:
        raise ShapeMismatchError(what=what, expected=left.shape, found=right.shape)
    return left, right


def rmse(pred: np.ndarray, target: np.ndarray) -> float:
    left, right = _pair(pred, target, 'rmse inputs')
    if left.size == 0:
        return 0.0
    return float(np.sqrt(np.mean((left - right) ** 2)))


def pearson_r(a: np.ndarray, b: np.ndarray) -> float | None:
    """Pearson correlation; `None` when either side has zero variance."""
    left, right = _pair(a, b, 'pearson inputs')
    dl = left - left.mean()
    dr = right - right.mean()
    denominator = float(np.sqrt(np.sum(dl**2) * np.sum(dr**2)))
    if left.size < 2 or denominator == 0.0:  # noqa: PLR2004
        return None
    return float(np.clip(np.sum(dl * dr) / denominator, -1.0, 1.0))


@dataclass(frozen=True)
class ClassificationMetrics:
    """Binary classification summary with class 1 (high) as positive.

    `precision_defined` / `recall_defined` are False when the corresponding
    denominator is zero, in which case the value is reported as 0.
    """

    accuracy: float
    f1: float
    precision: float
    recall: float
    tp: int
    fp: int
    tn: int
    fn: int
    precision_defined: bool = True
    recall_defined: bool = True

    def as_dict(self) -> dict[str, float]:
        return {'accuracy': self.accuracy, 'f1': self.f1, 'precision': self.precision, 'recall': self.recall}


def classify_metrics(pred_bits: np.ndarray, true_bits: np.ndarray) -> ClassificationMetrics:
    pred, true = _pair(pred_bits, true_bits, 'classification inputs')
    pred, true = pred.astype(bool), true.astype(bool)
    tp = int(np.sum(pred & true))
    fp = int(np.sum(pred & ~true))
    tn = int(np.sum(~pred & ~true))
    fn = int(np.sum(~pred & true))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    total = tp + fp + tn + fn
    return ClassificationMetrics(
        accuracy=(tp + tn) / total if total else 0.0,
        f1=f1,
        precision=precision,
        recall=recall,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        precision_defined=bool(tp + fp),
        recall_defined=bool(tp + fn),
    )


@dataclass(frozen=True)
class ZScoreStats:
    """Per-feature population mean and standard deviation of a fitting set."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, matrix: np.ndarray) -> ZScoreStats:
        values = np.asarray(matrix, dtype=np.float64)
        if values.ndim != 2:  # noqa: PLR2004
            raise ShapeMismatchError(what='zscore input', expected='(samples, features)', found=values.shape)
        return cls(mean=values.mean(axis=0), std=values.std(axis=0))

    @property
    def scale(self) -> np.ndarray:
        """Multiplier applied after centring; 0 for (near-)constant features."""
        return np.where(self.std < STD_FLOOR, 0.0, 1.0 / np.maximum(self.std, STD_FLOOR))

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        values = np.asarray(matrix, dtype=np.float64)
        if values.shape[-1] != self.mean.size:
            raise ShapeMismatchError(what='zscore features', expected=self.mean.size, found=values.shape[-1])
        return (values - self.mean) * self.scale


def zscore(matrix: np.ndarray) -> tuple[np.ndarray, ZScoreStats]:
    """Standardise each column on the fitting set; returns the result and its stats."""
    stats = ZScoreStats.fit(matrix)
    return stats.transform(matrix), stats
