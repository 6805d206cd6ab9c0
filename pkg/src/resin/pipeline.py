"""Stage plumbing: where each stage reads and writes its artifacts.

Every stage reads the files of the previous one from `paths.output_dir`, so stages can
run separately and their outputs can be diffed:

- `ground_truth/<subject>/<song>.csv`: true tonic and phasic of synthetic recordings.
- `decompositions/<subject>/<song>.csv`: origin, phasic, tonic and residual channels.
- `labels.csv` and `thresholds.csv`: per-subject thresholds and the binary labels.
- `model_<axis>.json` and `loss_curve_<axis>.csv`: a trained model and its loss curve.
- `report.json`, `metrics.csv`, `loss_curve.csv`, `table1.csv`, `table2.csv`: reports. The cv
  `loss_curve.csv` is the mean over (fold, axis) cells; `loss_curves/fold<k>_<axis>.csv` hold
  the per-cell curves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from loguru import logger

from resin.cvxeda import decompose_batch, load_decompositions, write_decomposition_csv
from resin.labeling import (
    binarize,
    compute_thresholds,
    label_dataset,
    load_labels_csv,
    write_labels_csv,
    write_thresholds_csv,
)
from resin.signals import (
    assemble_dataset,
    load_annotations,
    load_eda_csv,
    load_music_features,
    signal_path,
    trim_lead,
    write_annotations_csv,
    write_eda_csv,
    write_music_features_csv,
)
from resin.synth import CorpusConfig, generate_corpus, write_ground_truth_csv

if TYPE_CHECKING:
    from pathlib import Path

    from resin.cvxeda import ComponentChannels
    from resin.labeling import LabelSet
    from resin.settings import ResinSettings
    from resin.signals import Dataset, EdaSignal, SignalKey
    from resin.synth import Corpus

DECOMPOSITIONS_DIR = 'decompositions'
GROUND_TRUTH_DIR = 'ground_truth'
LABELS_FILE = 'labels.csv'
THRESHOLDS_FILE = 'thresholds.csv'


@dataclass(frozen=True)
class Artifacts:
    """Artifact locations under one output directory."""

    root: Path

    @property
    def decompositions(self) -> Path:
        return self.root / DECOMPOSITIONS_DIR

    @property
    def ground_truth(self) -> Path:
        return self.root / GROUND_TRUTH_DIR

    @property
    def labels(self) -> Path:
        return self.root / LABELS_FILE

    @property
    def thresholds(self) -> Path:
        return self.root / THRESHOLDS_FILE

    def model(self, axis: str) -> Path:
        return self.root / f'model_{axis}.json'

    def loss_curve(self, axis: str) -> Path:
        return self.root / f'loss_curve_{axis}.csv'


def write_corpus(corpus: Corpus, settings: ResinSettings) -> None:
    """Write a synthetic corpus to the configured input paths."""
    for path in (settings.paths.eda, settings.paths.annotations, settings.paths.music_features):
        path.parent.mkdir(parents=True, exist_ok=True)
    write_eda_csv(corpus.signals, settings.paths.eda)
    write_annotations_csv(corpus.annotations, settings.paths.annotations)
    write_music_features_csv(corpus.features, settings.paths.music_features)


def synthesize(settings: ResinSettings, config: CorpusConfig) -> Corpus:
    corpus = generate_corpus(config, seed=settings.seed)
    write_corpus(corpus, settings)
    directory = Artifacts(settings.paths.output_dir).ground_truth
    for key, truth in sorted(corpus.truths.items()):
        path = signal_path(directory, key)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_ground_truth_csv(truth, path)
    logger.info('Wrote a synthetic corpus of {} signal(s)', len(corpus.signals))
    return corpus


def load_trimmed_signals(settings: ResinSettings) -> list[EdaSignal]:
    return [trim_lead(signal, settings.trim_seconds) for signal in load_eda_csv(settings.paths.eda)]


def load_dataset(settings: ResinSettings) -> Dataset:
    """Join the trimmed signals, annotations and music features (unlabelled)."""
    return assemble_dataset(
        load_trimmed_signals(settings),
        load_annotations(settings.paths.annotations),
        load_music_features(settings.paths.music_features),
    )


def decompose_stage(settings: ResinSettings) -> dict[SignalKey, ComponentChannels]:
    """Decompose every trimmed signal and write one CSV per signal."""
    artifacts = Artifacts(settings.paths.output_dir)
    decompositions = decompose_batch(
        load_trimmed_signals(settings),
        settings.cvxeda.params(),
        settings=settings.qp.settings(),
    )
    channels = {}
    for decomposition in decompositions:
        write_decomposition_csv(decomposition.channels(), artifacts.decompositions)
        channels[decomposition.key] = decomposition.channels()
    return channels


def label_stage(settings: ResinSettings) -> LabelSet:
    """Compute per-subject thresholds and labels and write both CSVs."""
    artifacts = Artifacts(settings.paths.output_dir)
    artifacts.root.mkdir(parents=True, exist_ok=True)
    annotations = load_annotations(settings.paths.annotations)
    thresholds = compute_thresholds(annotations)
    labels = binarize(annotations, thresholds)
    write_thresholds_csv(thresholds, artifacts.thresholds)
    write_labels_csv(labels, artifacts.labels)
    logger.info('Labelled {} annotation(s) for {} subject(s)', len(labels.entries), len(thresholds))
    return labels


def load_labelled_inputs(settings: ResinSettings) -> tuple[Dataset, dict[SignalKey, ComponentChannels]]:
    """The labelled dataset and the decomposition channels of its items, read from artifacts."""
    artifacts = Artifacts(settings.paths.output_dir)
    dataset = label_dataset(load_dataset(settings), load_labels_csv(artifacts.labels))
    channels = load_decompositions(artifacts.decompositions, [item.key for item in dataset.items])
    return dataset, channels
