from __future__ import annotations

import sys
from pathlib import Path
from typing import TYPE_CHECKING, Annotated

import click
import numpy as np
import typer
from loguru import logger

from resin.baselines import run_correlation_experiment, write_table1_csv
from resin.errors import EXIT_NUMERICAL, EXIT_USAGE, CheckpointError, ResinError
from resin.experiment import (
    build_images,
    fit_model,
    run_cv,
    run_sweep,
    split_items,
    training_set,
    write_cv_outputs,
    write_table2_csv,
)
from resin.folds import make_folds
from resin.imaging import ChannelMode
from resin.labeling import AXES
from resin.logs import configure_logging
from resin.metrics import classify_metrics
from resin.nn.checkpoint import load_checkpoint, read_checkpoint, save_checkpoint, write_loss_curve_csv
from resin.nn.fusion import FeatureMode
from resin.nn.gradcheck import TOLERANCE, run_gradcheck
from resin.nn.train import predict
from resin.pipeline import Artifacts, decompose_stage, label_stage, load_labelled_inputs, synthesize
from resin.settings import ResinSettings, load_settings
from resin.synth import CorpusConfig, SynthConfig

if TYPE_CHECKING:
    from collections.abc import Callable

app = typer.Typer(help='EDA emotion recognition: cvxEDA decomposition, signal images and a fused residual network.')

ConfigOption = Annotated[
    Path | None,
    typer.Option(
        '--config',
        help='JSON settings file; its values override env vars and resin.json.',
        show_default=False,
    ),
]
SeedOption = Annotated[
    int | None,
    typer.Option(
        '--seed',
        help='Root seed for folds, initialisation and crops.',
        show_default=False,
    ),
]
ChannelModeOption = Annotated[
    ChannelMode | None,
    typer.Option(
        '--channel-mode',
        help='Decomposition channels fed to the network.',
        show_default=False,
        case_sensitive=False,
    ),
]
FeatureModeOption = Annotated[
    FeatureMode | None,
    typer.Option(
        '--feature-mode',
        help='Features reaching the classifier head.',
        show_default=False,
        case_sensitive=False,
    ),
]
OutputDirOption = Annotated[
    Path | None,
    typer.Option(
        '--output-dir',
        help='Directory for artifacts and reports.',
        show_default=False,
    ),
]
EVAL_KEYS = ('axis', 'channel_mode', 'image_size', 'channel_means', 'seed', 'folds')

AxisOption = Annotated[
    str,
    typer.Option(
        '--axis',
        help='Rating axis: valence or arousal.',
        show_default=True,
    ),
]
FoldOption = Annotated[
    int | None,
    typer.Option(
        '--fold',
        help='Train on the other folds and evaluate on this one; all data when omitted.',
        show_default=False,
    ),
]


@app.callback()
def _root(
    *,
    verbose: Annotated[
        int,
        typer.Option(
            '--verbose',
            '-v',
            count=True,
            help='Log progress (-v) or solver detail (-vv) to stderr.',
        ),
    ] = 0,
) -> None:
    configure_logging(verbose)


def _settings(
    config: Path | None,
    *,
    seed: int | None = None,
    channel_mode: ChannelMode | None = None,
    feature_mode: FeatureMode | None = None,
    output_dir: Path | None = None,
    sweep: bool | None = None,
) -> ResinSettings:
    paths = {'output_dir': output_dir} if output_dir is not None else None
    return load_settings(
        config,
        seed=seed,
        channel_mode=channel_mode,
        feature_mode=feature_mode,
        paths=paths,
        sweep=sweep,
    )


def _guard(action: Callable[[], int | None]) -> None:
    """Run a command body, turning resin errors into a red message and an exit code."""
    try:
        code = action()
    except ResinError as exc:
        typer.secho(str(exc), err=True, fg=typer.colors.RED)
        raise typer.Exit(code=exc.exit_code) from exc
    if code:
        raise typer.Exit(code=code)


def _check_axis(axis: str) -> None:
    if axis not in AXES:
        msg = f'axis must be one of {", ".join(AXES)}'
        raise typer.BadParameter(msg, param_hint='--axis')


@app.command('synth')
def synth(  # noqa: PLR0913
    *,
    config: ConfigOption = None,
    seed: SeedOption = None,
    subjects: Annotated[int, typer.Option(help='Number of subjects.', min=1)] = 60,
    songs: Annotated[int, typer.Option(help='Size of the song pool.', min=1)] = 40,
    songs_per_subject: Annotated[int, typer.Option(help='Clips rated by each subject.', min=1)] = 10,
    music_dim: Annotated[int, typer.Option(help='Music feature dimension.', min=1)] = 64,
    duration: Annotated[float, typer.Option(help='Recording length in seconds, before trimming.', min=1.0)] = 75.0,
) -> None:
    """Write a synthetic labelled corpus to the configured input paths."""

    def body() -> None:
        settings = _settings(config, seed=seed)
        corpus = synthesize(
            settings,
            CorpusConfig(
                subjects=subjects,
                songs=songs,
                songs_per_subject=songs_per_subject,
                music_dim=music_dim,
                recording=SynthConfig(duration_s=duration),
            ),
        )
        typer.echo(f'Wrote {len(corpus.signals)} signal(s) to {settings.paths.eda}')

    _guard(body)


@app.command('decompose')
def decompose(*, config: ConfigOption = None, output_dir: OutputDirOption = None) -> None:
    """Decompose every trimmed signal into phasic and tonic channels."""

    def body() -> None:
        settings = _settings(config, output_dir=output_dir)
        channels = decompose_stage(settings)
        typer.echo(f'Decomposed {len(channels)} signal(s) into {Artifacts(settings.paths.output_dir).decompositions}')

    _guard(body)


@app.command('label')
def label(*, config: ConfigOption = None, output_dir: OutputDirOption = None) -> None:
    """Compute per-subject 2-means thresholds and binary labels."""

    def body() -> None:
        settings = _settings(config, output_dir=output_dir)
        labels = label_stage(settings)
        typer.echo(f'Labelled {len(labels.entries)} annotation(s) into {Artifacts(settings.paths.output_dir).labels}')

    _guard(body)


@app.command('train')
def train_command(  # noqa: PLR0913
    *,
    config: ConfigOption = None,
    seed: SeedOption = None,
    channel_mode: ChannelModeOption = None,
    feature_mode: FeatureModeOption = None,
    output_dir: OutputDirOption = None,
    axis: AxisOption = 'valence',
    fold: FoldOption = None,
) -> None:
    """Train one model from the decomposition and label artifacts."""
    _check_axis(axis)

    def body() -> None:
        settings = _settings(
            config,
            seed=seed,
            channel_mode=channel_mode,
            feature_mode=feature_mode,
            output_dir=output_dir,
        )
        experiment = settings.experiment()
        dataset, channels = load_labelled_inputs(settings)
        items = dataset.items
        if fold is not None:
            items, _ = split_items(dataset, make_folds(dataset.subjects, settings.folds, settings.seed), fold)
        fitted = fit_model(dataset, channels, items, experiment, axis=axis, seed=settings.seed)
        artifacts = Artifacts(settings.paths.output_dir)
        save_checkpoint(
            fitted.model,
            artifacts.model(axis),
            extra={
                'axis': axis,
                'fold': fold,
                'seed': settings.seed,
                'folds': settings.folds,
                'channel_mode': experiment.channel_mode.value,
                'image_size': experiment.image_size,
                'channel_means': fitted.channel_means.tolist(),
                'settings': settings.echo(),
            },
        )
        write_loss_curve_csv(fitted.losses, artifacts.loss_curve(axis))
        final = fitted.losses[-1].loss if fitted.losses else float('nan')
        typer.echo(f'Saved {artifacts.model(axis)} (final loss {final:.4f})')

    _guard(body)


@app.command('eval')
def eval_command(
    *,
    model: Annotated[Path, typer.Option('--model', help='Checkpoint written by `resin train`.')],
    config: ConfigOption = None,
    output_dir: OutputDirOption = None,
    fold: FoldOption = None,
) -> None:
    """Evaluate a saved model on the held-out fold, or on every item."""

    def body() -> None:
        extra = read_checkpoint(model).extra
        missing = [key for key in EVAL_KEYS if key not in extra]
        if missing:
            raise CheckpointError(path=model, reason=f'no {", ".join(missing)}; write it with `resin train`')
        network = load_checkpoint(model)
        settings = load_settings(
            config,
            channel_mode=extra['channel_mode'],
            feature_mode=network.feature_mode,
            imaging={'image_size': extra['image_size']},
            paths={'output_dir': output_dir} if output_dir is not None else None,
        )
        experiment = settings.experiment()
        dataset, channels = load_labelled_inputs(settings)
        items = dataset.items
        if fold is not None:
            plan = make_folds(dataset.subjects, int(extra['folds']), int(extra['seed']))
            _, items = split_items(dataset, plan, fold)
        means = np.asarray(extra['channel_means'], dtype=np.float64)
        data = training_set(dataset, items, build_images(items, channels, means, experiment), experiment, extra['axis'])
        metrics = classify_metrics(predict(network, data.images, data.music).labels, data.labels)
        for name, value in metrics.as_dict().items():
            typer.echo(f'{name}: {value:.4f}')

    _guard(body)


@app.command('baseline')
def baseline(
    *,
    config: ConfigOption = None,
    seed: SeedOption = None,
    output_dir: OutputDirOption = None,
) -> None:
    """Regress ratings on filtered origin, tonic and phasic signals; writes table1.csv."""

    def body() -> None:
        settings = _settings(config, seed=seed, output_dir=output_dir)
        dataset, channels = load_labelled_inputs(settings)
        plan = make_folds(dataset.subjects, settings.folds, settings.seed)
        results = run_correlation_experiment(dataset, channels, plan, settings.baseline.config())
        path = Artifacts(settings.paths.output_dir).root / 'table1.csv'
        write_table1_csv(results, path)
        for result in results:
            r = 'undefined' if result.pearson_r is None else f'{result.pearson_r:.4f}'
            typer.echo(f'{result.method} {result.axis:<8} {result.input:<7} rmse={result.rmse:.4f} r={r}')

    _guard(body)


@app.command('gradcheck')
def gradcheck(*, seed: SeedOption = None) -> None:
    """Compare every layer's backward pass with central differences."""

    def body() -> int:
        results = run_gradcheck(seed or 0)
        for result in results:
            color = typer.colors.GREEN if result.passed() else typer.colors.RED
            typer.secho(f'{result.name:<36} {result.worst:.2e}', fg=color)
        failed = [result for result in results if not result.passed()]
        if failed:
            typer.secho(f'{len(failed)} check(s) above {TOLERANCE:g}', err=True, fg=typer.colors.RED)
            return EXIT_NUMERICAL
        return 0

    _guard(body)


def _cross_validate(settings: ResinSettings) -> int:
    experiment = settings.experiment()
    dataset, channels = load_labelled_inputs(settings)
    directory = Artifacts(settings.paths.output_dir).root
    outcome = None
    if settings.sweep:
        rows, outcomes = run_sweep(dataset, channels, experiment)
        write_table2_csv(rows, directory / 'table2.csv')
        outcome = next(
            (
                candidate
                for candidate in outcomes
                if candidate.report.channel_mode is experiment.channel_mode
                and candidate.report.feature_mode is experiment.feature_mode
            ),
            None,
        )
    outcome = outcome or run_cv(dataset, channels, experiment)
    write_cv_outputs(outcome, directory)
    report = outcome.report
    for axis, mean in report.means.items():
        typer.echo(f'{axis}: accuracy {mean.accuracy:.4f} f1 {mean.f1:.4f}')
    if not report.audit_passed:
        typer.secho('Leakage audit failed; see report.json', err=True, fg=typer.colors.RED)
    for error in report.errors:
        typer.secho(f'fold {error.fold} ({error.axis}): {error.error}', err=True, fg=typer.colors.RED)
    return report.exit_code


@app.command('cv')
def cv(  # noqa: PLR0913
    *,
    config: ConfigOption = None,
    seed: SeedOption = None,
    channel_mode: ChannelModeOption = None,
    feature_mode: FeatureModeOption = None,
    output_dir: OutputDirOption = None,
    sweep: Annotated[
        bool | None,
        typer.Option('--sweep/--no-sweep', help='Also compare every mode combination in table2.csv.', show_default=False),
    ] = None,
) -> None:
    """Subject-disjoint k-fold cross-validation from the staged artifacts."""

    def body() -> int:
        settings = _settings(
            config,
            seed=seed,
            channel_mode=channel_mode,
            feature_mode=feature_mode,
            output_dir=output_dir,
            sweep=sweep,
        )
        return _cross_validate(settings)

    _guard(body)


@app.command('run')
def run(  # noqa: PLR0913
    *,
    config: ConfigOption = None,
    seed: SeedOption = None,
    channel_mode: ChannelModeOption = None,
    feature_mode: FeatureModeOption = None,
    output_dir: OutputDirOption = None,
    sweep: Annotated[
        bool | None,
        typer.Option('--sweep/--no-sweep', help='Also compare every mode combination in table2.csv.', show_default=False),
    ] = None,
) -> None:
    """Decompose, label and cross-validate in one go."""

    def body() -> int:
        settings = _settings(
            config,
            seed=seed,
            channel_mode=channel_mode,
            feature_mode=feature_mode,
            output_dir=output_dir,
            sweep=sweep,
        )
        decompose_stage(settings)
        label_stage(settings)
        logger.info('Artifacts staged under {}', settings.paths.output_dir)
        return _cross_validate(settings)

    _guard(body)


def main() -> None:
    """Main entry point for the CLI; usage errors exit with 1."""
    try:
        code = app(standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        sys.exit(EXIT_USAGE)
    except click.Abort:
        sys.exit(EXIT_USAGE)
    sys.exit(code if isinstance(code, int) else 0)
