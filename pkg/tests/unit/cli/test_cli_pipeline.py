from __future__ import annotations

import json
from typing import TYPE_CHECKING

import pytest
from typer.testing import CliRunner

from resin import cli

if TYPE_CHECKING:
    from pathlib import Path

TINY_RUN = {
    'folds': 2,
    'imaging': {'image_size': 8, 'crop_pad': 1},
    'res_si': {'stage_channels': [2, 2, 2, 2], 'blocks_per_stage': 1},
    'head': {'hidden': 4},
    'train': {'batch_size': 4, 'max_iters': 2},
    'baseline': {'iterations': 20, 'restarts': 1},
}
SYNTH_ARGS = ['--subjects', '4', '--songs', '3', '--songs-per-subject', '2', '--music-dim', '4', '--duration', '20']


@pytest.fixture
def workspace(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    monkeypatch.chdir(tmp_path)
    (tmp_path / 'resin.json').write_text(json.dumps(TINY_RUN), encoding='utf-8')
    runner = CliRunner()
    for args in (['synth', '--seed', '3', *SYNTH_ARGS], ['decompose'], ['label']):
        result = runner.invoke(cli.app, args)
        assert result.exit_code == 0, result.output
    return tmp_path


def test_cli_stages_write_their_artifacts(workspace: Path) -> None:
    assert (workspace / 'data' / 'eda.csv').is_file()
    assert len(list((workspace / 'out' / 'decompositions').rglob('*.csv'))) == 8
    assert len(list((workspace / 'out' / 'ground_truth').rglob('*.csv'))) == 8
    labels = (workspace / 'out' / 'labels.csv').read_text(encoding='utf-8').splitlines()
    assert labels[0] == 'subject_id,song_id,valence_label,arousal_label'
    assert len(labels) == 9


def test_cli_train_then_eval(workspace: Path) -> None:
    runner = CliRunner()

    trained = runner.invoke(cli.app, ['train', '--axis', 'arousal', '--fold', '0', '--seed', '1'])
    evaluated = runner.invoke(cli.app, ['eval', '--model', str(workspace / 'out' / 'model_arousal.json'), '--fold', '0'])

    assert trained.exit_code == 0, trained.output
    curve = (workspace / 'out' / 'loss_curve_arousal.csv').read_text(encoding='utf-8').splitlines()
    assert curve[0] == 'iter,loss,lr'
    assert evaluated.exit_code == 0, evaluated.output
    assert 'accuracy: ' in evaluated.output


def test_cli_cv_is_byte_identical_for_equal_seeds(workspace: Path) -> None:
    runner = CliRunner()
    names = ('report.json', 'metrics.csv', 'loss_curve.csv')

    first = runner.invoke(cli.app, ['cv', '--seed', '7'])
    first_bytes = [(workspace / 'out' / name).read_bytes() for name in names]
    second = runner.invoke(cli.app, ['cv', '--seed', '7'])

    assert first.exit_code == 0, first.output
    assert second.exit_code == 0, second.output
    assert [(workspace / 'out' / name).read_bytes() for name in names] == first_bytes
    report = json.loads((workspace / 'out' / 'report.json').read_text(encoding='utf-8'))
    assert report['audit_passed'] is True
    assert len(report['records']) == 4


def test_cli_baseline_writes_table1(workspace: Path) -> None:
    runner = CliRunner()

    result = runner.invoke(cli.app, ['baseline'])

    assert result.exit_code == 0, result.output
    rows = (workspace / 'out' / 'table1.csv').read_text(encoding='utf-8').splitlines()
    assert rows[0] == 'method,axis,input,rmse,r'
    assert len(rows) == 13
