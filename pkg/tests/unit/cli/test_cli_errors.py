from __future__ import annotations

import json
import sys
from typing import TYPE_CHECKING

import pytest
from typer.testing import CliRunner

from resin import cli

if TYPE_CHECKING:
    from pathlib import Path


def test_cli_decompose_missing_input_exits_with_data_error(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.chdir(tmp_path)
    runner = CliRunner()

    result = runner.invoke(cli.app, ['decompose'])

    assert result.exit_code == 2
    assert 'file not found' in result.output


def test_cli_missing_config_file_exits_with_data_error(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.chdir(tmp_path)
    runner = CliRunner()

    result = runner.invoke(cli.app, ['label', '--config', str(tmp_path / 'nope.json')])

    assert result.exit_code == 2
    assert 'does not exist' in result.output


def test_cli_invalid_setting_exits_with_data_error(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.chdir(tmp_path)
    config = tmp_path / 'run.json'
    config.write_text(json.dumps({'folds': 1}), encoding='utf-8')
    runner = CliRunner()

    result = runner.invoke(cli.app, ['cv', '--config', str(config)])

    assert result.exit_code == 2
    assert 'folds' in result.output


def test_cli_eval_rejects_checkpoint_without_run_details(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.chdir(tmp_path)
    model = tmp_path / 'model.json'
    model.write_text('{"format": "resin-model"}', encoding='utf-8')
    runner = CliRunner()

    result = runner.invoke(cli.app, ['eval', '--model', str(model)])

    assert result.exit_code == 2
    assert str(model) in result.output


def test_cli_train_rejects_unknown_axis(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.chdir(tmp_path)
    runner = CliRunner()

    result = runner.invoke(cli.app, ['train', '--axis', 'dominance'])

    assert result.exit_code != 0
    assert 'valence, arousal' in result.output


def test_main_maps_usage_errors_to_exit_one(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setattr(sys, 'argv', ['resin', 'no-such-command'])

    with pytest.raises(SystemExit) as excinfo:
        cli.main()

    assert excinfo.value.code == 1


def test_main_returns_command_exit_code(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.chdir(tmp_path)
    monkeypatch.setattr(sys, 'argv', ['resin', 'decompose'])

    with pytest.raises(SystemExit) as excinfo:
        cli.main()

    assert excinfo.value.code == 2
