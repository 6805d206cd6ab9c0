from __future__ import annotations

from typing import TYPE_CHECKING

from typer.testing import CliRunner

from resin import cli
from resin.nn.gradcheck import GradCheckResult

if TYPE_CHECKING:
    from pytest_mock import MockerFixture


def test_cli_gradcheck_passes_on_real_layers() -> None:
    runner = CliRunner()

    result = runner.invoke(cli.app, ['gradcheck', '--seed', '1'])

    assert result.exit_code == 0
    assert 'res-sin end to end' in result.output


def test_cli_gradcheck_fails_with_numerical_exit_code(mocker: MockerFixture) -> None:
    runner = CliRunner()
    mocker.patch(
        'resin.cli.run_gradcheck',
        return_value=[
            GradCheckResult(name='linear', input_error=1e-9, parameter_error=1e-9),
            GradCheckResult(name='conv3x3 stride 1', input_error=0.2, parameter_error=1e-9),
        ],
    )

    result = runner.invoke(cli.app, ['gradcheck'])

    assert result.exit_code == 3
    assert '1 check(s) above' in result.output
