"""Tests for the run configuration."""

import json
from pathlib import Path

import pytest
from macrolab.exceptions import ParameterError
from macrolab.settings import RunConfig, parse_windows
from macrolab_model import DividendMode


def test_defaults() -> None:
    """Test the default configuration."""
    config = RunConfig.from_sources()
    assert config.n == 1000
    assert config.k == [500]
    assert config.p_grid == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert config.f_grid == [1, 5, 10, 20, None]
    assert config.cost == 0.0025
    assert config.dividend_mode is DividendMode.CASH_BUCKET
    assert config.windows is None
    assert config.out == Path('out')


def test_config_file_and_overrides(tmp_path: Path) -> None:
    """Test that command line values override the config file.

    Args:
        tmp_path: a temporary directory.
    """
    config_file = tmp_path / 'run.json'
    config_file.write_text(json.dumps({
        'p-grid': '0,0.5',
        'f_grid': [5, 'inf'],
        'dividend-mode': 'daily-reinvest',
        'n': 50,
    }))
    config = RunConfig.from_sources(
        config_file, {'n': 30, 'k': '10,20', 'cost': None}
    )
    assert config.p_grid == [0.0, 0.5]
    assert config.f_grid == [5, None]
    assert config.dividend_mode is DividendMode.DAILY_REINVEST
    assert config.n == 30
    assert config.k == [10, 20]
    assert config.cost == 0.0025


def test_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    """Test that the environment sets defaults.

    Args:
        monkeypatch: the pytest monkeypatch fixture.
    """
    monkeypatch.setenv('MACROLAB_N', '42')
    monkeypatch.setenv('MACROLAB_OUT', 'elsewhere')
    config = RunConfig.from_sources(overrides={'out': Path('cli')})
    assert config.n == 42
    assert config.out == Path('cli')


@pytest.mark.parametrize(
    ('overrides', 'message'),
    [
        ({'p_grid': '0,1.5'}, 'p values must be in [0, 1]'),
        ({'f_grid': '0'}, 'f must be ≥ 1 or ∞'),
        ({'cost': 1.0}, 'cost must be in [0, 1)'),
        ({'windows': '10:5'}, 'must have end > start'),
        ({'input': 'a.csv', 'synthetic': {'n': 3}}, 'not both'),
        ({'unknown': 1}, 'unknown'),
    ],
)
def test_invalid_values(overrides: dict[str, object], message: str) -> None:
    """Test that invalid values are reported as parameter errors.

    Args:
        overrides: the invalid values.
        message: part of the expected message.
    """
    with pytest.raises(ParameterError) as error:
        RunConfig.from_sources(overrides=overrides)
    assert message in str(error.value)


def test_unreadable_config_file(tmp_path: Path) -> None:
    """Test that a broken config file is reported.

    Args:
        tmp_path: a temporary directory.
    """
    config_file = tmp_path / 'broken.json'
    config_file.write_text('{not json')
    with pytest.raises(ParameterError, match='cannot read config file'):
        RunConfig.from_sources(config_file)
    config_file.write_text('[1, 2]')
    with pytest.raises(ParameterError, match='JSON object'):
        RunConfig.from_sources(config_file)


def test_parse_windows() -> None:
    """Test the window policies."""
    assert parse_windows(None) is None
    assert parse_windows('calendar-year') is None
    assert parse_windows('0:252,252:504') == [(0, 252), (252, 504)]
    assert parse_windows([[0, 10], (10, 20)]) == [(0, 10), (10, 20)]
    with pytest.raises(ValueError, match='end > start'):
        parse_windows('5:5')
