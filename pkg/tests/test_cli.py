"""Tests for the command line interface and the experiment pipeline."""

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from fixtures_panels import panel_csv_filename
from macrolab.cli import main

SMALL_RUN = [
    '--n', '20', '--years', '1', '--k', '10', '--dt', '1,5',
    '--p-grid', '0,0.5', '--f-grid', '5,inf',
    '--windows', '0:60,60:120,120:180,180:252', '--f', '5',
    '--subintervals', '2', '--batches', '2',
]


def test_report(tmp_path: Path) -> None:
    """Test the full pipeline on a small synthetic market.

    Args:
        tmp_path: the output directory.
    """
    assert main(['report', *SMALL_RUN, '--out', str(tmp_path)]) == 0
    summary = json.loads((tmp_path / 'summary.json').read_text())
    assert summary['stocks'] == 20
    assert summary['days'] == 253
    assert summary['windows'] == 4
    for name in (
        'panel.csv', 'params.json', 'capdist.csv', 'egr_dt1.csv',
        'egr_dt5.csv', 'lambda.csv', 'results.csv', 'attribution.json',
    ):
        assert name in summary['files']
        assert (tmp_path / name).exists()

    attribution = json.loads((tmp_path / 'attribution.json').read_text())
    assert attribution['n'] == 4
    assert attribution['f'] == '5'
    assert attribution['names'] == [
        'intercept', 'dlog_entropy', 'delta_gamma'
    ]
    assert np.all(np.isfinite(attribution['coefficients']))

    results = pd.read_csv(tmp_path / 'results.csv', dtype={'f': str})
    assert len(results) == 4 * 3 * 2
    assert set(results['f']) == {'5', 'inf'}
    params = json.loads((tmp_path / 'params.json').read_text())
    assert params['stability']['stable']


def test_simulate_is_reproducible(tmp_path: Path) -> None:
    """Test that the same configuration writes the same bytes.

    Args:
        tmp_path: a temporary directory.
    """
    for name in ('first', 'second'):
        assert main([
            'simulate', '--n', '5', '--years', '1', '--seed', '3',
            '--out', str(tmp_path / name),
        ]) == 0
    for name in ('panel.csv', 'params.json'):
        assert (tmp_path / 'first' / name).read_bytes() == (
            tmp_path / 'second' / name
        ).read_bytes()


def test_analyze_input(tmp_path: Path) -> None:
    """Test the statistics of a panel-CSV file.

    Args:
        tmp_path: the output directory.
    """
    assert main([
        'analyze', '--input', panel_csv_filename(), '--k', '2',
        '--dt', '1', '--out', str(tmp_path),
    ]) == 0
    overview = pd.read_csv(tmp_path / 'overview.csv')
    assert list(overview['n_stocks']) == [2, 2, 3, 2]
    events = pd.read_csv(tmp_path / 'events.csv')
    assert list(events['kind']) == ['entry', 'exit']
    flows = pd.read_csv(tmp_path / 'flows.csv')
    assert flows.to_dict('records') == [
        {'year': 2024, 'entries': 1, 'exits': 1}
    ]
    daily = pd.read_csv(tmp_path / 'joint_daily.csv')
    assert list(daily['t']) == [1, 2, 3]
    assert (tmp_path / 'egr_stats.json').exists()


def test_regress_reads_results(tmp_path: Path) -> None:
    """Test that regress works from the results of a separate backtest.

    Args:
        tmp_path: the output directory.
    """
    arguments = [*SMALL_RUN, '--out', str(tmp_path)]
    assert main(['backtest', *arguments]) == 0
    assert main(['regress', *arguments]) == 0
    attribution = json.loads((tmp_path / 'attribution.json').read_text())
    assert attribution['n'] == 4


@pytest.mark.parametrize(
    ('arguments', 'message'),
    [
        (['simulate', '--n', '1'], 'n must be ≥ 2'),
        (['regress', '--n', '20'], 'run backtest first'),
        (['backtest', '--p-grid', '0,abc'], 'p_grid'),
        (['analyze', '--input', 'missing.csv'], 'no such file'),
    ],
)
def test_errors(
    tmp_path: Path,
    capsys: pytest.CaptureFixture[str],
    arguments: list[str],
    message: str,
) -> None:
    """Test that errors give exit code 1 and a message.

    Args:
        tmp_path: the output directory.
        capsys: the pytest output capture.
        arguments: the command line.
        message: part of the expected message.
    """
    assert main([*arguments, '--out', str(tmp_path)]) == 1
    error = capsys.readouterr().err
    assert error.startswith('macrolab: error:')
    assert message in error


def test_missing_benchmark(
    tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    """Test that regress needs the cap-weighted benchmark runs.

    Args:
        tmp_path: the output directory.
        capsys: the pytest output capture.
    """
    arguments = [*SMALL_RUN, '--out', str(tmp_path)]
    assert main(['backtest', *arguments]) == 0
    results = tmp_path / 'results.csv'
    frame = pd.read_csv(results, dtype={'f': str})
    frame[frame['p'] != 1.0].to_csv(results, index=False)
    assert main(['regress', *arguments]) == 1
    assert 'benchmark run required' in capsys.readouterr().err
