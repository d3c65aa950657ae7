"""Tests for the result database."""

import pytest
from fixtures_panels import make_panel
from macrolab.backtest import run_grid
from macrolab.exceptions import DatabaseNotConfiguredError
from macrolab.market_data import MarketPanel
from macrolab.result_store import ResultStore


def test_save_and_load(
    result_store: ResultStore, lockstep_panel: MarketPanel
) -> None:
    """Test that stored rows come back per label.

    Args:
        result_store: a store with empty tables.
        lockstep_panel: a panel with three stocks.
    """
    grid = run_grid(lockstep_panel, [0.0], [1, None], [(0, 3), (3, 7)], K=3)
    assert result_store.save_grid(grid, 'first') == 8
    assert result_store.save_grid(grid, 'second') == 8

    records = result_store.load_records('first')
    assert len(records) == 8
    assert {r.run_label for r in records} == {'first'}
    assert [r.window_start for r in records] == [0] * 4 + [3] * 4
    assert {r.f for r in records} == {1, None}
    for record, row in zip(
        records[:4],
        grid.rows.sort_values(['window_start', 'p'], kind='stable')
        .itertuples(),
    ):
        assert record.final_wealth == pytest.approx(row.final_wealth)
        assert record.id is not None
    assert len(result_store.load_records()) == 16


def test_undefined_sharpe_is_null(result_store: ResultStore) -> None:
    """Test that an undefined Sharpe ratio is stored as NULL.

    Args:
        result_store: a store with empty tables.
    """
    panel = make_panel({'A': [2.0] * 4, 'B': [1.0] * 4})
    grid = run_grid(panel, [0.0], [None], [(0, 3)], K=2)
    result_store.save_grid(grid, 'flat')
    assert [r.sharpe for r in result_store.load_records('flat')] == [
        None, None
    ]


def test_unconfigured_store() -> None:
    """Test that an unconfigured store refuses to connect."""
    store = ResultStore()
    with pytest.raises(DatabaseNotConfiguredError):
        store.create_engine()
    with pytest.raises(DatabaseNotConfiguredError):
        store.load_records()


def test_engine_is_kept(result_store: ResultStore) -> None:
    """Test that the engine is only recreated when forced.

    Args:
        result_store: a configured store.
    """
    engine = result_store.database_engine
    result_store.create_engine()
    assert result_store.database_engine is engine
    result_store.create_engine(force=True)
    assert result_store.database_engine is not engine
