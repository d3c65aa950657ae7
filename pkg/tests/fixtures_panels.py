"""Module with fixtures that create market panels.

Small panels are built by hand so the expected values can be computed
directly; the larger ones are simulated from the generalized Atlas model.
"""
# pylint: disable=redefined-outer-name

import os
from datetime import date

import numpy as np
import pandas as pd
from macrolab.market_data import MarketPanel, TradingCalendar
from macrolab.synthetic import default_atlas_params, simulate_atlas
from macrolab_model import AtlasParams
from pytest import fixture


def make_panel(
    caps: dict[str, list[float | None]],
    delist: dict[str, float] | None = None,
    total_returns: dict[str, list[float | None]] | None = None,
    start: date = date(2024, 1, 2),
) -> MarketPanel:
    """Create a panel from capitalizations per stock.

    Total returns default to the capitalization ratio (0 on the first day of
    a stock).

    Args:
        caps: the capitalizations per stock id, None where absent.
        delist: the delisting returns per stock id.
        total_returns: explicit total returns per stock id.
        start: the first trading date.

    Returns:
        The MarketPanel.
    """
    ids = sorted(caps)
    days = len(next(iter(caps.values())))
    dates = tuple(d.date() for d in pd.bdate_range(start, periods=days))
    matrix = np.array(
        [[np.nan if v is None else v for v in caps[i]] for i in ids],
        dtype=float,
    ).T
    if total_returns is None:
        returns = np.full_like(matrix, np.nan)
        returns[1:] = matrix[1:] / matrix[:-1] - 1
        first = np.argmax(~np.isnan(matrix), axis=0)
        returns[first, np.arange(len(ids))] = 0.0
    else:
        returns = np.array(
            [[np.nan if v is None else v for v in total_returns[i]]
             for i in ids],
            dtype=float,
        ).T
    delist_returns = np.array(
        [(delist or {}).get(i, np.nan) for i in ids], dtype=float
    )
    return MarketPanel(
        TradingCalendar(dates), ids, matrix, returns, delist_returns
    )


def panel_csv_filename() -> str:
    """Return the filename of the checked-in test panel.

    Returns:
        The filename of the test panel file.
    """
    return os.path.join(os.path.dirname(__file__), 'test_panel.csv')


def atlas_params(
    n: int, horizon: int, seed: int, init_log_caps: list[float] | None = None
) -> AtlasParams:
    """Return the default linear profile with other sizes.

    Args:
        n: the number of stocks.
        horizon: the number of steps.
        seed: the seed.
        init_log_caps: replaces the default initial log capitalizations.

    Returns:
        The AtlasParams.
    """
    params, _ = default_atlas_params(n, seed=seed, horizon=horizon)
    if init_log_caps is not None:
        params = params.model_copy(update={'init_log_caps': init_log_caps})
    return params


@fixture
def lockstep_panel() -> MarketPanel:
    """Create a panel where all stocks move by the same factor each day.

    Returns:
        A 3-stock, 8-day panel.
    """
    factors = np.cumprod([1.0, 1.01, 0.98, 1.03, 1.0, 0.97, 1.02, 1.01])
    return make_panel({
        'A': list(30 * factors),
        'B': list(20 * factors),
        'C': list(10 * factors),
    })


@fixture
def flow_panel() -> MarketPanel:
    """Create a panel with one entry and one exit.

    B enters on day 5, C exits on day 7 with a delisting return of -30%.

    Returns:
        A 3-stock, 10-day panel.
    """
    return make_panel(
        {
            'A': [100, 101, 102, 101, 103, 104, 103, 105, 106, 107],
            'B': [None] * 5 + [1.5, 1.6, 1.7, 1.6, 1.8],
            'C': [50, 49, 51, 48, 47, 46, 45, 44, None, None],
        },
        delist={'C': -0.3},
    )


@fixture(scope='session')
def small_atlas_panel() -> MarketPanel:
    """Simulate a small Atlas panel.

    Returns:
        A 20-stock panel with 301 days.
    """
    return simulate_atlas(atlas_params(20, 300, seed=11))


@fixture(scope='session')
def fixed_universe_panel() -> MarketPanel:
    """Simulate the 100-stock, 10-year panel of the identity checks.

    Returns:
        The simulated panel.
    """
    return simulate_atlas(atlas_params(100, 2520, seed=5))


@fixture(scope='session')
def stylized_panel() -> MarketPanel:
    """Simulate the default 1000-stock, 10-year panel.

    Returns:
        The simulated panel.
    """
    params, _ = default_atlas_params(1000, seed=2024)
    return simulate_atlas(params)
