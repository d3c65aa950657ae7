"""Module with the data sources for market panels and the panel-CSV writer.

A `DataSource` knows how to produce a `MarketPanel`. The `CSVDataSource`
reads the panel-CSV format:

    date,id,cap,total_return,delist_return

with ISO-8601 dates, a positive capitalization, the simple total return of
the day (earned over the previous trading day to this one) and an optional
delisting return that may only be given on the last row of a stock. Rows do
not need to be sorted. The `AtlasDataSource` simulates a panel instead.
"""

import logging
from abc import ABC, abstractmethod
from pathlib import Path

import numpy as np
import pandas as pd
from macrolab_model import AtlasParams

from .exceptions import PanelParseError, PanelValidationError
from .market_data import MarketPanel, TradingCalendar
from .synthetic import simulate_atlas

PANEL_COLUMNS = ['date', 'id', 'cap', 'total_return', 'delist_return']


def _to_float(column: pd.Series) -> np.ndarray:
    """Convert a text column to floats, with NaN for what is not a number.

    `pd.to_numeric` only decides which cells are numbers; the values come
    from `float` so that 17 significant digits read back exactly.

    Args:
        column: the text column.

    Returns:
        The float values.
    """
    numeric = pd.to_numeric(column, errors='coerce').notna()
    return column.where(numeric, 'nan').astype(float).to_numpy()


class DataSource(ABC):
    """Abstract class for a source of market panels."""

    @abstractmethod
    def load(self) -> MarketPanel:
        """Load the data from the source and return a panel.

        Returns:
            The loaded MarketPanel.
        """


class CSVDataSource(DataSource):
    """Data source for panel-CSV files."""

    def __init__(self, csv_filename: str | Path) -> None:
        """Initialize the CSVDataSource object.

        Args:
            csv_filename: the filename of the panel-CSV file to load.
        """
        self._logger = logging.getLogger(f'CSVDataSource-{id(self)}')
        self._csv_filename = Path(csv_filename)

    def _read_frame(self) -> pd.DataFrame:
        """Read the raw rows as text.

        Raises:
            PanelParseError: when the file cannot be read or the header is
                wrong.

        Returns:
            A DataFrame with one text column per panel-CSV field.
        """
        if not self._csv_filename.is_file():
            raise PanelParseError(f'no such file: {self._csv_filename}')
        try:
            frame = pd.read_csv(
                self._csv_filename,
                dtype=str,
                keep_default_na=False,
                na_filter=False,
                encoding='utf-8',
            )
        except pd.errors.EmptyDataError as error:
            raise PanelParseError('file is empty', line=1) from error
        except pd.errors.ParserError as error:
            raise PanelParseError(f'malformed CSV ({error})') from error

        if list(frame.columns) != PANEL_COLUMNS:
            raise PanelParseError(
                f'header must be "{",".join(PANEL_COLUMNS)}"', line=1
            )
        return frame.fillna('')

    def load(self) -> MarketPanel:
        """Load and validate the panel-CSV file.

        Raises:
            PanelParseError: for the first malformed row (bad date,
                nonpositive cap, missing or non-numeric field).
            PanelValidationError: for duplicate `(id, date)` rows, gaps in a
                presence interval and delisting returns that are not on the
                last row of a stock.

        Returns:
            The validated MarketPanel.
        """
        self._logger.debug('Reading "%s"', self._csv_filename)
        frame = self._read_frame()
        lines = np.arange(len(frame)) + 2
        errors: list[tuple[int, str]] = []

        def flag(mask: np.ndarray, message: str) -> None:
            if np.any(mask):
                errors.append((int(lines[np.argmax(mask)]), message))

        for column in ('date', 'id', 'cap', 'total_return'):
            flag((frame[column].str.strip() == '').to_numpy(),
                 f'missing field "{column}"')

        dates = pd.to_datetime(
            frame['date'], format='%Y-%m-%d', errors='coerce'
        )
        flag((dates.isna() & (frame['date'] != '')).to_numpy(),
             'bad date (expected YYYY-MM-DD)')

        caps = _to_float(frame['cap'])
        filled = frame['cap'] != ''
        flag(filled.to_numpy() & ~np.isfinite(caps), 'cap is not a number')
        flag(np.isfinite(caps) & (caps <= 0), 'cap must be positive')

        returns = _to_float(frame['total_return'])
        flag((frame['total_return'] != '').to_numpy()
             & ~np.isfinite(returns), 'total_return is not a number')
        flag(np.isfinite(returns) & (returns < -1),
             'total_return must be ≥ -1')

        has_delist = (frame['delist_return'].str.strip() != '').to_numpy()
        delists = _to_float(frame['delist_return'].where(has_delist, ''))
        flag(has_delist & ~np.isfinite(delists),
             'delist_return is not a number')
        flag(np.isfinite(delists) & (delists < -1),
             'delist_return must be ≥ -1')

        if errors:
            line, message = min(errors)
            raise PanelParseError(message, line=line)

        return self._build_panel(frame['id'].to_numpy(dtype=str),
                                 dates, caps, returns, delists, has_delist)

    def _build_panel(
        self,
        stock_ids: np.ndarray,
        dates: pd.Series,
        caps: np.ndarray,
        returns: np.ndarray,
        delists: np.ndarray,
        has_delist: np.ndarray,
    ) -> MarketPanel:
        """Pivot the parsed rows into a MarketPanel.

        Args:
            stock_ids: the stock identifier per row.
            dates: the parsed date per row.
            caps: the capitalization per row.
            returns: the total return per row.
            delists: the delisting return per row (NaN when empty).
            has_delist: True for rows with a delisting return.

        Raises:
            PanelValidationError: for duplicates and misplaced delisting
                returns; gaps are reported by MarketPanel.

        Returns:
            The MarketPanel.
        """
        day_values = dates.dt.date.to_numpy()
        keys = pd.DataFrame({'id': stock_ids, 'date': day_values})
        duplicated = keys.duplicated(keep=False).to_numpy()
        if np.any(duplicated):
            pairs = sorted({
                (str(i), d.isoformat())
                for i, d in zip(stock_ids[duplicated],
                                day_values[duplicated])
            })
            raise PanelValidationError('duplicate (id, date) rows', pairs)

        calendar = TradingCalendar(tuple(sorted(set(day_values))))
        ids = sorted(set(stock_ids.tolist()))
        rows = np.array([calendar.ordinal(d) for d in day_values], dtype=int)
        columns = np.searchsorted(ids, stock_ids)

        shape = (len(calendar), len(ids))
        cap_matrix = np.full(shape, np.nan)
        return_matrix = np.full(shape, np.nan)
        cap_matrix[rows, columns] = caps
        return_matrix[rows, columns] = returns

        last_rows = np.full(len(ids), -1)
        np.maximum.at(last_rows, columns, rows)
        misplaced = has_delist & (rows != last_rows[columns])
        if np.any(misplaced):
            raise PanelValidationError(
                'delist_return is only allowed on the last row of a stock',
                [(ids[c], calendar.dates[r].isoformat())
                 for r, c in zip(rows[misplaced], columns[misplaced])],
            )
        delist_returns = np.full(len(ids), np.nan)
        delist_returns[columns[has_delist]] = delists[has_delist]

        panel = MarketPanel(
            calendar=calendar,
            ids=ids,
            caps=cap_matrix,
            total_returns=return_matrix,
            delist_returns=delist_returns,
        )
        self._logger.info(
            'Loaded panel with %d stocks over %d days',
            panel.n_stocks,
            panel.n_days,
        )
        return panel


class AtlasDataSource(DataSource):
    """Data source that simulates a generalized Atlas market."""

    def __init__(
        self, params: AtlasParams, shocks: np.ndarray | None = None
    ) -> None:
        """Initialize the AtlasDataSource object.

        Args:
            params: the parameters of the simulation.
            shocks: optional standard normal shocks `(horizon, n)` to use
                instead of the seeded generator.
        """
        self._logger = logging.getLogger(f'AtlasDataSource-{id(self)}')
        self._params = params
        self._shocks = shocks

    def load(self) -> MarketPanel:
        """Simulate the panel.

        Returns:
            The simulated MarketPanel.
        """
        self._logger.info(
            'Simulating %d stocks for %d steps (seed %d)',
            self._params.n,
            self._params.horizon,
            self._params.seed,
        )
        return simulate_atlas(self._params, shocks=self._shocks)


def load_panel(path: str | Path) -> MarketPanel:
    """Load a panel-CSV file.

    Args:
        path: the file to load.

    Returns:
        The validated MarketPanel.
    """
    return CSVDataSource(path).load()


def write_panel(panel: MarketPanel, path: str | Path) -> None:
    """Write a panel as panel-CSV.

    Rows are sorted by date and identifier and numbers are written with 17
    significant digits, so loading the file gives back the same values.

    Args:
        panel: the panel to write.
        path: the destination file.
    """
    rows, columns = np.nonzero(panel.presence)
    order = np.lexsort((columns, rows))
    rows, columns = rows[order], columns[order]
    delist = np.where(
        rows == panel.last_days[columns],
        panel.delist_returns[columns],
        np.nan,
    )
    frame = pd.DataFrame({
        'date': [panel.calendar.dates[r].isoformat() for r in rows],
        'id': [panel.ids[c] for c in columns],
        'cap': panel.caps[rows, columns],
        'total_return': panel.total_returns[rows, columns],
        'delist_return': delist,
    })
    frame.to_csv(
        path,
        index=False,
        float_format='%.17g',
        na_rep='',
        lineterminator='\n',
        encoding='utf-8',
    )
