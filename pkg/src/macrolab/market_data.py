"""Module with the market panel and the operations on it.

A `MarketPanel` holds the daily capitalizations, total returns and delisting
returns of a changing set of stocks over a trading calendar. The panel is
immutable: the arrays are made read-only when the panel is created, so it can
be shared between threads without locks.

Ranks are by descending capitalization; ties are broken by ascending stock
identifier. The stock columns of a panel are sorted by identifier, so a
stable sort on the capitalization gives this rule for free.
"""

import logging
from dataclasses import dataclass, field
from datetime import date
from functools import cached_property
from typing import Literal

import numpy as np
import pandas as pd

from .exceptions import (
    DateOutOfRangeError,
    EmptyUniverseError,
    PanelError,
    PanelValidationError,
    ParameterError,
)

_logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TradingCalendar:
    """The trading-day grid of a panel.

    Attributes:
        dates: the strictly increasing trading dates; ordinal 0 is the first.
    """

    dates: tuple[date, ...]
    _index: dict[date, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        """Validate the dates and build the date → ordinal map.

        Raises:
            PanelValidationError: when the dates are not strictly increasing.
        """
        problems = [
            ('-', later.isoformat())
            for earlier, later in zip(self.dates, self.dates[1:])
            if not earlier < later
        ]
        if problems:
            raise PanelValidationError(
                'calendar dates are not strictly increasing', problems
            )
        object.__setattr__(
            self, '_index', {d: t for t, d in enumerate(self.dates)}
        )

    def __len__(self) -> int:
        """Return the number of trading days.

        Returns:
            The number of trading days.
        """
        return len(self.dates)

    @property
    def last(self) -> int:
        """Return the final ordinal.

        Returns:
            The ordinal of the last trading day.
        """
        return len(self.dates) - 1

    def ordinal(self, day: date) -> int:
        """Return the ordinal of a trading date.

        Args:
            day: the date to look up.

        Raises:
            DateOutOfRangeError: when the date is not a trading day.

        Returns:
            The ordinal t of the date.
        """
        try:
            return self._index[day]
        except KeyError as error:
            raise DateOutOfRangeError(
                f'{day.isoformat()} is not in the calendar'
            ) from error

    def check(self, t: int) -> int:
        """Check that an ordinal is inside the calendar.

        Args:
            t: the ordinal.

        Raises:
            DateOutOfRangeError: when t is out of range.

        Returns:
            The same ordinal.
        """
        if not 0 <= t < len(self.dates):
            raise DateOutOfRangeError(
                f'ordinal {t} outside of calendar [0, {self.last}]'
            )
        return t


class MarketPanel:
    """Immutable daily panel of capitalizations and returns.

    Absent observations are stored as NaN. Every stock has exactly one
    contiguous presence interval `[first_day, last_day]`.

    Attributes:
        calendar: the trading calendar.
        ids: the stock identifiers, sorted ascending (the column order).
        caps: array `(days, stocks)` with capitalizations, NaN if absent.
        total_returns: array `(days, stocks)` with the simple return earned
            over `(t-1, t]`; NaN if absent.
        delist_returns: array `(stocks,)` with the delisting return applied
            after the last day, NaN when not given.
        first_days: array `(stocks,)` with the first ordinal of each stock.
        last_days: array `(stocks,)` with the last ordinal of each stock.
    """

    def __init__(
        self,
        calendar: TradingCalendar,
        ids: list[str] | tuple[str, ...],
        caps: np.ndarray,
        total_returns: np.ndarray,
        delist_returns: np.ndarray | None = None,
    ) -> None:
        """Validate the arrays and freeze them.

        Args:
            calendar: the trading calendar.
            ids: the stock identifiers, in column order.
            caps: the capitalizations, NaN where a stock is absent.
            total_returns: the total returns, NaN where a stock is absent.
            delist_returns: the delisting returns, NaN where not given.

        Raises:
            PanelValidationError: when the panel violates its invariants.
        """
        ids = tuple(ids)
        caps = np.array(caps, dtype=float)
        total_returns = np.array(total_returns, dtype=float)
        shape = (len(calendar), len(ids))
        if caps.shape != shape or total_returns.shape != shape:
            raise PanelValidationError(
                f'arrays must have shape {shape}, got {caps.shape} and '
                + f'{total_returns.shape}'
            )
        if list(ids) != sorted(set(ids)):
            raise PanelValidationError(
                'stock ids must be unique and sorted ascending'
            )
        if delist_returns is None:
            delist_returns = np.full(len(ids), np.nan)
        delist_returns = np.array(delist_returns, dtype=float)

        present = ~np.isnan(caps)
        if np.any(caps[present] <= 0):
            rows, cols = np.nonzero(present & (np.nan_to_num(caps) <= 0))
            raise PanelValidationError(
                'capitalizations must be positive',
                [(ids[c], calendar.dates[r].isoformat()) for r, c in
                 zip(rows, cols)],
            )
        counts = present.sum(axis=0)
        never = [(ids[c], '-') for c in np.flatnonzero(counts == 0)]
        if never:
            raise PanelValidationError('stock is never present', never)
        first_days = np.argmax(present, axis=0)
        last_days = len(calendar) - 1 - np.argmax(present[::-1], axis=0)
        gaps: list[tuple[str, str]] = []
        for column in np.flatnonzero(counts != last_days - first_days + 1):
            span = present[first_days[column]:last_days[column] + 1, column]
            for offset in np.flatnonzero(~span):
                day = calendar.dates[first_days[column] + offset]
                gaps.append((ids[column], day.isoformat()))
        if gaps:
            raise PanelValidationError('gap in presence interval', gaps)
        if np.any(np.isnan(total_returns) != ~present):
            raise PanelValidationError(
                'total returns must be given exactly when a stock is present'
            )

        for array in (caps, total_returns, delist_returns, first_days,
                      last_days):
            array.setflags(write=False)
        self.calendar = calendar
        self.ids = ids
        self.caps = caps
        self.total_returns = total_returns
        self.delist_returns = delist_returns
        self.first_days = first_days
        self.last_days = last_days
        self._columns = {stock: c for c, stock in enumerate(ids)}

    @property
    def n_days(self) -> int:
        """Return the number of trading days.

        Returns:
            The calendar length.
        """
        return len(self.calendar)

    @property
    def n_stocks(self) -> int:
        """Return the number of stocks that ever appear.

        Returns:
            The number of stock columns.
        """
        return len(self.ids)

    @cached_property
    def log_caps(self) -> np.ndarray:
        """Return the natural log of the capitalizations (NaN if absent).

        Returns:
            A read-only array with the log capitalizations.
        """
        values = np.log(self.caps)
        values.setflags(write=False)
        return values

    @cached_property
    def presence(self) -> np.ndarray:
        """Return the presence mask.

        Returns:
            A read-only boolean array `(days, stocks)`.
        """
        values = ~np.isnan(self.caps)
        values.setflags(write=False)
        return values

    @cached_property
    def has_flows(self) -> bool:
        """Check if any stock enters or exits during the calendar.

        Returns:
            True if there is at least one entry or exit.
        """
        return bool(
            np.any(self.first_days > 0)
            or np.any(self.last_days < self.calendar.last)
        )

    def column(self, stock: str) -> int:
        """Return the column of a stock.

        Args:
            stock: the stock identifier.

        Raises:
            PanelError: when the stock is unknown.

        Returns:
            The column index.
        """
        try:
            return self._columns[stock]
        except KeyError as error:
            raise PanelError(f'unknown stock "{stock}"') from error

    def cap(self, stock: str, t: int) -> float | None:
        """Return the capitalization of a stock on a day.

        Args:
            stock: the stock identifier.
            t: the ordinal.

        Returns:
            The capitalization, or None when the stock is absent.
        """
        value = self.caps[self.calendar.check(t), self.column(stock)]
        return None if np.isnan(value) else float(value)

    def first_day(self, stock: str) -> int:
        """Return the first ordinal on which a stock is present.

        Args:
            stock: the stock identifier.

        Returns:
            The first ordinal.
        """
        return int(self.first_days[self.column(stock)])

    def last_day(self, stock: str) -> int:
        """Return the last ordinal on which a stock is present.

        Args:
            stock: the stock identifier.

        Returns:
            The last ordinal.
        """
        return int(self.last_days[self.column(stock)])

    def universe_size(self, t: int) -> int:
        """Return the number of stocks present on a day.

        Args:
            t: the ordinal.

        Returns:
            The size of the full universe on day t.
        """
        return int(self.presence[self.calendar.check(t)].sum())


@dataclass(frozen=True)
class Universe:
    """A ranked set of stocks on one day.

    Attributes:
        t: the ordinal of the day.
        members: the stock identifiers, by descending capitalization.
        columns: the panel columns of the members, in the same order.
    """

    t: int
    members: tuple[str, ...]
    columns: np.ndarray = field(repr=False, compare=False)

    def __len__(self) -> int:
        """Return the number of members.

        Returns:
            The number of members.
        """
        return len(self.members)


@dataclass(frozen=True, eq=False)
class WeightVector:
    """A probability vector over the members of a universe.

    Attributes:
        universe: the universe the weights belong to.
        weights: the weights, in the order of `universe.members`.
    """

    universe: Universe
    weights: np.ndarray

    def as_dict(self) -> dict[str, float]:
        """Return the weights by stock identifier.

        Returns:
            A dict with the weight per member.
        """
        return dict(
            zip(self.universe.members, (float(w) for w in self.weights))
        )


@dataclass(frozen=True)
class EntryExitEvent:
    """A stock entering or leaving the market.

    Attributes:
        kind: `entry` or `exit`.
        stock: the stock identifier.
        t: the ordinal of the first (entry) or last (exit) day.
        weight: the weight relative to the full universe on that day.
    """

    kind: Literal['entry', 'exit']
    stock: str
    t: int
    weight: float


def ranked_columns(panel: MarketPanel, t: int) -> np.ndarray:
    """Rank all stocks present on a day.

    Args:
        panel: the market panel.
        t: the ordinal.

    Returns:
        The panel columns present on day t, by descending capitalization and
        ascending identifier on ties.
    """
    caps = panel.caps[panel.calendar.check(t)]
    columns = np.flatnonzero(~np.isnan(caps))
    order = np.argsort(-caps[columns], kind='stable')
    return columns[order]


def universe_from_columns(
    panel: MarketPanel, t: int, columns: np.ndarray
) -> Universe:
    """Create a Universe from ranked panel columns.

    Args:
        panel: the market panel.
        t: the ordinal.
        columns: the ranked panel columns.

    Returns:
        The Universe.
    """
    columns = np.asarray(columns, dtype=int)
    return Universe(
        t=t,
        members=tuple(panel.ids[c] for c in columns),
        columns=columns,
    )


def top_k_universe(
    panel: MarketPanel,
    t: int,
    K: int,  # noqa: N803
) -> Universe:
    """Return the K largest stocks on a day.

    Args:
        panel: the market panel.
        t: the ordinal.
        K: the maximum number of stocks.

    Raises:
        ParameterError: when K < 1.

    Returns:
        The min(K, universe size) largest stocks, ranked.
    """
    if K < 1:
        raise ParameterError('K must be ≥ 1')
    return universe_from_columns(panel, t, ranked_columns(panel, t)[:K])


def full_universe(panel: MarketPanel, t: int) -> Universe:
    """Return every stock present on a day, ranked.

    Args:
        panel: the market panel.
        t: the ordinal.

    Returns:
        The full ranked universe.
    """
    return universe_from_columns(panel, t, ranked_columns(panel, t))


def capitalization_weights(
    panel: MarketPanel, universe: Universe
) -> WeightVector:
    """Compute the capitalization weights of a universe.

    Args:
        panel: the market panel.
        universe: the universe; all members must be present on its day.

    Raises:
        EmptyUniverseError: when the universe is empty.
        PanelError: when a member is absent on the universe day.

    Returns:
        The weights cap_i / sum of caps.
    """
    if len(universe) == 0:
        raise EmptyUniverseError('cannot weight an empty universe')
    caps = panel.caps[universe.t, universe.columns]
    if np.any(np.isnan(caps)):
        raise PanelError(
            f'universe has members absent on day {universe.t}'
        )
    return WeightVector(universe=universe, weights=caps / caps.sum())


def log_return(panel: MarketPanel, stock: str, t: int) -> float | None:
    """Return the log capitalization change of a stock from t to t+1.

    Args:
        panel: the market panel.
        stock: the stock identifier.
        t: the ordinal; the stock must be present on day t.

    Raises:
        PanelError: when the stock is absent on day t.

    Returns:
        log cap(t+1) - log cap(t), or None ("absent") when the stock is not
        present on day t+1.
    """
    column = panel.column(stock)
    if not panel.presence[panel.calendar.check(t), column]:
        raise PanelError(f'stock "{stock}" is absent on day {t}')
    if t + 1 > panel.calendar.last or not panel.presence[t + 1, column]:
        return None
    return float(panel.log_caps[t + 1, column] - panel.log_caps[t, column])


def entry_exit_events(panel: MarketPanel) -> list[EntryExitEvent]:
    """List the entries and exits of the panel.

    Stocks alive on day 0 have no entry and stocks alive on the last day have
    no exit.

    Args:
        panel: the market panel.

    Returns:
        The events, sorted by day, kind and stock.
    """
    totals = np.nansum(panel.caps, axis=1)
    events: list[EntryExitEvent] = []
    for column, stock in enumerate(panel.ids):
        first = int(panel.first_days[column])
        last = int(panel.last_days[column])
        if first > 0:
            events.append(EntryExitEvent(
                'entry', stock, first,
                float(panel.caps[first, column] / totals[first]),
            ))
        if last < panel.calendar.last:
            events.append(EntryExitEvent(
                'exit', stock, last,
                float(panel.caps[last, column] / totals[last]),
            ))
    events.sort(key=lambda event: (event.t, event.kind, event.stock))
    _logger.debug('Found %d entry/exit events', len(events))
    return events


def universe_overview(
    panel: MarketPanel, coverage: float = 0.9
) -> pd.DataFrame:
    """Describe the size of the universe per day.

    Args:
        panel: the market panel.
        coverage: the fraction of total capitalization to cover.

    Raises:
        ParameterError: when coverage is not in (0, 1].

    Returns:
        A DataFrame with columns `t`, `date`, `n_stocks` and `n_cover`, where
        `n_cover` is the minimum number of largest stocks covering at least
        `coverage` of the total capitalization.
    """
    if not 0 < coverage <= 1:
        raise ParameterError('coverage must be in (0, 1]')
    caps = np.nan_to_num(panel.caps, nan=0.0)
    ranked = -np.sort(-caps, axis=1)
    shares = np.cumsum(ranked, axis=1) / ranked.sum(axis=1, keepdims=True)
    # The tolerance keeps exact coverage (e.g. 1.0) from missing by rounding
    n_cover = np.argmax(shares >= coverage - 1e-12, axis=1) + 1
    return pd.DataFrame({
        't': np.arange(panel.n_days),
        'date': [d.isoformat() for d in panel.calendar.dates],
        'n_stocks': panel.presence.sum(axis=1),
        'n_cover': n_cover,
    })


def yearly_flows(panel: MarketPanel) -> pd.DataFrame:
    """Count the entries and exits per calendar year.

    Args:
        panel: the market panel.

    Returns:
        A DataFrame with columns `year`, `entries` and `exits`.
    """
    years = sorted({d.year for d in panel.calendar.dates})
    table = pd.DataFrame({'year': years, 'entries': 0, 'exits': 0})
    table = table.set_index('year')
    for event in entry_exit_events(panel):
        year = panel.calendar.dates[event.t].year
        table.loc[year, 'entries' if event.kind == 'entry' else 'exits'] += 1
    return table.reset_index()


def calendar_year_windows(
    calendar: TradingCalendar,
) -> list[tuple[int, int]]:
    """Split a calendar into calendar-year windows.

    A window runs from the first trading day of a year to the first trading
    day of the next year, so consecutive windows share their endpoint. The
    last window ends on the final trading day.

    Args:
        calendar: the trading calendar.

    Returns:
        The `(start, end)` ordinal pairs; windows shorter than two days are
        dropped.
    """
    starts = [
        t for t, day in enumerate(calendar.dates)
        if t == 0 or day.year != calendar.dates[t - 1].year
    ]
    ends = [*starts[1:], calendar.last]
    return [(s, e) for s, e in zip(starts, ends) if e > s]
