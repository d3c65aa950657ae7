"""Module with the diversity-weighted portfolio backtests.

A run starts a window with wealth `initial_wealth` invested cost-free in the
diversity weights of the top-K capitalization weights. Each following day:

1. holdings grow by the day's return (the cap-implied price return in
   cash-bucket mode, with the rest of the total return paid into cash);
2. every f trading days the support is formed again and the portfolio is
   rebalanced, sweeping in all cash, under proportional transaction costs;
3. holdings of stocks delisting that day take their delisting return and
   move to cash, where they stay until the next rebalance.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from macrolab_model import BacktestConfig, DividendMode, frequency_label

from .exceptions import (
    BracketError,
    EmptySupportError,
    ParameterError,
)
from .macrostats import entropy_path, power_weights
from .market_data import (
    MarketPanel,
    WeightVector,
    calendar_year_windows,
    capitalization_weights,
    top_k_universe,
)
from .regression import ols_fit

RESULT_COLUMNS = [
    'window_start',
    'window_end',
    'p',
    'f',
    'final_wealth',
    'rel_log_return',
    'max_drawdown',
    'sharpe',
    'total_costs',
    'diversity_drawdown',
]
TRADING_DAYS = 252

_logger = logging.getLogger(__name__)


@dataclass
class PortfolioState:
    """The holdings and cash of a portfolio at the close of a day.

    Attributes:
        t: the ordinal of the day.
        holdings: currency amount per panel column (0 when not held).
        cash: the cash amount.
    """

    t: int
    holdings: np.ndarray
    cash: float = 0.0

    @property
    def wealth(self) -> float:
        """Return the total value of the portfolio."""
        return float(self.cash + self.holdings.sum())

    @property
    def support_size(self) -> int:
        """Return the number of stocks held."""
        return int(np.count_nonzero(self.holdings > 0))


@dataclass(frozen=True)
class Rebalance:
    """One rebalance of a run.

    Attributes:
        t: the ordinal of the rebalance.
        turnover: traded amount as a fraction of the pre-trade wealth.
        cost: the transaction cost paid.
    """

    t: int
    turnover: float
    cost: float


@dataclass(frozen=True, eq=False)
class WealthSeries:
    """The wealth path of one run.

    Attributes:
        config: the configuration of the run.
        window: the `(start, end)` ordinals.
        t: the ordinals of the path.
        wealth: Z(t), starting at `config.initial_wealth`.
        support: the number of stocks held per day.
        rebalances: the rebalances after initialization.
        terminated: True when the wealth reached 0 and the path was cut.
        missing_delist_returns: delistings without a delisting return,
            treated as 0.
    """

    config: BacktestConfig
    window: tuple[int, int]
    t: np.ndarray
    wealth: np.ndarray
    support: np.ndarray
    rebalances: list[Rebalance] = field(default_factory=list)
    terminated: bool = False
    missing_delist_returns: int = 0

    @property
    def total_costs(self) -> float:
        """Return the transaction costs paid in the window."""
        return float(sum(r.cost for r in self.rebalances))

    @property
    def log_growth(self) -> float:
        """Return log Z(end) / Z(start)."""
        if self.wealth[-1] <= 0:
            return -math.inf
        return float(np.log(self.wealth[-1] / self.wealth[0]))

    def to_frame(self) -> pd.DataFrame:
        """Return the wealth curve.

        Returns:
            A DataFrame with columns `t` and `Z`.
        """
        return pd.DataFrame({'t': self.t, 'Z': self.wealth})


@dataclass(frozen=True)
class PerfStats:
    """Performance of one run against its benchmark.

    Attributes:
        window: the `(start, end)` ordinals.
        final_wealth: Z at the end of the window.
        rel_log_return: log growth minus the benchmark's log growth.
        max_drawdown: maximum drawdown of the wealth.
        sharpe: annualized Sharpe ratio of daily simple returns, None when
            undefined (constant returns).
        diversity_drawdown: maximum drawdown of the top-K entropy.
        total_costs: transaction costs paid.
    """

    window: tuple[int, int]
    final_wealth: float
    rel_log_return: float
    max_drawdown: float
    sharpe: float | None
    diversity_drawdown: float
    total_costs: float


def diversity_weights(mu: WeightVector, p: float) -> WeightVector:
    """Compute the diversity weights w_i ∝ mu_i**p.

    Args:
        mu: the capitalization weights.
        p: the diversity parameter in [0, 1].

    Returns:
        The diversity weights over the same universe; p=1 returns mu and
        p=0 equal weights.
    """
    if p == 1:
        return mu
    return WeightVector(
        universe=mu.universe, weights=power_weights(mu.weights, p)
    )


def _rebalance_cost(
    targets: np.ndarray, holdings: np.ndarray, value: float, c: float
) -> float:
    """Return the cost of trading holdings to targets at a post-trade value.

    Args:
        targets: the target weights.
        holdings: the pre-trade holdings.
        value: the post-trade wealth.
        c: the cost rate.

    Returns:
        c Σ|w_i value - h_i|.
    """
    return c * float(np.abs(targets * value - holdings).sum())


def rebalance_with_costs(
    state: PortfolioState, targets: WeightVector, c: float
) -> tuple[PortfolioState, Rebalance]:
    """Trade a portfolio to target weights under proportional costs.

    The post-trade wealth V solves V = W - c Σ|w_i V - h_i|, found by
    bisection on [W(1-c)/(1+c), W] and then solved exactly on the linear
    piece the bisection ends on. All cash is invested.

    Args:
        state: the pre-trade state.
        targets: the target weights; all members present on `state.t`.
        c: the cost rate in [0, 1).

    Raises:
        ParameterError: when c is outside [0, 1).
        BracketError: when the bracket does not hold the fixed point.

    Returns:
        The post-trade state and the Rebalance record.
    """
    if not 0 <= c < 1:
        raise ParameterError('cost rate must be in [0, 1)')
    wealth = state.wealth
    full = np.zeros_like(state.holdings)
    full[targets.universe.columns] = targets.weights
    holdings = state.holdings
    if c == 0 or wealth <= 0:
        value = wealth
    else:
        def excess(v: float) -> float:
            return v + _rebalance_cost(full, holdings, v, c) - wealth

        low, high = wealth * (1 - c) / (1 + c), wealth
        tolerance = 1e-12 * wealth
        if excess(low) > tolerance or excess(high) < -tolerance:
            raise BracketError('no rebalance fixed point in the bracket')
        while high - low > tolerance:
            middle = 0.5 * (low + high)
            if excess(middle) > 0:
                high = middle
            else:
                low = middle
        value = 0.5 * (low + high)
        signs = np.sign(full * value - holdings)
        exact = (wealth + c * float(signs @ holdings)) / (
            1 + c * float(signs @ full)
        )
        if abs(excess(exact)) <= abs(excess(value)):
            value = exact
    traded = float(np.abs(full * value - holdings).sum())
    new_state = PortfolioState(t=state.t, holdings=full * value, cash=0.0)
    return new_state, Rebalance(
        t=state.t,
        turnover=traded / wealth if wealth > 0 else 0.0,
        cost=wealth - value,
    )


def max_drawdown(values: np.ndarray) -> float:
    """Compute the maximum drawdown of a positive path.

    Args:
        values: the path.

    Returns:
        max over t of 1 - v(t) / max_{s≤t} v(s).
    """
    values = np.asarray(values, dtype=float)
    peaks = np.maximum.accumulate(values)
    return float(np.max(1 - values / peaks))


def sharpe_ratio(wealth: np.ndarray) -> float | None:
    """Compute the annualized Sharpe ratio of daily simple returns.

    The risk-free rate is 0.

    Args:
        wealth: the wealth path.

    Returns:
        mean / sd * sqrt(252), or None for fewer than two returns or
        constant returns.
    """
    returns = np.diff(wealth) / wealth[:-1]
    if len(returns) < 2:
        return None
    sd = returns.std(ddof=1)
    if not sd > 1e-15:
        return None
    return float(returns.mean() / sd * math.sqrt(TRADING_DAYS))


def performance_stats(
    series: WealthSeries, benchmark: WealthSeries, entropy: np.ndarray
) -> PerfStats:
    """Compute the performance of a run against its benchmark.

    Args:
        series: the run.
        benchmark: the benchmark run over the same window.
        entropy: the daily top-K entropy over the whole calendar.

    Raises:
        ParameterError: when the windows differ.

    Returns:
        The PerfStats.
    """
    if series.window != benchmark.window:
        raise ParameterError('series and benchmark windows differ')
    start, end = series.window
    return PerfStats(
        window=series.window,
        final_wealth=float(series.wealth[-1]),
        rel_log_return=series.log_growth - benchmark.log_growth,
        max_drawdown=max_drawdown(series.wealth),
        sharpe=sharpe_ratio(series.wealth),
        diversity_drawdown=max_drawdown(entropy[start:end + 1]),
        total_costs=series.total_costs,
    )


class PortfolioSimulator:
    """Run one diversity-weighted portfolio over windows of a panel."""

    def __init__(self, panel: MarketPanel, config: BacktestConfig) -> None:
        """Initialize the simulator.

        Args:
            panel: the market panel, shared read-only.
            config: the run configuration.
        """
        self._logger = logging.getLogger(f'PortfolioSimulator-{id(self)}')
        self.panel = panel
        self.config = config

    def _targets(self, t: int) -> WeightVector:
        """Form the support and the diversity weights of a day.

        Args:
            t: the ordinal.

        Raises:
            EmptySupportError: when no stock is present on the day.

        Returns:
            The target weights over the top-K universe.
        """
        universe = top_k_universe(self.panel, t, self.config.K)
        if len(universe) == 0:
            raise EmptySupportError(f'no stocks to hold on day {t}')
        return diversity_weights(
            capitalization_weights(self.panel, universe), self.config.p
        )

    def _grow(self, state: PortfolioState, t: int) -> None:
        """Apply the returns of a day to the held stocks.

        Args:
            state: the state, changed in place.
            t: the ordinal of the day.
        """
        held = state.holdings > 0
        total = self.panel.total_returns[t, held]
        if self.config.dividend_mode is DividendMode.DAILY_REINVEST:
            state.holdings[held] *= 1 + total
        else:
            # the price part moves the holding, the rest is paid into cash
            price = self.panel.caps[t, held] / self.panel.caps[t - 1, held] - 1
            dividend = np.maximum(total - price, 0.0)
            state.cash += float(state.holdings[held] @ dividend)
            state.holdings[held] *= 1 + total - dividend
        state.t = t

    def _delist(self, state: PortfolioState, t: int) -> int:
        """Move the holdings of stocks leaving after a day to cash.

        Nothing leaves on the final calendar day.

        Args:
            state: the state, changed in place.
            t: the ordinal of the day.

        Returns:
            The number of those stocks without a delisting return.
        """
        if t == self.panel.calendar.last:
            return 0
        leaving = np.flatnonzero(
            (self.panel.last_days == t) & (state.holdings > 0)
        )
        if not len(leaving):
            return 0
        delist = self.panel.delist_returns[leaving]
        missing = int(np.isnan(delist).sum())
        proceeds = state.holdings[leaving] * (1 + np.nan_to_num(delist))
        state.cash += float(np.maximum(proceeds, 0.0).sum())
        state.holdings[leaving] = 0.0
        self._logger.debug('Moved %d delisted holdings to cash', len(leaving))
        return missing

    def run(self, window: tuple[int, int]) -> WealthSeries:
        """Run the portfolio over one window.

        Args:
            window: the `(start, end)` ordinals.

        Raises:
            ParameterError: when the window is not inside the calendar.
            EmptySupportError: when there is nothing to hold at a rebalance.

        Returns:
            The WealthSeries.
        """
        start, end = window
        calendar = self.panel.calendar
        calendar.check(start)
        calendar.check(end)
        if end <= start:
            raise ParameterError(f'window {window} must have end > start')
        f = self.config.f
        self._logger.debug(
            'Running p=%s f=%s over %s', self.config.p, self.config.f_label,
            window,
        )

        targets = self._targets(start)
        holdings = np.zeros(self.panel.n_stocks)
        holdings[targets.universe.columns] = (
            targets.weights * self.config.initial_wealth
        )
        state = PortfolioState(t=start, holdings=holdings)
        wealth = [state.wealth]
        support = [state.support_size]
        # stocks leaving on the first day count from the next one
        missing = self._delist(state, start)
        rebalances: list[Rebalance] = []
        terminated = False

        for t in range(start + 1, end + 1):
            self._grow(state, t)
            if f is not None and (t - start) % f == 0 and t < end:
                state, record = rebalance_with_costs(
                    state, self._targets(t), self.config.cost_rate
                )
                rebalances.append(record)
            missing += self._delist(state, t)
            wealth.append(state.wealth)
            support.append(state.support_size)
            if state.wealth <= 0:
                self._logger.warning('Wealth reached 0 on day %d', t)
                terminated = True
                break

        if missing:
            self._logger.info(
                'Treated %d missing delisting returns as 0', missing
            )
        days = np.arange(start, start + len(wealth))
        return WealthSeries(
            config=self.config,
            window=(start, end),
            t=days,
            wealth=np.array(wealth),
            support=np.array(support),
            rebalances=rebalances,
            terminated=terminated,
            missing_delist_returns=missing,
        )


def run_backtest(
    panel: MarketPanel, config: BacktestConfig, window: tuple[int, int]
) -> WealthSeries:
    """Run one portfolio over one window.

    Args:
        panel: the market panel.
        config: the run configuration.
        window: the `(start, end)` ordinals.

    Returns:
        The WealthSeries.
    """
    return PortfolioSimulator(panel, config).run(window)


def _f_order(f: int | None) -> float:
    return math.inf if f is None else f


@dataclass(frozen=True, eq=False)
class GridResults:
    """Results of a (p, f, window) grid.

    Attributes:
        rows: the results table, sorted by window, p and f.
        series: the wealth series per `(window, p, f)`.
        stats: the performance per `(window, p, f)`.
    """

    rows: pd.DataFrame
    series: dict[tuple[tuple[int, int], float, int | None], WealthSeries]
    stats: dict[tuple[tuple[int, int], float, int | None], PerfStats]

    def has_run(
        self, window: tuple[int, int], p: float, f: int | None
    ) -> bool:
        """Check if the grid has a run.

        Args:
            window: the window.
            p: the diversity parameter.
            f: the frequency, None for ∞.

        Returns:
            True if the run exists.
        """
        return (tuple(window), float(p), f) in self.series

    def to_csv_frame(self) -> pd.DataFrame:
        """Return the rows with `f` as text (`inf` for ∞).

        Returns:
            The results table for emission.
        """
        frame = self.rows.copy()
        frame['f'] = [
            frequency_label(None if pd.isna(f) else int(f))
            for f in self.rows['f']
        ]
        return frame


class GridRunner:
    """Run backtest grids with a pool of worker threads."""

    def __init__(
        self,
        panel: MarketPanel,
        K: int = 500,  # noqa: N803
        cost_rate: float = 0.0025,
        initial_wealth: float = 1000.0,
        dividend_mode: DividendMode = DividendMode.CASH_BUCKET,
        threads: int = 1,
    ) -> None:
        """Initialize the runner.

        Args:
            panel: the market panel, shared read-only by the workers.
            K: the support size.
            cost_rate: the proportional cost rate.
            initial_wealth: the wealth at each window start.
            dividend_mode: how dividends are handled.
            threads: the number of worker threads.
        """
        self._logger = logging.getLogger(f'GridRunner-{id(self)}')
        if threads < 1:
            raise ParameterError('threads must be ≥ 1')
        self.panel = panel
        self.K = K
        self.cost_rate = cost_rate
        self.initial_wealth = initial_wealth
        self.dividend_mode = dividend_mode
        self.threads = threads

    def _config(self, p: float, f: int | None) -> BacktestConfig:
        """Build the configuration of one run of the grid.

        Args:
            p: the diversity parameter.
            f: the rebalance frequency, None for ∞.

        Returns:
            The BacktestConfig.
        """
        return BacktestConfig(
            p=p,
            f=f,
            K=self.K,
            cost_rate=self.cost_rate,
            initial_wealth=self.initial_wealth,
            dividend_mode=self.dividend_mode,
        )

    def run(
        self,
        p_list: list[float],
        f_list: list[int | None],
        windows: list[tuple[int, int]] | None = None,
    ) -> GridResults:
        """Run every (p, f, window) and its (1, f, window) benchmark.

        Args:
            p_list: the diversity parameters.
            f_list: the frequencies, None for ∞.
            windows: the windows; calendar years when None.

        Raises:
            ParameterError: when a list is empty.

        Returns:
            The GridResults.
        """
        if not p_list or not f_list:
            raise ParameterError('p and f lists must not be empty')
        windows = (
            calendar_year_windows(self.panel.calendar)
            if windows is None else [tuple(w) for w in windows]
        )
        if not windows:
            raise ParameterError('no windows to run')
        p_values = sorted({float(p) for p in p_list} | {1.0})
        f_values = sorted(set(f_list), key=_f_order)
        keys = [
            (window, p, f)
            for window in windows for p in p_values for f in f_values
        ]
        self._logger.info(
            'Running %d backtests on %d threads', len(keys), self.threads
        )

        def work(
            key: tuple[tuple[int, int], float, int | None],
        ) -> WealthSeries:
            window, p, f = key
            return PortfolioSimulator(self.panel, self._config(p, f)).run(
                window
            )

        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            series = dict(zip(keys, executor.map(work, keys)))

        entropy = entropy_path(self.panel, self.K)
        stats = {
            key: performance_stats(
                run, series[(key[0], 1.0, key[2])], entropy
            )
            for key, run in series.items()
        }
        rows = pd.DataFrame(
            [
                {
                    'window_start': key[0][0],
                    'window_end': key[0][1],
                    'p': key[1],
                    'f': key[2],
                    'final_wealth': stats[key].final_wealth,
                    'rel_log_return': stats[key].rel_log_return,
                    'max_drawdown': stats[key].max_drawdown,
                    'sharpe': stats[key].sharpe,
                    'total_costs': stats[key].total_costs,
                    'diversity_drawdown': stats[key].diversity_drawdown,
                }
                for key in keys
            ],
            columns=RESULT_COLUMNS,
        )
        self._logger.info('Finished %d backtests', len(keys))
        return GridResults(rows=rows, series=series, stats=stats)


def run_grid(
    panel: MarketPanel,
    p_list: list[float],
    f_list: list[int | None],
    windows: list[tuple[int, int]] | None = None,
    c: float = 0.0025,
    K: int = 500,  # noqa: N803
    threads: int = 1,
    **options: object,
) -> GridResults:
    """Run a backtest grid.

    Args:
        panel: the market panel.
        p_list: the diversity parameters.
        f_list: the frequencies, None for ∞.
        windows: the windows; calendar years when None.
        c: the cost rate.
        K: the support size.
        threads: the number of worker threads.
        **options: `initial_wealth` and `dividend_mode` for the runner.

    Returns:
        The GridResults.
    """
    runner = GridRunner(panel, K=K, cost_rate=c, threads=threads,
                        **options)  # type: ignore[arg-type]
    return runner.run(p_list, f_list, windows)


def frequency_spread(grid: GridResults) -> pd.DataFrame:
    """Compare equal-weight runs with the never-rebalanced equal weight.

    Args:
        grid: the grid results; needs p=0 and f=∞.

    Returns:
        A DataFrame with columns `window_start`, `window_end`, `f` and
        `spread` = log Z_{0,f}(end) - log Z_{0,∞}(end); empty when the grid
        has no p=0 or no f=∞ runs.
    """
    rows = []
    for (window, p, f), run in sorted(
        grid.series.items(), key=lambda i: (i[0][0], _f_order(i[0][2]))
    ):
        if p != 0.0 or not grid.has_run(window, 0.0, None):
            continue
        reference = grid.series[(window, 0.0, None)]
        rows.append({
            'window_start': window[0],
            'window_end': window[1],
            'f': frequency_label(f),
            'spread': run.log_growth - reference.log_growth,
        })
    return pd.DataFrame(
        rows, columns=['window_start', 'window_end', 'f', 'spread']
    )


def risk_lines(
    grid: GridResults, p_values: tuple[float, ...] = (0.0, 0.5, 1.0)
) -> dict[str, dict[str, dict[str, float]]]:
    """Fit lines through the risk statistics of the grid rows.

    For each p, the drawdown is regressed on the Sharpe ratio and on the
    diversity drawdown over the windows and frequencies of the grid.

    Args:
        grid: the grid results.
        p_values: the diversity parameters to fit.

    Returns:
        Per p (as text) and per relation, the `intercept`, `slope`,
        `r_squared` and `n` of the fit; relations with too few points are
        left out.
    """
    lines: dict[str, dict[str, dict[str, float]]] = {}
    for p in p_values:
        rows = grid.rows[np.isclose(grid.rows['p'], p)]
        fits: dict[str, dict[str, float]] = {}
        for name, column in (
            ('drawdown_vs_sharpe', 'sharpe'),
            ('drawdown_vs_diversity', 'diversity_drawdown'),
        ):
            data = rows[['max_drawdown', column]].dropna()
            x = data[column].to_numpy(dtype=float)
            if len(data) < 3 or np.ptp(x) == 0:
                continue
            fit = ols_fit(
                data['max_drawdown'].to_numpy(dtype=float),
                np.column_stack([np.ones(len(x)), x]),
                names=['intercept', column],
            )
            fits[name] = {
                'intercept': float(fit.coefficients[0]),
                'slope': float(fit.coefficients[1]),
                'r_squared': fit.r_squared,
                'n': fit.n,
            }
        if fits:
            lines[f'{p:g}'] = fits
    return lines
