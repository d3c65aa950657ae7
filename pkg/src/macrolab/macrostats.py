"""Module with the macroscopic market statistics.

This module computes capital distribution curves, diversity (Shannon entropy
and the D_p measure), excess growth rates and their summary statistics.
Natural logarithms are used everywhere; base 10 is only used for the points
of capital distribution curves, which are meant for plotting.

Stocks that are absent at the end of an excess growth rate period are left
out and the weights of the remaining stocks are renormalized at the start of
the period.
"""

import logging
from dataclasses import dataclass
from datetime import date
from typing import Literal

import numpy as np
import pandas as pd
from scipy import stats

from .exceptions import (
    ParameterError,
    TotalLossError,
    UndefinedStatisticError,
)
from .market_data import (
    MarketPanel,
    Universe,
    WeightVector,
    capitalization_weights,
    ranked_columns,
    top_k_universe,
)

_logger = logging.getLogger(__name__)

Weighting = Literal['cap', 'equal', 'diversity']


@dataclass(frozen=True, eq=False)
class CapitalDistribution:
    """Ranked weights of a universe.

    Attributes:
        weights: the weights, nonincreasing.
    """

    weights: np.ndarray

    def __len__(self) -> int:
        """Return the number of ranks.

        Returns:
            The number of ranks.
        """
        return len(self.weights)

    def log_gaps(self) -> np.ndarray:
        """Return the shape of the curve as gaps between neighbouring ranks.

        Returns:
            log μ_(k) - log μ_(k+1) for k = 1..len - 1, all ≥ 0.
        """
        return -np.diff(np.log(self.weights))


@dataclass(frozen=True, eq=False)
class EgrSeries:
    """Excess growth rates on a time grid.

    Attributes:
        grid: the ordinals t_0 < t_1 < ...
        per_period: the excess growth rate of the period ending at each grid
            point; 0 at t_0.
        cumulative: the prefix sums of `per_period`.
        weighting: how the weights were formed.
        K: the universe size.
        dt: the grid spacing in trading days.
        dropped: the number of (stock, period) pairs left out because the
            stock was absent at the end of the period.
    """

    grid: np.ndarray
    per_period: np.ndarray
    cumulative: np.ndarray
    weighting: str
    K: int
    dt: int
    dropped: int = 0


@dataclass(frozen=True)
class JointTable:
    """Joint behaviour of the excess growth rate and the entropy.

    Attributes:
        rows: one row per window (or day).
        binned: equal-count binned means of the rows.
    """

    rows: pd.DataFrame
    binned: pd.DataFrame


@dataclass(frozen=True, eq=False)
class StatsReport:
    """Summary statistics of a time series.

    Attributes:
        n: the number of observations.
        mean: the sample mean.
        sd: the sample standard deviation.
        skewness: the sample skewness, None for a constant series.
        excess_kurtosis: the sample excess kurtosis, None for a constant
            series.
        acf: the autocorrelations at lags 1..max_lag.
        pearson: correlation with the paired series, None if undefined.
        winsorized_pearson: correlation after clipping both series at their
            [q, 1-q] quantiles, None if undefined.
        correlation_defined: False when a correlation was requested but one
            of the series is constant.
    """

    n: int
    mean: float
    sd: float
    skewness: float | None
    excess_kurtosis: float | None
    acf: np.ndarray
    pearson: float | None = None
    winsorized_pearson: float | None = None
    correlation_defined: bool = True

    def as_dict(self) -> dict[str, object]:
        """Return the report as JSON-friendly values.

        Returns:
            A dict with the statistics.
        """
        return {
            'n': self.n,
            'mean': self.mean,
            'sd': self.sd,
            'skewness': self.skewness,
            'excess_kurtosis': self.excess_kurtosis,
            'acf': [float(a) for a in self.acf],
            'pearson': self.pearson,
            'winsorized_pearson': self.winsorized_pearson,
            'correlation_defined': self.correlation_defined,
        }


def _as_array(
    w: WeightVector | CapitalDistribution | np.ndarray,
) -> np.ndarray:
    """Return the plain weights of any weight container.

    Args:
        w: the weights.

    Returns:
        The weights as a float array.
    """
    if isinstance(w, (WeightVector, CapitalDistribution)):
        return np.asarray(w.weights, dtype=float)
    return np.asarray(w, dtype=float)


def power_weights(weights: np.ndarray, p: float) -> np.ndarray:
    """Raise weights to the power p and renormalize.

    Args:
        weights: nonnegative weights.
        p: the power, in [0, 1].

    Raises:
        ParameterError: when p is outside [0, 1].

    Returns:
        The weights proportional to weights**p; p = 0 gives equal weights
        over the positive weights.
    """
    if not 0 <= p <= 1:
        raise ParameterError('p must be in [0, 1]')
    weights = np.asarray(weights, dtype=float)
    if p == 1:
        return weights / weights.sum()
    powered = np.where(weights > 0, np.power(weights, p), 0.0)
    return powered / powered.sum()


def capital_distribution(
    w: WeightVector | np.ndarray,
) -> CapitalDistribution:
    """Rank a weight vector.

    Args:
        w: the weights, in any order.

    Returns:
        The weights sorted nonincreasing.
    """
    return CapitalDistribution(weights=-np.sort(-_as_array(w)))


def curve_points(cd: CapitalDistribution, day: date | str) -> pd.DataFrame:
    """Return the points of a capital distribution curve.

    Args:
        cd: the capital distribution.
        day: the date the curve belongs to.

    Returns:
        A DataFrame with columns `log10_rank`, `log10_weight` and `date`.
    """
    ranks = np.arange(1, len(cd) + 1)
    return pd.DataFrame({
        'log10_rank': np.log10(ranks),
        'log10_weight': np.log10(cd.weights),
        'date': day.isoformat() if isinstance(day, date) else day,
    })


def pareto_weights(K: int, alpha: float) -> CapitalDistribution:  # noqa: N803
    """Return a power-law capital distribution.

    Args:
        K: the number of ranks.
        alpha: the exponent; weight of rank k is proportional to k**-alpha.

    Raises:
        ParameterError: when K < 1 or alpha < 0.

    Returns:
        The CapitalDistribution.
    """
    if K < 1 or alpha < 0:
        raise ParameterError('K must be ≥ 1 and alpha ≥ 0')
    raw = np.arange(1, K + 1, dtype=float) ** -alpha
    return CapitalDistribution(weights=raw / raw.sum())


def shannon_entropy(
    w: WeightVector | CapitalDistribution | np.ndarray,
) -> float:
    """Compute the Shannon entropy of a weight vector in nats.

    Zero weights contribute 0 (the limit of -x log x).

    Args:
        w: the weights (by name or by rank, the result is the same).

    Returns:
        -sum w log w.
    """
    weights = _as_array(w)
    positive = weights[weights > 0]
    return float(-np.sum(positive * np.log(positive)))


def diversity_p(w: WeightVector | CapitalDistribution | np.ndarray,
                p: float) -> float:
    """Compute the D_p diversity measure.

    Args:
        w: the weights.
        p: the parameter, in (0, 1].

    Raises:
        ParameterError: when p is not in (0, 1].

    Returns:
        (sum w**p)**(1/p); 1 when p = 1.
    """
    if not 0 < p <= 1:
        raise ParameterError('p must be in (0, 1]')
    weights = _as_array(w)
    return float(np.sum(np.power(weights[weights > 0], p)) ** (1 / p))


def _supported(
    w: WeightVector | np.ndarray, r: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Drop absent stocks and zero weights; renormalize.

    Args:
        w: the weights.
        r: the log-returns, NaN for absent stocks.

    Raises:
        ParameterError: when the shapes differ or r has +inf.
        TotalLossError: when a weighted constituent has r = -inf.

    Returns:
        The renormalized weights and the matching returns.
    """
    weights = _as_array(w)
    returns = np.asarray(r, dtype=float)
    if weights.shape != returns.shape:
        raise ParameterError('weights and returns must have the same shape')
    if np.any(np.isneginf(returns) & (weights > 0)):
        raise TotalLossError('total loss in weighted constituent')
    if np.any(np.isposinf(returns) & (weights > 0)):
        raise ParameterError('returns must be finite')
    keep = ~np.isnan(returns) & (weights > 0)
    weights, returns = weights[keep], returns[keep]
    if weights.size:
        weights = weights / weights.sum()
    return weights, returns


def excess_growth_rate(w: WeightVector | np.ndarray, r: np.ndarray) -> float:
    """Compute the excess growth rate of a weight vector over one period.

    Args:
        w: the weights at the start of the period.
        r: the log-returns over the period; NaN marks a stock that is absent
            at the end of the period, which is left out.

    Returns:
        log(sum w e^r) - sum w r, which is ≥ 0; 0 when nothing is left.
    """
    weights, returns = _supported(w, r)
    if weights.size == 0:
        return 0.0
    shift = returns.max()
    log_mean = shift + np.log(np.sum(weights * np.exp(returns - shift)))
    return max(float(log_mean - np.dot(weights, returns)), 0.0)


def egr_quadratic_approx(w: WeightVector | np.ndarray, r: np.ndarray) -> float:
    """Compute the quadratic approximation of the excess growth rate.

    Args:
        w: the weights at the start of the period.
        r: the log-returns over the period (NaN for absent stocks).

    Returns:
        (sum w r² - (sum w r)²) / 2.
    """
    weights, returns = _supported(w, r)
    if weights.size == 0:
        return 0.0
    mean = np.dot(weights, returns)
    return float(0.5 * np.dot(weights, (returns - mean) ** 2))


def universe_weights(
    panel: MarketPanel,
    universe: Universe,
    weighting: Weighting = 'cap',
    p: float | None = None,
) -> np.ndarray:
    """Return the weights of a universe for a weighting scheme.

    Args:
        panel: the market panel.
        universe: the universe.
        weighting: `cap`, `equal` or `diversity`.
        p: the diversity parameter (only for `diversity`).

    Raises:
        ParameterError: for an unknown weighting or a missing p.

    Returns:
        The weights in the order of `universe.members`.
    """
    if weighting == 'equal':
        return np.full(len(universe), 1 / len(universe))
    cap_weights = capitalization_weights(panel, universe).weights
    if weighting == 'cap':
        return cap_weights
    if weighting == 'diversity':
        if p is None:
            raise ParameterError('diversity weighting needs p')
        return power_weights(cap_weights, p)
    raise ParameterError(f'unknown weighting "{weighting}"')


def cumulative_egr(
    panel: MarketPanel,
    K: int,  # noqa: N803
    dt: int,
    weighting: Weighting = 'cap',
    p: float | None = None,
    start: int = 0,
    end: int | None = None,
) -> EgrSeries:
    """Accumulate excess growth rates on a grid of spacing dt.

    At every grid point the universe is formed again as the top K stocks,
    weighted by `weighting`; the period uses log-cap returns up to the next
    grid point.

    Args:
        panel: the market panel.
        K: the universe size.
        dt: the grid spacing in trading days.
        weighting: `cap`, `equal` or `diversity`.
        p: the diversity parameter (only for `diversity`).
        start: the first grid point.
        end: the last allowed ordinal (default: the final ordinal).

    Raises:
        ParameterError: when K < 1, dt < 1 or the range is shorter than dt.

    Returns:
        The EgrSeries.
    """
    if K < 1:
        raise ParameterError('K must be ≥ 1')
    if dt < 1:
        raise ParameterError('dt must be ≥ 1')
    end = panel.calendar.last if end is None else end
    grid = np.arange(start, end + 1, dt)
    if len(grid) < 2:
        raise ParameterError(
            f'range [{start}, {end}] must span at least dt + 1 = {dt + 1} '
            + 'days'
        )
    per_period = np.zeros(len(grid))
    dropped = 0
    for index in range(1, len(grid)):
        t0, t1 = int(grid[index - 1]), int(grid[index])
        universe = top_k_universe(panel, t0, K)
        weights = universe_weights(panel, universe, weighting, p)
        returns = (
            panel.log_caps[t1, universe.columns]
            - panel.log_caps[t0, universe.columns]
        )
        dropped += int(np.isnan(returns).sum())
        per_period[index] = excess_growth_rate(weights, returns)
    if dropped:
        _logger.info(
            'Left out %d absent stocks from excess growth periods', dropped
        )
    return EgrSeries(
        grid=grid,
        per_period=per_period,
        cumulative=np.cumsum(per_period),
        weighting=weighting,
        K=K,
        dt=dt,
        dropped=dropped,
    )


def entropy_path(
    panel: MarketPanel,
    K: int | None = None,  # noqa: N803
    measure: Literal['entropy', 'diversity'] = 'entropy',
    p: float = 0.5,
) -> np.ndarray:
    """Compute the daily diversity of the top-K (or full) universe.

    Args:
        panel: the market panel.
        K: the universe size; None for the full universe.
        measure: `entropy` (Shannon, nats) or `diversity` (D_p).
        p: the parameter of D_p.

    Returns:
        One value per trading day.
    """
    values = np.empty(panel.n_days)
    for t in range(panel.n_days):
        columns = ranked_columns(panel, t)
        if K is not None:
            columns = columns[:K]
        caps = panel.caps[t, columns]
        weights = caps / caps.sum()
        values[t] = (
            shannon_entropy(weights) if measure == 'entropy'
            else diversity_p(weights, p)
        )
    return values


def _subinterval_starts(
    panel: MarketPanel, subintervals: int
) -> list[np.ndarray]:
    """Split the calendar into equal-length subintervals.

    Args:
        panel: the market panel.
        subintervals: the number of subintervals.

    Raises:
        ParameterError: when subintervals < 1.

    Returns:
        The ordinals of each nonempty subinterval.
    """
    if subintervals < 1:
        raise ParameterError('subintervals must be ≥ 1')
    return [
        chunk for chunk in np.array_split(np.arange(panel.n_days),
                                          subintervals)
        if len(chunk)
    ]


def _cohort_path(
    panel: MarketPanel, columns: np.ndarray, days: np.ndarray
) -> np.ndarray:
    """Entropy of a fixed set of stocks over days (absent members dropped).

    Args:
        panel: the market panel.
        columns: the panel columns of the cohort.
        days: the ordinals.

    Returns:
        The entropy per day.
    """
    caps = panel.caps[np.ix_(days, columns)]
    caps = np.nan_to_num(caps, nan=0.0)
    weights = caps / caps.sum(axis=1, keepdims=True)
    with np.errstate(divide='ignore', invalid='ignore'):
        terms = np.where(weights > 0, weights * np.log(weights), 0.0)
    return -terms.sum(axis=1)


def frozen_cohort_entropy(
    panel: MarketPanel,
    K: int,  # noqa: N803
    subintervals: int = 4,
) -> pd.DataFrame:
    """Compute the entropy of top-K cohorts frozen per subinterval.

    The calendar is split into equal subintervals. At the start of each, the
    top K stocks form a cohort; its entropy is followed through the
    subinterval, dropping members that exit.

    Args:
        panel: the market panel.
        K: the cohort size.
        subintervals: the number of subintervals.

    Returns:
        A DataFrame with columns `t`, `cohort` and `entropy`.
    """
    parts = []
    for cohort, days in enumerate(_subinterval_starts(panel, subintervals)):
        columns = top_k_universe(panel, int(days[0]), K).columns
        parts.append(pd.DataFrame({
            't': days,
            'cohort': cohort,
            'entropy': _cohort_path(panel, columns, days),
        }))
    return pd.concat(parts, ignore_index=True)


def cohort_slopes(paths: pd.DataFrame) -> pd.DataFrame:
    """Fit a least-squares line through each cohort's entropy path.

    Args:
        paths: the output of `frozen_cohort_entropy` (or of
            `random_batch_entropy`, grouped by cohort and batch).

    Returns:
        A DataFrame with one row per group and the columns of the grouping
        plus `start`, `end` and `slope` (entropy per trading day).
    """
    keys = [c for c in ('cohort', 'batch') if c in paths.columns]
    rows = []
    for group, frame in paths.groupby(keys, sort=True):
        group = group if isinstance(group, tuple) else (group,)
        slope = (
            float(np.polyfit(frame['t'], frame['entropy'], 1)[0])
            if len(frame) > 1 else 0.0
        )
        rows.append({
            **dict(zip(keys, group)),
            'start': int(frame['t'].min()),
            'end': int(frame['t'].max()),
            'slope': slope,
        })
    return pd.DataFrame(rows)


def random_batch_entropy(
    panel: MarketPanel,
    K: int,  # noqa: N803
    subintervals: int = 4,
    batches: int = 25,
    seed: int = 0,
) -> pd.DataFrame:
    """Compute the entropy of random K-stock batches per subinterval.

    Args:
        panel: the market panel.
        K: the batch size.
        subintervals: the number of subintervals.
        batches: the number of batches per subinterval.
        seed: the seed of the random generator.

    Returns:
        A DataFrame with columns `t`, `cohort`, `batch` and `entropy`.
    """
    generator = np.random.Generator(np.random.PCG64(seed))
    parts = []
    for cohort, days in enumerate(_subinterval_starts(panel, subintervals)):
        present = np.flatnonzero(panel.presence[days[0]])
        for batch in range(batches):
            columns = np.sort(generator.choice(
                present, size=min(K, len(present)), replace=False
            ))
            parts.append(pd.DataFrame({
                't': days,
                'cohort': cohort,
                'batch': batch,
                'entropy': _cohort_path(panel, columns, days),
            }))
    return pd.concat(parts, ignore_index=True)


def series_stats(
    x: np.ndarray,
    max_lag: int = 20,
    winsor_q: float = 0.01,
    y: np.ndarray | None = None,
) -> StatsReport:
    """Compute summary statistics of a time series.

    Args:
        x: the series.
        max_lag: the largest autocorrelation lag.
        winsor_q: the clipping quantile for the winsorized correlation.
        y: an optional paired series for the correlations.

    Raises:
        ParameterError: when the series is not longer than max_lag, the
            quantile is not in [0, 0.5) or y has another length.

    Returns:
        The StatsReport.
    """
    values = np.asarray(x, dtype=float)
    if len(values) <= max_lag:
        raise ParameterError('series must be longer than max_lag')
    if not 0 <= winsor_q < 0.5:
        raise ParameterError('winsor_q must be in [0, 0.5)')
    centered = values - values.mean()
    denominator = np.dot(centered, centered)
    constant = bool(denominator == 0)
    if constant:
        acf = np.full(max_lag, np.nan)
    else:
        acf = np.array([
            np.dot(centered[:-lag], centered[lag:]) / denominator
            for lag in range(1, max_lag + 1)
        ])

    pearson = winsorized = None
    defined = True
    if y is not None:
        paired = np.asarray(y, dtype=float)
        if paired.shape != values.shape:
            raise ParameterError('x and y must have the same length')
        pearson = _correlation(values, paired)
        winsorized = _correlation(
            _winsorize(values, winsor_q), _winsorize(paired, winsor_q)
        )
        defined = pearson is not None

    return StatsReport(
        n=len(values),
        mean=float(values.mean()),
        sd=float(values.std(ddof=1)),
        skewness=None if constant else float(stats.skew(values)),
        excess_kurtosis=(
            None if constant else float(stats.kurtosis(values, fisher=True))
        ),
        acf=acf,
        pearson=pearson,
        winsorized_pearson=winsorized,
        correlation_defined=defined,
    )


def _winsorize(values: np.ndarray, q: float) -> np.ndarray:
    """Clip values at their q and 1 - q quantiles.

    Args:
        values: the values.
        q: the tail share.

    Returns:
        The clipped values.
    """
    low, high = np.quantile(values, [q, 1 - q])
    return np.clip(values, low, high)


def _correlation(x: np.ndarray, y: np.ndarray) -> float | None:
    """Compute the Pearson correlation, None when a series is constant.

    Args:
        x: the first series.
        y: the second series.

    Returns:
        The correlation or None.
    """
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    return float(np.corrcoef(x, y)[0, 1])


def binned_means(
    x: np.ndarray, y: np.ndarray, bins: int = 20
) -> pd.DataFrame:
    """Average y in equal-count bins of x.

    Args:
        x: the binning variable.
        y: the averaged variable.
        bins: the number of bins (fewer when there are fewer points).

    Returns:
        A DataFrame with columns `bin`, `x_mean`, `y_mean` and `count`.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(x, kind='stable')
    chunks = [
        c for c in np.array_split(order, max(min(bins, len(order)), 1))
        if len(c)
    ]
    return pd.DataFrame({
        'bin': np.arange(len(chunks)),
        'x_mean': [float(x[c].mean()) for c in chunks],
        'y_mean': [float(y[c].mean()) for c in chunks],
        'count': [len(c) for c in chunks],
    })


def diversity_egr_joint(
    panel: MarketPanel,
    K: int,  # noqa: N803
    window: int,
    bins: int = 20,
) -> JointTable:
    """Relate the excess growth rate to the movement of the entropy.

    For each disjoint window the daily excess growth rates of the top-K cap
    weights are summed, and the range and net change of the top-K entropy
    over the window are recorded.

    Args:
        panel: the market panel.
        K: the universe size.
        window: the window length in trading days.
        bins: the number of bins for the binned means.

    Raises:
        ParameterError: when window < 2.

    Returns:
        The JointTable; `binned` bins `delta_gamma` by `entropy_range`.
    """
    if window < 2:
        raise ParameterError('window must be ≥ 2')
    gamma = cumulative_egr(panel, K, 1, 'cap').cumulative
    entropy = entropy_path(panel, K)
    starts = np.arange(0, panel.calendar.last - window + 1, window)
    rows = pd.DataFrame({
        'window_start': starts,
        'delta_gamma': [gamma[s + window] - gamma[s] for s in starts],
        'entropy_range': [np.ptp(entropy[s:s + window + 1]) for s in starts],
        'entropy_change': [entropy[s + window] - entropy[s] for s in starts],
    })
    return JointTable(
        rows=rows,
        binned=binned_means(
            rows['entropy_range'].to_numpy(),
            rows['delta_gamma'].to_numpy(),
            bins,
        ),
    )


def daily_joint(
    panel: MarketPanel,
    K: int,  # noqa: N803
    bins: int = 20,
) -> JointTable:
    """Relate the daily excess growth rate to the daily change of log entropy.

    Days on which the top-K universe holds a single stock have zero entropy;
    the changes into and out of them are left out.

    Args:
        panel: the market panel.
        K: the universe size.
        bins: the number of bins for the binned means.

    Raises:
        UndefinedStatisticError: when K < 2, the entropy is then always 0.

    Returns:
        The JointTable; `binned` bins `egr` by `dlog_entropy`.
    """
    if K < 2:
        raise UndefinedStatisticError(
            'the log entropy of a single stock is undefined (K must be ≥ 2)'
        )
    series = cumulative_egr(panel, K, 1, 'cap')
    with np.errstate(divide='ignore', invalid='ignore'):
        dlog_entropy = np.diff(np.log(entropy_path(panel, K)))
    rows = pd.DataFrame({
        't': series.grid[1:],
        'egr': series.per_period[1:],
        'dlog_entropy': dlog_entropy,
    })
    rows = rows[np.isfinite(dlog_entropy)].reset_index(drop=True)
    return JointTable(
        rows=rows,
        binned=binned_means(
            rows['dlog_entropy'].to_numpy(), rows['egr'].to_numpy(), bins
        ),
    )


def egr_frequency_spread(
    panel: MarketPanel,
    K: int,  # noqa: N803
    windows: list[tuple[int, int]],
) -> pd.DataFrame:
    """Compare daily accumulation with one-period excess growth per window.

    Args:
        panel: the market panel.
        K: the universe size.
        windows: the `(start, end)` windows.

    Returns:
        A DataFrame with columns `window_start`, `window_end`,
        `delta_gamma` (daily accumulation of the top-K cap-weighted excess
        growth rate), `gamma_window` (the excess growth rate of the whole
        window as one period) and `spread` (their difference).
    """
    daily = cumulative_egr(panel, K, 1, 'cap').cumulative
    rows = []
    for start, end in windows:
        universe = top_k_universe(panel, start, K)
        returns = (
            panel.log_caps[end, universe.columns]
            - panel.log_caps[start, universe.columns]
        )
        gamma_window = excess_growth_rate(
            capitalization_weights(panel, universe), returns
        )
        delta = float(daily[end] - daily[start])
        rows.append({
            'window_start': start,
            'window_end': end,
            'delta_gamma': delta,
            'gamma_window': gamma_window,
            'spread': delta - gamma_window,
        })
    return pd.DataFrame(rows)
