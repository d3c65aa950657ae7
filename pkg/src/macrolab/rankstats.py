"""Module with the rank-indexed statistics.

Ranks are computed over the full universe of each day with the module-wide
tie rule (descending capitalization, ascending identifier) and are
1-based. All statistics work on log capitalizations.
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .exceptions import ComputationError, ParameterError
from .market_data import MarketPanel, ranked_columns

_logger = logging.getLogger(__name__)

MAX_CHANGE = 50
CHANGES = np.arange(-MAX_CHANGE, MAX_CHANGE + 1)
TRANSITION_HALF_WIDTH = 25
LAMBDA_HALF_WIDTH = 10


def smooth_over_rank(values: np.ndarray, half_width: int) -> np.ndarray:
    """Average each value with its neighbours over rank.

    The window is centered and clipped at the edges; NaN values are
    skipped.

    Args:
        values: one value per rank.
        half_width: the number of neighbours on each side.

    Returns:
        The smoothed values.
    """
    if half_width < 0:
        raise ParameterError('half_width must be ≥ 0')
    return (
        pd.Series(np.asarray(values, dtype=float))
        .rolling(2 * half_width + 1, center=True, min_periods=1)
        .mean()
        .to_numpy()
    )


def _rank_lookup(panel: MarketPanel, t: int) -> np.ndarray:
    """Map each panel column to its 1-based rank on day t (0 if absent)."""
    ranks = np.zeros(panel.n_stocks, dtype=int)
    columns = ranked_columns(panel, t)
    ranks[columns] = np.arange(1, len(columns) + 1)
    return ranks


@dataclass(frozen=True, eq=False)
class RankQvSeries:
    """Quadratic variation of the log capitalization by rank.

    Attributes:
        K: the largest rank.
        qv: array `(days, K)`; `qv[t, k - 1]` is QV_k(t).
    """

    K: int
    qv: np.ndarray

    def terminal(self) -> np.ndarray:
        """Return QV_k on the final day.

        Returns:
            One value per rank.
        """
        return self.qv[-1]

    def to_frame(self) -> pd.DataFrame:
        """Return the series in long format.

        Returns:
            A DataFrame with columns `t`, `k` and `QV`.
        """
        days, ranks = self.qv.shape
        return pd.DataFrame({
            't': np.repeat(np.arange(days), ranks),
            'k': np.tile(np.arange(1, ranks + 1), days),
            'QV': self.qv.ravel(),
        })


def rank_quadratic_variation(
    panel: MarketPanel,
    K: int,  # noqa: N803
) -> RankQvSeries:
    """Accumulate the squared daily log moves of the stock at each rank.

    When the stock at rank k on day t is absent on day t+1, or fewer than k
    stocks exist on day t, QV_k carries forward.

    Args:
        panel: the market panel.
        K: the largest rank.

    Raises:
        ParameterError: when K < 1.

    Returns:
        The RankQvSeries.
    """
    if K < 1:
        raise ParameterError('K must be ≥ 1')
    increments = np.zeros((panel.n_days, K))
    for t in range(panel.calendar.last):
        columns = ranked_columns(panel, t)[:K]
        moves = panel.log_caps[t + 1, columns] - panel.log_caps[t, columns]
        increments[t + 1, :len(columns)] = np.nan_to_num(moves**2, nan=0.0)
    return RankQvSeries(K=K, qv=np.cumsum(increments, axis=0))


@dataclass(frozen=True, eq=False)
class RankTransitionStats:
    """Frequencies of one-day rank changes.

    Attributes:
        K: the largest rank.
        counts: array `(K, 101)`; `counts[k - 1, c + 50]` counts the days on
            which the stock at rank k moved by c ranks (truncated to ±50,
            +50 for a delisting).
    """

    K: int
    counts: np.ndarray

    @property
    def observations(self) -> np.ndarray:
        """Return the number of observed days per rank."""
        return self.counts.sum(axis=1)

    def _share(self, mask: np.ndarray) -> np.ndarray:
        with np.errstate(invalid='ignore', divide='ignore'):
            return self.counts[:, mask].sum(axis=1) / self.observations

    @property
    def p_plus(self) -> np.ndarray:
        """Return the probability of moving down in the ranking."""
        return self._share(CHANGES > 0)

    @property
    def p_zero(self) -> np.ndarray:
        """Return the probability of keeping the rank."""
        return self._share(CHANGES == 0)

    @property
    def p_minus(self) -> np.ndarray:
        """Return the probability of moving up in the ranking."""
        return self._share(CHANGES < 0)

    @property
    def mean_change(self) -> np.ndarray:
        """Return the mean truncated rank change per rank."""
        with np.errstate(invalid='ignore', divide='ignore'):
            return self.counts @ CHANGES / self.observations

    def to_frame(
        self, half_width: int = TRANSITION_HALF_WIDTH
    ) -> pd.DataFrame:
        """Return the per-rank statistics with their smoothed variants.

        Args:
            half_width: the smoothing half-width over rank.

        Returns:
            A DataFrame with columns `k`, `mean_change`, `p_plus`, `p_zero`,
            `p_minus` and the same four with a `_smoothed` suffix.
        """
        columns = {
            'mean_change': self.mean_change,
            'p_plus': self.p_plus,
            'p_zero': self.p_zero,
            'p_minus': self.p_minus,
        }
        frame = pd.DataFrame({'k': np.arange(1, self.K + 1), **columns})
        for name, values in columns.items():
            frame[f'{name}_smoothed'] = smooth_over_rank(values, half_width)
        return frame


def rank_transition_stats(
    panel: MarketPanel, K: int  # noqa: N803
) -> RankTransitionStats:
    """Count the one-day rank changes of the stock at each rank.

    Args:
        panel: the market panel.
        K: the largest rank.

    Raises:
        ParameterError: when K < 1.

    Returns:
        The RankTransitionStats.
    """
    if K < 1:
        raise ParameterError('K must be ≥ 1')
    counts = np.zeros((K, len(CHANGES)), dtype=int)
    if panel.calendar.last < 1:
        return RankTransitionStats(K=K, counts=counts)
    for t in range(panel.calendar.last):
        columns = ranked_columns(panel, t)[:K]
        next_ranks = _rank_lookup(panel, t + 1)
        ranks = np.arange(1, len(columns) + 1)
        later = next_ranks[columns]
        change = np.where(
            later > 0,
            np.clip(later - ranks, -MAX_CHANGE, MAX_CHANGE),
            MAX_CHANGE,
        )
        np.add.at(counts, (ranks - 1, change + MAX_CHANGE), 1)
    return RankTransitionStats(K=K, counts=counts)


def change_quantiles(
    stats: RankTransitionStats,
    probs: tuple[float, ...] = (0.05, 0.25, 0.5, 0.75, 0.95),
) -> pd.DataFrame:
    """Return quantiles of the truncated rank change per rank.

    The q-quantile is the smallest change whose cumulative frequency reaches
    q.

    Args:
        stats: the transition counts.
        probs: the probabilities, each in (0, 1].

    Raises:
        ParameterError: when a probability is outside (0, 1].

    Returns:
        A DataFrame with a column `k` and one column `q<prob>` per
        probability; ranks without observations get NaN.
    """
    if any(not 0 < q <= 1 for q in probs):
        raise ParameterError('quantile probabilities must be in (0, 1]')
    frame = pd.DataFrame({'k': np.arange(1, stats.K + 1)})
    totals = stats.observations
    cumulative = np.cumsum(stats.counts, axis=1)
    for q in probs:
        values = np.full(stats.K, np.nan)
        for row in np.flatnonzero(totals > 0):
            index = np.searchsorted(
                cumulative[row] / totals[row], q - 1e-12, side='left'
            )
            values[row] = CHANGES[index]
        frame[f'q{q:g}'] = values
    return frame


def switch_increments(y_now: np.ndarray, y_next: np.ndarray) -> np.ndarray:
    """Compute the rank-switching increments of a fixed set of stocks.

    With d_j the move of the stock at rank j on the first day and Y_(j) the
    j-th largest log capitalization,
    ΔY_(k) = d_k + (ΔΛ_k - ΔΛ_(k-1)) / 2, so
    ΔΛ_k = 2 Σ_{j≤k} (Y_(j)(next) - y_next of the stock at rank j now).

    Args:
        y_now: the log capitalizations on the first day, in identifier
            order (ties resolve to the first position).
        y_next: the log capitalizations of the same stocks on the next day.

    Returns:
        ΔΛ_1..ΔΛ_n; the last one is 0 up to rounding.
    """
    y_now = np.asarray(y_now, dtype=float)
    y_next = np.asarray(y_next, dtype=float)
    if y_now.shape != y_next.shape:
        raise ParameterError('y_now and y_next must have the same shape')
    order = np.argsort(-y_now, kind='stable')
    ranked_next = -np.sort(-y_next)
    return 2 * np.cumsum(ranked_next - y_next[order])


@dataclass(frozen=True, eq=False)
class RankSwitchIntensity:
    """Cumulative rank-switching intensity between neighbouring ranks.

    Attributes:
        K: the largest rank; Λ_k is reported for k < K.
        lam: array `(days, K - 1)`; `lam[t, k - 1]` is Λ_k(t).
        skipped: array `(K - 1,)` with the number of days on which rank k
            was affected by an entry, an exit or a short universe and got a
            zero increment.
    """

    K: int
    lam: np.ndarray
    skipped: np.ndarray

    def smoothed_terminal(
        self, half_width: int = LAMBDA_HALF_WIDTH
    ) -> np.ndarray:
        """Return Λ_k on the final day, smoothed over rank.

        Args:
            half_width: the smoothing half-width.

        Returns:
            One value per rank k < K.
        """
        return smooth_over_rank(self.lam[-1], half_width)

    def to_frame(self) -> pd.DataFrame:
        """Return the series in long format.

        Returns:
            A DataFrame with columns `t`, `k` and `Lambda`.
        """
        days, ranks = self.lam.shape
        return pd.DataFrame({
            't': np.repeat(np.arange(days), ranks),
            'k': np.tile(np.arange(1, ranks + 1), days),
            'Lambda': self.lam.ravel(),
        })


def _first_affected_rank(
    panel: MarketPanel, t: int, columns: np.ndarray, next_ranks: np.ndarray
) -> int:
    """Return the first rank whose increment on day t is not defined.

    Args:
        panel: the market panel.
        t: the ordinal of the first day.
        columns: the ranked columns of day t.
        next_ranks: the rank of every column on day t+1 (0 if absent).

    Returns:
        The 1-based rank from which the increments are zeroed.
    """
    size_next = int(np.count_nonzero(next_ranks))
    candidates = [len(columns) + 1, size_next + 1]
    exits = np.flatnonzero(next_ranks[columns] == 0)
    if len(exits):
        candidates.append(int(exits[0]) + 1)
    entrants = np.flatnonzero(panel.first_days == t + 1)
    if len(entrants):
        candidates.append(int(next_ranks[entrants].min()))
    return min(candidates)


def rank_switch_intensity(
    panel: MarketPanel, K: int  # noqa: N803
) -> RankSwitchIntensity:
    """Accumulate the rank-switching intensity Λ_k for k < K.

    On a day where a stock exits, a stock enters or the universe is short,
    the increments at and below the first affected rank are set to 0 and
    counted in `skipped`.

    Args:
        panel: the market panel.
        K: the largest rank.

    Raises:
        ParameterError: when K < 2 or K exceeds every day's universe.
        ComputationError: when an increment is below -1e-9.

    Returns:
        The RankSwitchIntensity.
    """
    if K < 2:
        raise ParameterError('K must be ≥ 2')
    if K > panel.presence.sum(axis=1).max():
        raise ParameterError(
            f'K = {K} exceeds the universe size on every day'
        )
    ranks = K - 1
    increments = np.zeros((panel.n_days, ranks))
    skipped = np.zeros(ranks, dtype=int)
    for t in range(panel.calendar.last):
        columns = ranked_columns(panel, t)
        next_ranks = _rank_lookup(panel, t + 1)
        cutoff = _first_affected_rank(panel, t, columns, next_ranks)
        valid = min(cutoff - 1, ranks)
        if valid < ranks:
            skipped[valid:] += 1
        if valid == 0:
            continue
        ranked_next = -np.sort(-panel.log_caps[t + 1][next_ranks > 0])
        y_next = panel.log_caps[t + 1, columns[:valid]]
        step = 2 * np.cumsum(ranked_next[:valid] - y_next)
        if step.min() < -1e-9:
            raise ComputationError(
                f'negative rank-switching increment {step.min()} on day {t}'
            )
        increments[t + 1, :valid] = np.maximum(step, 0.0)
    if skipped.any():
        _logger.info(
            'Zeroed rank-switching increments on up to %d days per rank',
            int(skipped.max()),
        )
    return RankSwitchIntensity(
        K=K, lam=np.cumsum(increments, axis=0), skipped=skipped
    )


def rank_trajectories(
    panel: MarketPanel,
    start: int = 0,
    start_ranks: tuple[int, ...] = (1, 10, 50, 100, 500),
    horizon: int | None = None,
) -> pd.DataFrame:
    """Follow the ranks of the stocks holding given ranks on a start day.

    Args:
        panel: the market panel.
        start: the ordinal of the start day.
        start_ranks: the 1-based ranks to follow; ranks beyond the universe
            are ignored.
        horizon: the number of days to follow (default: to the end).

    Returns:
        A DataFrame with columns `start_rank`, `stock`, `t`, `rank` and
        `exited`; `rank` is NaN once the stock has exited.
    """
    panel.calendar.check(start)
    end = panel.calendar.last if horizon is None else min(
        start + horizon, panel.calendar.last
    )
    columns = ranked_columns(panel, start)
    followed = [(k, int(columns[k - 1])) for k in start_ranks
                if 1 <= k <= len(columns)]
    rows = []
    for t in range(start, end + 1):
        ranks = _rank_lookup(panel, t)
        for k, column in followed:
            rank = ranks[column]
            rows.append({
                'start_rank': k,
                'stock': panel.ids[column],
                't': t,
                'rank': float(rank) if rank else np.nan,
                'exited': bool(rank == 0),
            })
    return pd.DataFrame(
        rows, columns=['start_rank', 'stock', 't', 'rank', 'exited']
    )
