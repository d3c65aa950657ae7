"""Module with the ordinary least squares fit and the attribution model.

The attribution model regresses the yearly log return of a diversity-weighted
portfolio relative to its capitalization-weighted benchmark on the change of
the top-K entropy and the daily accumulated market excess growth rate over
the same window.
"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from scipy.linalg import solve_triangular

from macrolab_model import OlsReport, parse_frequency

from .exceptions import (
    MissingBenchmarkError,
    MissingWindowError,
    ParameterError,
    RankDeficiencyError,
)
from .macrostats import egr_frequency_spread, entropy_path
from .market_data import MarketPanel

if TYPE_CHECKING:
    from .backtest import GridResults

ATTRIBUTION_REGRESSORS = ['intercept', 'dlog_entropy', 'delta_gamma']

_logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class OlsResult:
    """Result of an ordinary least squares fit.

    Attributes:
        names: the regressor names.
        coefficients: the estimated coefficients.
        standard_errors: homoskedastic standard errors.
        r_squared: the coefficient of determination; 0 when y is constant.
        adj_r_squared: the adjusted coefficient of determination.
        n: the number of observations.
        k: the number of regressors, intercept included.
        residuals: y minus the fitted values.
        zero_variance: True when y has zero variance.
    """

    names: list[str]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    r_squared: float
    adj_r_squared: float
    n: int
    k: int
    residuals: np.ndarray
    zero_variance: bool = False

    def to_report(self) -> OlsReport:
        """Return the fit in its JSON form.

        Returns:
            The OlsReport.
        """
        return OlsReport(
            names=self.names,
            coefficients=[float(b) for b in self.coefficients],
            standard_errors=[float(s) for s in self.standard_errors],
            r_squared=self.r_squared,
            adj_r_squared=self.adj_r_squared,
            n=self.n,
            k=self.k,
            zero_variance=self.zero_variance,
        )


def ols_fit(
    y: np.ndarray, X: np.ndarray, names: list[str] | None = None  # noqa: N803
) -> OlsResult:
    """Fit y ~ X by ordinary least squares through a QR decomposition.

    Args:
        y: the response, length n.
        X: the design matrix `(n, k)`, with an intercept column when
            wanted.
        names: the column names (default `x0`, `x1`, ...).

    Raises:
        ParameterError: when the shapes do not match or n ≤ k.
        RankDeficiencyError: when X does not have full column rank.

    Returns:
        The OlsResult.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)  # noqa: N806
    if X.ndim != 2 or y.ndim != 1 or len(y) != X.shape[0]:
        raise ParameterError('y must be a vector matching the rows of X')
    n, k = X.shape
    names = names or [f'x{j}' for j in range(k)]
    if len(names) != k:
        raise ParameterError('one name per column of X is needed')
    if n <= k:
        raise ParameterError(f'need more observations ({n}) than '
                             + f'regressors ({k})')

    q, r = np.linalg.qr(X)
    diagonal = np.abs(np.diag(r))
    scale = max(float(np.linalg.norm(X, axis=0).max()), 1e-300)
    dependent = [names[j] for j in np.flatnonzero(
        diagonal <= 1e-10 * scale
    )]
    if dependent:
        raise RankDeficiencyError(
            'design matrix is rank deficient', dependent
        )

    coefficients = solve_triangular(r, q.T @ y)
    residuals = y - X @ coefficients
    rss = float(residuals @ residuals)
    r_inverse = solve_triangular(r, np.eye(k))
    sigma2 = rss / (n - k)
    standard_errors = np.sqrt(sigma2 * np.sum(r_inverse**2, axis=1))

    centered = y - y.mean()
    tss = float(centered @ centered)
    zero_variance = tss == 0
    r_squared = 0.0 if zero_variance else 1 - rss / tss
    adj_r_squared = 1 - (1 - r_squared) * (n - 1) / (n - k)
    _logger.debug('Fitted OLS with n=%d k=%d R²=%.6f', n, k, r_squared)
    return OlsResult(
        names=list(names),
        coefficients=coefficients,
        standard_errors=standard_errors,
        r_squared=r_squared,
        adj_r_squared=adj_r_squared,
        n=n,
        k=k,
        residuals=residuals,
        zero_variance=zero_variance,
    )


@dataclass(frozen=True)
class AttributionDataset:
    """The per-window data of the attribution model.

    Attributes:
        p: the diversity parameter of the portfolio.
        f: the rebalance frequency, None for ∞.
        K: the universe size.
        frame: one row per window with the columns `window_start`,
            `window_end`, `rel_log_return`, `dlog_entropy`, `delta_gamma`
            and `egr_spread`.
    """

    p: float
    f: int | None
    K: int
    frame: pd.DataFrame


def _normalized_rows(rows: pd.DataFrame) -> pd.DataFrame:
    """Return results rows with float p and f as int or None."""
    frame = rows.copy()
    frame['p'] = frame['p'].astype(float)
    frame['f'] = pd.Series(
        [
            None if (not isinstance(f, str) and pd.isna(f))
            else parse_frequency(f)
            for f in frame['f']
        ],
        index=frame.index,
        dtype=object,
    )
    return frame


def build_attribution_dataset(
    panel: MarketPanel,
    grid: 'GridResults | pd.DataFrame',
    p: float,
    f: int | None,
    K: int,  # noqa: N803
    windows: list[tuple[int, int]] | None = None,
) -> AttributionDataset:
    """Join the relative returns of a grid with the market statistics.

    Args:
        panel: the market panel the grid was run on.
        grid: the grid results or the results table (as read from CSV).
        p: the diversity parameter of the portfolio.
        f: the rebalance frequency, None for ∞.
        K: the universe size.
        windows: the windows to use; all windows of the grid when None.

    Raises:
        MissingBenchmarkError: when a window has no (1, f) run.
        MissingWindowError: when a window has no (p, f) run.

    Returns:
        The AttributionDataset.
    """
    rows = _normalized_rows(
        grid if isinstance(grid, pd.DataFrame) else grid.rows
    )
    if windows is None:
        windows = sorted({
            (int(s), int(e))
            for s, e in zip(rows['window_start'], rows['window_end'])
        })
    if not windows:
        raise MissingWindowError('the results have no windows')

    def lookup(window: tuple[int, int], p_value: float) -> pd.DataFrame:
        return rows[
            (rows['window_start'] == window[0])
            & (rows['window_end'] == window[1])
            & np.isclose(rows['p'], p_value)
            & rows['f'].map(lambda value: value == f)
        ]

    returns = []
    for window in windows:
        if lookup(window, 1.0).empty:
            raise MissingBenchmarkError(
                f'benchmark run required for p=1, f={f} in window {window}'
            )
        match = lookup(window, p)
        if match.empty:
            raise MissingWindowError(
                f'no run for p={p}, f={f} in window {window}'
            )
        returns.append(float(match['rel_log_return'].iloc[0]))

    log_entropy = np.log(entropy_path(panel, K))
    spread = egr_frequency_spread(panel, K, windows)
    frame = pd.DataFrame({
        'window_start': [s for s, _ in windows],
        'window_end': [e for _, e in windows],
        'rel_log_return': returns,
        'dlog_entropy': [log_entropy[e] - log_entropy[s] for s, e in windows],
        'delta_gamma': spread['delta_gamma'].to_numpy(),
        'egr_spread': spread['spread'].to_numpy(),
    })
    return AttributionDataset(p=float(p), f=f, K=K, frame=frame)


def fit_attribution(dataset: AttributionDataset) -> OlsResult:
    """Fit the attribution model.

    Args:
        dataset: the attribution data.

    Returns:
        The OLS fit of `rel_log_return` on an intercept, `dlog_entropy` and
        `delta_gamma`.
    """
    frame = dataset.frame
    design = np.column_stack([
        np.ones(len(frame)),
        frame['dlog_entropy'].to_numpy(dtype=float),
        frame['delta_gamma'].to_numpy(dtype=float),
    ])
    return ols_fit(
        frame['rel_log_return'].to_numpy(dtype=float),
        design,
        names=ATTRIBUTION_REGRESSORS,
    )
