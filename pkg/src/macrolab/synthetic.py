"""Module to simulate markets from the generalized Atlas model.

Under the generalized Atlas model the log capitalization of a stock has a
drift and a volatility that depend only on its current rank. This module
discretizes the model with Euler-Maruyama, with the rank coefficients frozen
at the start of each step, and returns the path as a `MarketPanel` over a
business-day calendar. The universe is fixed: there are no entries or exits.

Random numbers come from numpy's `PCG64` bit generator, seeded with the
64-bit `seed` of the parameters; normals are drawn with
`Generator.standard_normal` (ziggurat method), in one `(horizon, n)` block in
C order.
"""

import logging

import numpy as np
import pandas as pd
from macrolab_model import AtlasParams, StabilityReport
from pydantic import ValidationError

from .exceptions import ParameterError
from .market_data import MarketPanel, TradingCalendar

_logger = logging.getLogger(__name__)

DEFAULTS_LABEL = (
    'macrolab default linear profile (not calibrated to market data)'
)


def stability_report(gamma: list[float] | np.ndarray) -> StabilityReport:
    """Check the stability condition of a rank-based drift profile.

    The system is stable when, for every m < n, the m top ranks together
    have less drift than their share of the average drift; that is, the
    partial sums of (average drift - rank drift) are strictly positive.

    Args:
        gamma: the drifts per rank, rank 1 first.

    Returns:
        The StabilityReport.
    """
    drifts = np.asarray(gamma, dtype=float)
    partial_sums = np.cumsum(drifts.mean() - drifts)
    return StabilityReport(
        partial_sums=partial_sums.tolist(),
        stable=bool(np.all(partial_sums[:-1] > 0)),
    )


def default_atlas_params(
    n: int, seed: int = 0, horizon: int = 2520
) -> tuple[AtlasParams, StabilityReport]:
    """Return the default linear-profile parameters.

    The drift goes linearly from -0.08 at rank 1 to +0.08 at rank n, the
    volatility from 0.15 to 0.40. The initial log capitalizations are spread
    evenly over [log 1e8, log 1e11], the first stock being the largest.

    Args:
        n: the number of stocks.
        seed: the seed of the random generator.
        horizon: the number of daily steps (dt = 1/252).

    Raises:
        ParameterError: when n < 2 or the other values are invalid.

    Returns:
        The parameters and their StabilityReport.
    """
    if n < 2:
        raise ParameterError('n must be ≥ 2')
    fraction = np.arange(n) / (n - 1)
    gamma = -0.08 * (1 - 2 * fraction)
    sigma = 0.15 + 0.25 * fraction
    init_log_caps = np.linspace(np.log(1e11), np.log(1e8), n)
    try:
        params = AtlasParams(
            n=n,
            gamma=gamma.tolist(),
            sigma=sigma.tolist(),
            dt=1 / 252,
            horizon=horizon,
            init_log_caps=init_log_caps.tolist(),
            seed=seed,
            label=DEFAULTS_LABEL,
        )
    except ValidationError as error:
        raise ParameterError(str(error)) from error
    return params, stability_report(params.gamma)


def stock_ids(n: int) -> list[str]:
    """Return the identifiers of simulated stocks.

    The numbers are zero padded so that the identifier order is the
    numeric order.

    Args:
        n: the number of stocks.

    Returns:
        Identifiers `S0001`, `S0002`, ...
    """
    width = max(4, len(str(n)))
    return [f'S{k:0{width}d}' for k in range(1, n + 1)]


def simulate_atlas(
    params: AtlasParams, shocks: np.ndarray | None = None
) -> MarketPanel:
    """Simulate a panel from the generalized Atlas model.

    Args:
        params: the validated parameters.
        shocks: optional standard normal shocks of shape `(horizon, n)`;
            when None they are drawn from the seeded generator.

    Raises:
        ParameterError: when the shocks have the wrong shape or are not
            finite.

    Returns:
        A MarketPanel with `horizon + 1` days and no entries or exits. The
        total return of day t is cap(t) / cap(t-1) - 1 (0 on day 0).
    """
    n, horizon = params.n, params.horizon
    if shocks is None:
        generator = np.random.Generator(np.random.PCG64(params.seed))
        shocks = generator.standard_normal((horizon, n))
    else:
        shocks = np.asarray(shocks, dtype=float)
        if shocks.shape != (horizon, n):
            raise ParameterError(
                f'shocks must have shape {(horizon, n)}, got {shocks.shape}'
            )
        if not np.all(np.isfinite(shocks)):
            raise ParameterError('shocks must be finite')

    gamma = np.asarray(params.gamma) * params.dt
    sigma = np.asarray(params.sigma) * np.sqrt(params.dt)
    log_caps = np.empty((horizon + 1, n))
    log_caps[0] = params.init_log_caps
    drift = np.empty(n)
    volatility = np.empty(n)
    for step in range(horizon):
        order = np.argsort(-log_caps[step], kind='stable')
        drift[order] = gamma
        volatility[order] = sigma
        log_caps[step + 1] = (
            log_caps[step] + drift + volatility * shocks[step]
        )

    caps = np.exp(log_caps)
    total_returns = np.zeros_like(caps)
    total_returns[1:] = caps[1:] / caps[:-1] - 1
    days = pd.bdate_range(params.start_date, periods=horizon + 1)
    _logger.debug('Simulated %d stocks over %d days', n, horizon + 1)
    return MarketPanel(
        calendar=TradingCalendar(tuple(d.date() for d in days)),
        ids=stock_ids(n),
        caps=caps,
        total_returns=total_returns,
    )
