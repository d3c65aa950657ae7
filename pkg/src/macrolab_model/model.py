"""Module that contains the parameter, configuration and record models.

This module contains the declarative data model for `macrolab`. Parameter
objects (for the synthetic market and for backtests) are pydantic models, so
they are validated when they are created and can be written to and read from
JSON without extra code. Records that are persisted in the result database
are `SQLmodel` table models; `SQLmodel` uses `Pydantic` for the validation
and `SQLalchemy` for the database schema, so one class serves both purposes.
"""

import math
from datetime import date, datetime, timezone
from enum import Enum
from typing import Any

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_validator,
    model_validator,
)
from sqlmodel import Field as SQLField
from sqlmodel import SQLModel


class AtlasParams(BaseModel):
    """Parameters for the generalized Atlas (rank-based diffusion) market.

    Attributes:
        n: the number of stocks.
        gamma: the drifts per rank, per unit of time (rank 1 first).
        sigma: the volatilities per rank, per square root of time.
        dt: the step size in years.
        horizon: the number of simulation steps.
        init_log_caps: the initial log capitalization of every stock.
        seed: the seed for the random generator.
        start_date: the first date of the business-day calendar.
        label: describes where the parameter values come from.
    """

    model_config = ConfigDict(frozen=True)

    n: int
    gamma: list[float]
    sigma: list[float]
    dt: float = 1 / 252
    horizon: int
    init_log_caps: list[float]
    seed: int = 0
    start_date: date = date(2000, 1, 3)
    label: str = 'custom'

    @field_validator('seed')
    @classmethod
    def _seed_fits_64_bits(cls, value: int) -> int:
        if not 0 <= value < 2**64:
            raise ValueError('seed must be a 64-bit unsigned integer')
        return value

    @model_validator(mode='after')
    def _check_dimensions(self) -> 'AtlasParams':
        """Check that the rank profiles match n and are usable.

        Raises:
            ValueError: for a profile that does not fit n or a bad value.

        Returns:
            The checked parameters.
        """
        if self.n < 2:
            raise ValueError('n must be ≥ 2')
        for name in ('gamma', 'sigma', 'init_log_caps'):
            if len(getattr(self, name)) != self.n:
                raise ValueError(f'{name} must have n={self.n} entries')
        if any(not s > 0 for s in self.sigma):
            raise ValueError('all sigma must be > 0')
        if not self.dt > 0:
            raise ValueError('dt must be > 0')
        if self.horizon < 1:
            raise ValueError('horizon must be ≥ 1')
        values = [*self.gamma, *self.sigma, *self.init_log_caps]
        if not all(math.isfinite(v) for v in values):
            raise ValueError('parameters must be finite')
        return self


class StabilityReport(BaseModel):
    """Stability check of a rank-based drift profile.

    Attributes:
        partial_sums: for m = 1..n, the sum over the m top ranks of the
            average drift minus the rank drift.
        stable: True if every partial sum with m < n is strictly positive.
    """

    model_config = ConfigDict(frozen=True)

    partial_sums: list[float]
    stable: bool


class DividendMode(Enum):
    """How the dividend part of the total return is handled.

    Attributes:
        CASH_BUCKET: holdings follow the price return; the rest of the total
            return is paid into cash and reinvested at the next rebalance.
        DAILY_REINVEST: holdings follow the full total return.
    """

    CASH_BUCKET = 'cash-bucket'
    DAILY_REINVEST = 'daily-reinvest'


class BacktestConfig(BaseModel):
    """Settings of one diversity-weighted portfolio run.

    Attributes:
        p: the diversity parameter; 0 is equal weight, 1 is cap weight.
        f: the rebalance frequency in trading days; None means never
            rebalance after initialization (f = ∞).
        K: the support size (largest K stocks).
        cost_rate: proportional transaction cost on purchases and sales.
        initial_wealth: the wealth at the start of each window.
        dividend_mode: how dividends are handled.
        windows: explicit windows as `(start, end)` ordinals; None means
            calendar years.
    """

    model_config = ConfigDict(frozen=True)

    p: float = Field(default=1.0, ge=0.0, le=1.0)
    f: int | None = 1
    K: int = Field(default=500, ge=1)
    cost_rate: float = Field(default=0.0025, ge=0.0, lt=1.0)
    initial_wealth: float = Field(default=1000.0, gt=0.0)
    dividend_mode: DividendMode = DividendMode.CASH_BUCKET
    windows: list[tuple[int, int]] | None = None

    @field_validator('f', mode='before')
    @classmethod
    def _parse_frequency(cls, value: Any) -> int | None:  # noqa: ANN401
        return parse_frequency(value)

    @property
    def f_label(self) -> str:
        """Return the frequency as text (`inf` for never).

        Returns:
            The frequency label.
        """
        return frequency_label(self.f)


def parse_frequency(value: Any) -> int | None:  # noqa: ANN401
    """Parse a rebalance frequency.

    Args:
        value: an integer ≥ 1, or one of `None`, `inf`, `∞`, `math.inf`.

    Raises:
        ValueError: when the value is not a valid frequency.

    Returns:
        The frequency in trading days, or None for f = ∞.
    """
    if value is None:
        return None
    if isinstance(value, str):
        if value.strip().lower() in ('inf', 'infinity', '∞'):
            return None
        value = int(value)
    if isinstance(value, float):
        if math.isinf(value):
            return None
        if not value.is_integer():
            raise ValueError('f must be an integer number of days')
        value = int(value)
    if value < 1:
        raise ValueError('f must be ≥ 1 or ∞')
    return int(value)


def frequency_label(f: int | None) -> str:
    """Return the text form of a rebalance frequency.

    Args:
        f: the frequency, None meaning ∞.

    Returns:
        `inf` or the number of days.
    """
    return 'inf' if f is None else str(f)


class Record(SQLModel):
    """SQLmodel basemodel for persisted records.

    Attributes:
        id: the unique ID for this record; the primary key.
        created: when the record was created.
    """

    id: int | None = SQLField(default=None, primary_key=True)
    created: datetime = SQLField(
        default_factory=lambda: datetime.now(timezone.utc)
    )


class GridRecord(Record, table=True):
    """One row of backtest grid results.

    The columns mirror the results CSV, with `f` stored as NULL for f = ∞.

    Attributes:
        run_label: groups the rows of one experiment.
        window_start: first ordinal of the window.
        window_end: last ordinal of the window.
        p: the diversity parameter.
        f: the rebalance frequency, NULL for ∞.
        final_wealth: wealth at the end of the window.
        rel_log_return: log return relative to the (1, f) benchmark.
        max_drawdown: maximum drawdown of the wealth.
        sharpe: annualized Sharpe ratio, NULL when undefined.
        total_costs: transaction costs paid in the window.
        diversity_drawdown: maximum drawdown of the top-K entropy.
    """

    run_label: str = SQLField(index=True, max_length=128)
    window_start: int
    window_end: int
    p: float
    f: int | None = None
    final_wealth: float
    rel_log_return: float
    max_drawdown: float
    sharpe: float | None = None
    total_costs: float
    diversity_drawdown: float


class OlsReport(BaseModel):
    """JSON form of an ordinary least squares fit.

    Attributes:
        names: the regressor names, intercept first.
        coefficients: the estimated coefficients.
        standard_errors: homoskedastic standard errors.
        r_squared: coefficient of determination.
        adj_r_squared: adjusted coefficient of determination.
        n: the number of observations.
        k: the number of regressors, intercept included.
        zero_variance: True when y has zero variance (R² set to 0).
    """

    names: list[str]
    coefficients: list[float]
    standard_errors: list[float]
    r_squared: float
    adj_r_squared: float
    n: int
    k: int
    zero_variance: bool = False
