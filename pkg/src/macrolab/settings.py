"""Module with the run configuration.

`RunConfig` reads its defaults from the environment (prefix `MACROLAB_`, so
`MACROLAB_OUT` sets the output directory). A flat JSON file and the command
line override the environment, in that order.
"""

import json
from pathlib import Path
from typing import Any

from pydantic import ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from macrolab_model import DividendMode, parse_frequency

from .exceptions import ParameterError


def parse_windows(value: Any) -> list[tuple[int, int]] | None:  # noqa: ANN401
    """Parse a window policy.

    Args:
        value: `calendar-year` (or None) for calendar-year windows, a text
            like `0:252,252:504`, or a list of pairs.

    Raises:
        ValueError: when a window is malformed.

    Returns:
        The explicit windows, or None for calendar years.
    """
    if value is None:
        return None
    if isinstance(value, str):
        if value.strip() in ('', 'calendar-year'):
            return None
        value = [part.split(':') for part in value.split(',')]
    windows = []
    for pair in value:
        start, end = (int(v) for v in pair)
        if end <= start:
            raise ValueError(f'window {start}:{end} must have end > start')
        windows.append((start, end))
    return windows


def _split(value: Any) -> Any:  # noqa: ANN401
    if isinstance(value, str):
        return [part for part in value.split(',') if part.strip()]
    return value


class RunConfig(BaseSettings):
    """Configuration of an experiment run.

    Attributes:
        input: a panel-CSV file; when None a synthetic panel is used.
        synthetic: explicit AtlasParams fields for the synthetic panel.
        n: the number of stocks of the default synthetic panel.
        years: the number of simulated years (252 steps each).
        seed: the seed of the synthetic panel and the random batches.
        k: the universe sizes of the statistics; the first one is used for
            the backtests and the regression.
        dt: the grid spacings of the excess growth rate series.
        p_grid: the diversity parameters of the backtest grid.
        f_grid: the rebalance frequencies of the grid (None for ∞).
        cost: the proportional transaction cost rate.
        dividend_mode: how dividends are handled in the backtests.
        windows: explicit backtest windows; None for calendar years.
        p: the diversity parameter of the attribution model.
        f: the rebalance frequency of the attribution model.
        subintervals: the number of subintervals of the cohort entropies.
        batches: the number of random batches per subinterval.
        out: the output directory.
        threads: the number of worker threads for the grid.
        results_db: a database URL to persist the grid results in.
        run_label: the label of the persisted rows.
        wealth_curves: write one `t,Z` file per run.
    """

    model_config = SettingsConfigDict(
        env_prefix='MACROLAB_', extra='forbid'
    )

    input: Path | None = None
    synthetic: dict[str, Any] | None = None
    n: int = 1000
    years: int = 10
    seed: int = 0
    k: list[int] = [500]
    dt: list[int] = [1, 5, 20, 60]
    p_grid: list[float] = [0.0, 0.25, 0.5, 0.75, 1.0]
    f_grid: list[int | None] = [1, 5, 10, 20, None]
    cost: float = 0.0025
    dividend_mode: DividendMode = DividendMode.CASH_BUCKET
    windows: list[tuple[int, int]] | None = None
    p: float = 0.0
    f: int | None = 10
    subintervals: int = 4
    batches: int = 25
    out: Path = Path('out')
    threads: int = 1
    results_db: str | None = None
    run_label: str = 'macrolab'
    wealth_curves: bool = False

    @field_validator('k', 'dt', 'p_grid', mode='before')
    @classmethod
    def _split_lists(cls, value: Any) -> Any:  # noqa: ANN401
        return _split(value)

    @field_validator('f_grid', mode='before')
    @classmethod
    def _parse_frequencies(
        cls, value: Any,  # noqa: ANN401
    ) -> list[int | None]:
        """Parse frequencies given as text, `inf` meaning never."""
        return [parse_frequency(f) for f in _split(value)]

    @field_validator('f', mode='before')
    @classmethod
    def _parse_frequency(cls, value: Any) -> int | None:  # noqa: ANN401
        return parse_frequency(value)

    @field_validator('windows', mode='before')
    @classmethod
    def _parse_windows(cls, value: Any) -> Any:  # noqa: ANN401
        return parse_windows(value)

    @model_validator(mode='after')
    def _check(self) -> 'RunConfig':
        """Check the values that depend on each other.

        Raises:
            ValueError: for conflicting sources or values out of range.

        Returns:
            The checked configuration.
        """
        if self.input is not None and self.synthetic is not None:
            raise ValueError('give either input or synthetic, not both')
        if not self.k or min(self.k) < 1:
            raise ValueError('k values must be ≥ 1')
        if not self.dt or min(self.dt) < 1:
            raise ValueError('dt values must be ≥ 1')
        if any(not 0 <= p <= 1 for p in [*self.p_grid, self.p]):
            raise ValueError('p values must be in [0, 1]')
        if not self.f_grid:
            raise ValueError('f_grid must not be empty')
        if not 0 <= self.cost < 1:
            raise ValueError('cost must be in [0, 1)')
        if self.years < 1 or self.threads < 1:
            raise ValueError('years and threads must be ≥ 1')
        if self.subintervals < 1 or self.batches < 1:
            raise ValueError('subintervals and batches must be ≥ 1')
        return self

    @classmethod
    def from_sources(
        cls,
        config_file: Path | None = None,
        overrides: dict[str, Any] | None = None,
    ) -> 'RunConfig':
        """Create the configuration from a JSON file and overrides.

        Args:
            config_file: a flat JSON file; keys may use `-` or `_`.
            overrides: values from the command line; None values are
                ignored.

        Raises:
            ParameterError: when the file cannot be read or a value is
                invalid.

        Returns:
            The RunConfig.
        """
        values: dict[str, Any] = {}
        if config_file is not None:
            try:
                data = json.loads(Path(config_file).read_text('utf-8'))
            except (OSError, json.JSONDecodeError) as error:
                raise ParameterError(
                    f'cannot read config file "{config_file}": {error}'
                ) from error
            if not isinstance(data, dict):
                raise ParameterError('config file must hold a JSON object')
            values.update({k.replace('-', '_'): v for k, v in data.items()})
        values.update({
            k: v for k, v in (overrides or {}).items() if v is not None
        })
        try:
            return cls(**values)
        except ValidationError as error:
            raise ParameterError(_first_message(error)) from error


def _first_message(error: ValidationError) -> str:
    """Format the first error of a validation error as `field: message`.

    Args:
        error: the pydantic validation error.

    Returns:
        The message.
    """
    first = error.errors()[0]
    location = '.'.join(str(part) for part in first['loc'])
    message = str(first['msg']).removeprefix('Value error, ')
    return f'{location}: {message}' if location else message
