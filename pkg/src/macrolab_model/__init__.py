"""MacroLab Model Package.

This package contains the declarative data model for `macrolab`: the
parameters of the synthetic market, the configuration of backtests and the
records that are stored in the result database.

The parameter models are pydantic models, so they validate on creation. The
records use SQLModel so that the same class is the validated model and the
database table.
"""

from .model import (
    AtlasParams,
    BacktestConfig,
    DividendMode,
    GridRecord,
    OlsReport,
    Record,
    StabilityReport,
    frequency_label,
    parse_frequency,
)

__version__ = '0.1.0'

__all__ = [
    'AtlasParams',
    'BacktestConfig',
    'DividendMode',
    'GridRecord',
    'OlsReport',
    'Record',
    'StabilityReport',
    'frequency_label',
    'parse_frequency',
]
