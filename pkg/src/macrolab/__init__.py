"""MacroLab Package.

This package computes the macroscopic statistics of an equity market
(capital distribution, diversity, excess growth rate and rank dynamics) from
a daily panel of capitalizations, simulates such panels from the generalized
Atlas model, and backtests diversity-weighted portfolios under transaction
costs.
"""

from .backtest import GridRunner, PortfolioSimulator, run_backtest, run_grid
from .data_loader import AtlasDataSource, CSVDataSource, load_panel
from .experiment import ExperimentRunner
from .market_data import MarketPanel
from .result_store import ResultStore
from .settings import RunConfig
from .synthetic import default_atlas_params, simulate_atlas

__version__ = '0.1.0'

__all__ = [
    'AtlasDataSource',
    'CSVDataSource',
    'ExperimentRunner',
    'GridRunner',
    'MarketPanel',
    'PortfolioSimulator',
    'ResultStore',
    'RunConfig',
    'default_atlas_params',
    'load_panel',
    'run_backtest',
    'run_grid',
    'simulate_atlas',
]
