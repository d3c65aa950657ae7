"""Module with the `ExperimentRunner` class.

The `ExperimentRunner` drives a complete experiment from a `RunConfig`: it
simulates or loads the panel, computes the statistics, runs the backtest grid
and fits the attribution model, writing every result to the output
directory. Statistics are computed on worker threads; files are written by
the calling thread only.
"""

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from pydantic import ValidationError

from macrolab_model import AtlasParams, StabilityReport, frequency_label

from .backtest import GridResults, GridRunner, frequency_spread, risk_lines
from .data_loader import AtlasDataSource, CSVDataSource, write_panel
from .exceptions import ParameterError
from .macrostats import (
    capital_distribution,
    cohort_slopes,
    cumulative_egr,
    curve_points,
    daily_joint,
    diversity_egr_joint,
    entropy_path,
    frozen_cohort_entropy,
    random_batch_entropy,
    series_stats,
)
from .market_data import (
    MarketPanel,
    capitalization_weights,
    entry_exit_events,
    full_universe,
    universe_overview,
    yearly_flows,
)
from .rankstats import (
    change_quantiles,
    rank_quadratic_variation,
    rank_switch_intensity,
    rank_trajectories,
    rank_transition_stats,
)
from .regression import build_attribution_dataset, fit_attribution
from .reports import write_csv, write_json
from .result_store import ResultStore
from .settings import RunConfig
from .synthetic import default_atlas_params, stability_report

STEPS_PER_YEAR = 252
JOINT_WINDOW = 252

OUTPUT_FILES = {
    'panel.csv': 'the market panel (panel-CSV)',
    'params.json': 'the simulation parameters and their stability report',
    'overview.csv': 't,date,n_stocks,n_cover',
    'events.csv': 'kind,stock,t,date,weight',
    'capdist.csv': 'log10_rank,log10_weight,date',
    'entropy_full.csv': 't,date,entropy',
    'entropy_topK.csv': 't,K,entropy',
    'entropy_frozen.csv': 't,cohort,entropy',
    'entropy_random.csv': 't,cohort,batch,entropy',
    'cohort_slopes.csv': 'cohort,start,end,slope',
    'egr_dt{dt}.csv': 't,date,gamma,Gamma',
    'egr_stats.json': 'summary statistics of the excess growth rates',
    'joint.csv': 'window_start,delta_gamma,entropy_range,entropy_change',
    'joint_binned.csv': 'bin,x_mean,y_mean,count',
    'joint_daily.csv': 't,egr,dlog_entropy',
    'joint_daily_binned.csv': 'bin,x_mean,y_mean,count',
    'flows.csv': 'year,entries,exits',
    'qv.csv': 't,k,QV',
    'transitions.csv': 'k,mean_change,p_plus,p_zero,p_minus (+ smoothed, '
    + 'quantiles)',
    'lambda.csv': 't,k,Lambda',
    'rank_trajectories.csv': 'start_rank,stock,t,rank,exited',
    'results.csv': ','.join([
        'window_start', 'window_end', 'p', 'f', 'final_wealth',
        'rel_log_return', 'max_drawdown', 'sharpe', 'total_costs',
        'diversity_drawdown',
    ]),
    'frequency_spread.csv': 'window_start,window_end,f,spread',
    'risk_lines.json': 'drawdown lines per p',
    'attribution.json': 'OLS fit of the attribution model',
    'attribution_dataset.csv': 'window_start,window_end,rel_log_return,'
    + 'dlog_entropy,delta_gamma,egr_spread',
    'summary.json': 'the files written by `report`',
}


class ExperimentRunner:
    """Run the steps of an experiment and write their outputs."""

    def __init__(self, config: RunConfig) -> None:
        """Initialize the runner.

        Args:
            config: the run configuration.
        """
        self._logger = logging.getLogger(f'ExperimentRunner-{id(self)}')
        self.config = config
        self.written: list[Path] = []
        self._logger.info('ExperimentRunner created for "%s"', config.out)

    @property
    def out(self) -> Path:
        """Return the output directory, creating it when needed."""
        self.config.out.mkdir(parents=True, exist_ok=True)
        return self.config.out

    @property
    def K(self) -> int:  # noqa: N802
        """Return the universe size of the backtests and the regression."""
        return self.config.k[0]

    @cached_property
    def atlas(self) -> tuple[AtlasParams, StabilityReport]:
        """Return the parameters of the synthetic panel.

        Raises:
            ParameterError: when the parameters are invalid.
        """
        config = self.config
        if config.synthetic is None:
            return default_atlas_params(
                config.n, config.seed, config.years * STEPS_PER_YEAR
            )
        try:
            params = AtlasParams(**{'seed': config.seed, **config.synthetic})
        except ValidationError as error:
            raise ParameterError(str(error)) from error
        return params, stability_report(params.gamma)

    @cached_property
    def panel(self) -> MarketPanel:
        """Return the panel of the experiment (loaded once)."""
        if self.config.input is not None:
            return CSVDataSource(self.config.input).load()
        return AtlasDataSource(self.atlas[0]).load()

    def _write_csv(self, frame: pd.DataFrame, name: str) -> Path:
        """Write a frame to the output directory and remember the path.

        Args:
            frame: the data.
            name: the file name.

        Returns:
            The written path.
        """
        path = write_csv(frame, self.out / name)
        self.written.append(path)
        return path

    def _write_json(self, data: Any, name: str) -> Path:  # noqa: ANN401
        """Write JSON data to the output directory and remember the path.

        Args:
            data: the data.
            name: the file name.

        Returns:
            The written path.
        """
        path = write_json(data, self.out / name)
        self.written.append(path)
        return path

    def simulate(self) -> list[Path]:
        """Simulate the synthetic panel and write it.

        Raises:
            ParameterError: when an input file is configured.

        Returns:
            The paths of `panel.csv` and `params.json`.
        """
        if self.config.input is not None:
            raise ParameterError('simulate needs a synthetic configuration')
        params, report = self.atlas
        panel = self.panel
        self._logger.info('Writing simulated panel')
        write_panel(panel, self.out / 'panel.csv')
        self.written.append(self.out / 'panel.csv')
        self._write_json(
            {
                'params': params.model_dump(mode='json'),
                'stability': report.model_dump(mode='json'),
            },
            'params.json',
        )
        return [self.out / 'panel.csv', self.out / 'params.json']

    def _capdist(self) -> pd.DataFrame:
        """Return the curve points of the first, middle and last day."""
        panel = self.panel
        days = sorted({0, panel.calendar.last // 2, panel.calendar.last})
        return pd.concat(
            [
                curve_points(
                    capital_distribution(capitalization_weights(
                        panel, full_universe(panel, t)
                    )),
                    panel.calendar.dates[t],
                )
                for t in days
            ],
            ignore_index=True,
        )

    def _events(self) -> pd.DataFrame:
        """Return the entry and exit events as a table."""
        dates = self.panel.calendar.dates
        return pd.DataFrame(
            [
                {
                    'kind': e.kind,
                    'stock': e.stock,
                    't': e.t,
                    'date': dates[e.t].isoformat(),
                    'weight': e.weight,
                }
                for e in entry_exit_events(self.panel)
            ],
            columns=['kind', 'stock', 't', 'date', 'weight'],
        )

    def _entropy_full(self) -> pd.DataFrame:
        """Return the entropy of the full universe per day."""
        panel = self.panel
        return pd.DataFrame({
            't': np.arange(panel.n_days),
            'date': [d.isoformat() for d in panel.calendar.dates],
            'entropy': entropy_path(panel),
        })

    def _entropy_top(self) -> pd.DataFrame:
        """Return the top-K entropy per day for every configured K."""
        return pd.concat(
            [
                pd.DataFrame({
                    't': np.arange(self.panel.n_days),
                    'K': k,
                    'entropy': entropy_path(self.panel, k),
                })
                for k in self.config.k
            ],
            ignore_index=True,
        )

    def _egr(self, dt: int) -> pd.DataFrame:
        """Return the cap-weighted excess growth rates on a grid.

        Args:
            dt: the grid spacing in trading days.

        Returns:
            The per-period and cumulative rates with their dates.
        """
        series = cumulative_egr(self.panel, self.K, dt)
        dates = self.panel.calendar.dates
        return pd.DataFrame({
            't': series.grid,
            'date': [dates[t].isoformat() for t in series.grid],
            'gamma': series.per_period,
            'Gamma': series.cumulative,
        })

    def _egr_stats(self, frames: dict[str, pd.DataFrame]) -> dict[str, Any]:
        """Summarize the excess growth rates of every grid.

        Args:
            frames: the computed frames by file name.

        Returns:
            Per grid the number of periods, the yearly rate and the series
            statistics.
        """
        result: dict[str, Any] = {}
        for dt in self.config.dt:
            frame = frames.get(f'egr_dt{dt}.csv')
            if frame is None:
                continue
            gamma = frame['gamma'].to_numpy()[1:]
            span = (frame['t'].iloc[-1] - frame['t'].iloc[0]) / STEPS_PER_YEAR
            entry: dict[str, Any] = {
                'dt': dt,
                'periods': len(gamma),
                'Gamma_per_year': float(frame['Gamma'].iloc[-1] / span),
            }
            max_lag = min(20, len(gamma) - 1)
            if max_lag >= 1:
                entry['stats'] = series_stats(gamma, max_lag=max_lag).as_dict()
            result[f'dt{dt}'] = entry
        return result

    def _rank_frames(self) -> dict[str, Callable[[], pd.DataFrame]]:
        """Return the tasks of the rank statistics.

        K is capped at the largest universe of the panel.

        Returns:
            The tasks by file name.
        """
        panel = self.panel
        largest = int(panel.presence.sum(axis=1).max())
        K = min(self.K, largest)  # noqa: N806

        def transitions() -> pd.DataFrame:
            stats = rank_transition_stats(panel, K)
            return stats.to_frame().merge(change_quantiles(stats), on='k')

        def lambdas() -> pd.DataFrame:
            if K < 2:
                return pd.DataFrame(columns=['t', 'k', 'Lambda'])
            return rank_switch_intensity(panel, K).to_frame()

        return {
            'qv.csv': lambda: rank_quadratic_variation(panel, K).to_frame(),
            'transitions.csv': transitions,
            'lambda.csv': lambdas,
            'rank_trajectories.csv': lambda: rank_trajectories(panel),
        }

    def _joint(self) -> tuple[pd.DataFrame, pd.DataFrame]:
        """Return the yearly-window joint table and its binned means."""
        window = max(2, min(JOINT_WINDOW, self.panel.calendar.last))
        table = diversity_egr_joint(self.panel, self.K, window)
        return table.rows, table.binned

    def _daily_joint(self) -> tuple[pd.DataFrame, pd.DataFrame]:
        """Return the daily joint table, empty when K < 2.

        Returns:
            The rows and their binned means.
        """
        if self.K < 2:
            return (
                pd.DataFrame(columns=['t', 'egr', 'dlog_entropy']),
                pd.DataFrame(columns=['bin', 'x_mean', 'y_mean', 'count']),
            )
        table = daily_joint(self.panel, self.K)
        return table.rows, table.binned

    def analyze(self) -> list[Path]:
        """Compute the market statistics and write them.

        Returns:
            The written paths.
        """
        panel = self.panel
        config = self.config
        tasks: dict[str, Callable[[], pd.DataFrame]] = {
            'overview.csv': lambda: universe_overview(panel),
            'flows.csv': lambda: yearly_flows(panel),
            'events.csv': self._events,
            'capdist.csv': self._capdist,
            'entropy_full.csv': self._entropy_full,
            'entropy_topK.csv': self._entropy_top,
            'entropy_frozen.csv': lambda: frozen_cohort_entropy(
                panel, self.K, config.subintervals
            ),
            'entropy_random.csv': lambda: random_batch_entropy(
                panel, self.K, config.subintervals, config.batches,
                config.seed,
            ),
            **{
                f'egr_dt{dt}.csv': (lambda dt=dt: self._egr(dt))
                for dt in config.dt if dt <= panel.calendar.last
            },
            **self._rank_frames(),
        }
        self._logger.info('Computing %d statistics', len(tasks) + 2)
        with ThreadPoolExecutor(max_workers=config.threads) as executor:
            futures = {name: executor.submit(task)
                       for name, task in tasks.items()}
            joint = executor.submit(self._joint)
            daily = executor.submit(self._daily_joint)
            frames = {name: future.result()
                      for name, future in futures.items()}
            joint_rows, joint_binned = joint.result()
            daily_rows, daily_binned = daily.result()

        frames['cohort_slopes.csv'] = cohort_slopes(
            frames['entropy_frozen.csv']
        )
        frames['joint.csv'] = joint_rows
        frames['joint_binned.csv'] = joint_binned
        frames['joint_daily.csv'] = daily_rows
        frames['joint_daily_binned.csv'] = daily_binned
        paths = [self._write_csv(frames[name], name) for name in
                 sorted(frames)]
        paths.append(self._write_json(self._egr_stats(frames),
                                      'egr_stats.json'))
        return paths

    def backtest(self) -> GridResults:
        """Run the backtest grid and write its results.

        Returns:
            The GridResults.
        """
        config = self.config
        runner = GridRunner(
            self.panel,
            K=self.K,
            cost_rate=config.cost,
            dividend_mode=config.dividend_mode,
            threads=config.threads,
        )
        grid = runner.run(config.p_grid, config.f_grid, config.windows)
        self._write_csv(grid.to_csv_frame(), 'results.csv')
        self._write_csv(frequency_spread(grid), 'frequency_spread.csv')
        self._write_json(risk_lines(grid), 'risk_lines.json')
        if config.wealth_curves:
            for (window, p, f), series in sorted(
                grid.series.items(), key=lambda item: str(item[0])
            ):
                name = (
                    f'wealth_p{p:g}_f{frequency_label(f)}_'
                    + f'{window[0]}-{window[1]}.csv'
                )
                self._write_csv(series.to_frame(), name)
        if config.results_db:
            store = ResultStore()
            store.configure(db_connection_str=config.results_db)
            store.create_tables()
            store.save_grid(grid, config.run_label)
        return grid

    def regress(self, grid: GridResults | pd.DataFrame | None = None
                ) -> list[Path]:
        """Fit the attribution model and write it.

        Args:
            grid: the grid results; read from `results.csv` in the output
                directory when None.

        Raises:
            ParameterError: when there are no grid results to read.

        Returns:
            The written paths.
        """
        if grid is None:
            results = self.out / 'results.csv'
            if not results.exists():
                raise ParameterError(
                    f'"{results}" not found; run backtest first'
                )
            grid = pd.read_csv(results, keep_default_na=False,
                               na_values=[''])
        dataset = build_attribution_dataset(
            self.panel, grid, self.config.p, self.config.f, self.K,
            self.config.windows,
        )
        fit = fit_attribution(dataset)
        return [
            self._write_csv(dataset.frame, 'attribution_dataset.csv'),
            self._write_json(
                {
                    'p': dataset.p,
                    'f': frequency_label(dataset.f),
                    'K': dataset.K,
                    **fit.to_report().model_dump(mode='json'),
                },
                'attribution.json',
            ),
        ]

    def report(self) -> list[Path]:
        """Run the complete pipeline into one output directory.

        Returns:
            The written paths, `summary.json` last.
        """
        if self.config.input is None:
            self.simulate()
        self.analyze()
        grid = self.backtest()
        self.regress(grid)
        names = sorted({path.name for path in self.written})
        self._write_json(
            {
                'files': names,
                'stocks': self.panel.n_stocks,
                'days': self.panel.n_days,
                'windows': int(
                    grid.rows[['window_start', 'window_end']]
                    .drop_duplicates().shape[0]
                ),
            },
            'summary.json',
        )
        return list(self.written)
