"""Tests for the macroscopic market statistics."""

import math

import numpy as np
import pytest
from fixtures_panels import make_panel
from macrolab.exceptions import (
    ParameterError,
    TotalLossError,
    UndefinedStatisticError,
)
from macrolab.macrostats import (
    binned_means,
    capital_distribution,
    cohort_slopes,
    cumulative_egr,
    curve_points,
    daily_joint,
    diversity_egr_joint,
    diversity_p,
    egr_frequency_spread,
    egr_quadratic_approx,
    entropy_path,
    excess_growth_rate,
    frozen_cohort_entropy,
    pareto_weights,
    power_weights,
    random_batch_entropy,
    series_stats,
    shannon_entropy,
)
from macrolab.market_data import MarketPanel

LN2 = math.log(2)


def test_capital_distribution() -> None:
    """Test the ranking of weight vectors."""
    np.testing.assert_array_equal(
        capital_distribution(np.array([0.2, 0.5, 0.3])).weights,
        [0.5, 0.3, 0.2],
    )
    np.testing.assert_array_equal(
        capital_distribution(np.full(4, 0.25)).weights, [0.25] * 4
    )


def test_pareto_weights() -> None:
    """Test the power-law distribution with exponent one."""
    np.testing.assert_allclose(
        pareto_weights(3, 1.0).weights,
        [0.5454545454545, 0.2727272727273, 0.1818181818182],
        atol=1e-12,
    )
    with pytest.raises(ParameterError):
        pareto_weights(0, 1.0)


def test_curve_points() -> None:
    """Test the base-10 points of a capital distribution curve."""
    points = curve_points(pareto_weights(10, 1.0), '2024-01-02')
    assert list(points.columns) == ['log10_rank', 'log10_weight', 'date']
    assert points['log10_rank'].iloc[0] == 0.0
    assert points['log10_rank'].iloc[-1] == pytest.approx(1.0)
    assert np.all(np.diff(points['log10_weight']) < 0)


@pytest.mark.parametrize(
    'weights, expected',
    [
        (np.full(500, 1 / 500), 6.214608),
        (np.array([1.0]), 0.0),
        (np.array([1.0, 0.0]), 0.0),
        (np.array([0.5, 0.25, 0.25]), 1.039721),
    ],
)
def test_shannon_entropy(weights: np.ndarray, expected: float) -> None:
    """Test the entropy of known weight vectors.

    Args:
        weights: the weights.
        expected: the entropy in nats.
    """
    assert shannon_entropy(weights) == pytest.approx(expected, abs=1e-6)


def test_entropy_by_name_or_rank() -> None:
    """Test that ranking the weights does not change the entropy."""
    weights = np.random.default_rng(1).dirichlet(np.ones(50))
    assert shannon_entropy(weights) == pytest.approx(
        shannon_entropy(capital_distribution(weights)), abs=1e-14
    )


def test_diversity_p() -> None:
    """Test the D_p measure."""
    weights = np.random.default_rng(2).dirichlet(np.ones(5))
    assert diversity_p(weights, 1.0) == pytest.approx(1.0)
    assert diversity_p(np.full(2, 0.5), 0.5) == pytest.approx(2.0)
    assert diversity_p(np.full(7, 1 / 7), 0.5) == pytest.approx(7.0)
    assert diversity_p(np.array([0.8, 0.2]), 0.5) == pytest.approx(1.8)
    for p in (0.0, -0.5, 1.5):
        with pytest.raises(ParameterError):
            diversity_p(weights, p)


def test_power_weights() -> None:
    """Test the endpoints and an interior power."""
    mu = np.array([0.8, 0.2])
    np.testing.assert_allclose(power_weights(mu, 0.5), [2 / 3, 1 / 3])
    np.testing.assert_allclose(power_weights(mu, 0.0), [0.5, 0.5])
    np.testing.assert_allclose(power_weights(mu, 1.0), mu)
    with pytest.raises(ParameterError):
        power_weights(mu, 1.5)


def test_excess_growth_rate() -> None:
    """Test the excess growth rate of known cases."""
    half = np.array([0.5, 0.5])
    assert excess_growth_rate(half, np.array([0.03, 0.03])) == 0.0
    gamma = excess_growth_rate(half, np.array([LN2, 0.0]))
    assert gamma == pytest.approx(math.log(1.5) - LN2 / 2, rel=1e-12)
    assert gamma == pytest.approx(0.058891, abs=1e-6)
    single = np.array([1.0, 0.0])
    assert excess_growth_rate(single, np.array([0.4, -2.0])) == 0.0
    assert excess_growth_rate(
        half, np.array([0.01, -0.01])
    ) == pytest.approx(math.log(math.cosh(0.01)), rel=1e-12)


def test_excess_growth_rate_absent_stocks() -> None:
    """Test that absent stocks are left out and weights renormalized."""
    weights = np.array([0.25, 0.25, 0.5])
    returns = np.array([0.01, -0.01, np.nan])
    assert excess_growth_rate(weights, returns) == pytest.approx(
        math.log(math.cosh(0.01)), rel=1e-12
    )
    assert excess_growth_rate(
        np.array([1.0]), np.array([np.nan])
    ) == 0.0


def test_total_loss() -> None:
    """Test a weighted constituent losing everything."""
    with pytest.raises(TotalLossError, match='total loss'):
        excess_growth_rate(np.array([0.5, 0.5]), np.array([-np.inf, 0.0]))
    assert excess_growth_rate(
        np.array([1.0, 0.0]), np.array([0.01, -np.inf])
    ) == 0.0


def test_excess_growth_rate_is_nonnegative() -> None:
    """Test nonnegativity and invariance under a common return shift."""
    rng = np.random.default_rng(3)
    draws = 100_000
    weights = rng.dirichlet(np.ones(20), size=draws)
    returns = rng.normal(size=(draws, 20)) * rng.uniform(
        1e-6, 0.5, size=(draws, 1)
    )
    gamma = np.array([
        excess_growth_rate(w, r) for w, r in zip(weights, returns)
    ])
    shifted = np.array([
        excess_growth_rate(w, r + 0.7) for w, r in zip(weights, returns)
    ])
    assert gamma.min() >= 0
    np.testing.assert_allclose(shifted, gamma, rtol=0, atol=1e-12)


def test_quadratic_approx() -> None:
    """Test the quadratic approximation against the exact value."""
    half = np.array([0.5, 0.5])
    small = np.array([0.01, -0.01])
    assert egr_quadratic_approx(half, small) == pytest.approx(5.0e-5)
    assert abs(
        egr_quadratic_approx(half, small) - excess_growth_rate(half, small)
    ) <= 1e-6
    large = np.array([LN2, 0.0])
    assert egr_quadratic_approx(half, large) == pytest.approx(LN2**2 / 8)
    assert egr_quadratic_approx(half, large) > excess_growth_rate(
        half, large
    )


def test_quadratic_approx_error_is_cubic() -> None:
    """Test that halving the returns cuts the error eightfold."""
    rng = np.random.default_rng(4)
    draws = 100_000
    weights = rng.dirichlet(np.ones(50), size=draws)
    returns = 0.01 * (rng.exponential(size=(draws, 50)) - 1)

    def errors(factor: float) -> np.ndarray:
        return np.array([
            excess_growth_rate(w, factor * r)
            - egr_quadratic_approx(w, factor * r)
            for w, r in zip(weights, returns)
        ])

    coarse, fine = errors(1.0), errors(0.5)
    scale = np.abs(returns).max(axis=1)
    assert np.all(np.abs(coarse) <= scale**3)
    assert np.all(np.abs(fine) <= (scale / 2) ** 3)
    assert coarse.sum() / fine.sum() >= 8.0


def test_cumulative_egr_two_periods() -> None:
    """Test the cumulative rate of the hand-set two-stock panel."""
    panel = make_panel({'A': [10, 20, 20], 'B': [10, 10, 20]})
    series = cumulative_egr(panel, 2, 1, 'equal')
    np.testing.assert_array_equal(series.grid, [0, 1, 2])
    assert series.per_period[0] == 0.0
    assert series.cumulative[-1] == pytest.approx(
        2 * math.log(1.5) - LN2, rel=1e-12
    )
    np.testing.assert_allclose(
        series.cumulative, np.cumsum(series.per_period)
    )


def test_cumulative_egr_lockstep(lockstep_panel: MarketPanel) -> None:
    """Test that a market moving in lockstep has no excess growth.

    Args:
        lockstep_panel: all stocks move by the same factor.
    """
    for dt in (1, 2, 7):
        series = cumulative_egr(lockstep_panel, 3, dt)
        np.testing.assert_allclose(series.cumulative, 0.0, atol=1e-15)


def test_cumulative_egr_grid(small_atlas_panel: MarketPanel) -> None:
    """Test the grid and the invariants of the cumulative rate.

    Args:
        small_atlas_panel: a simulated panel with 301 days.
    """
    series = cumulative_egr(small_atlas_panel, 10, 20)
    np.testing.assert_array_equal(series.grid, np.arange(0, 301, 20))
    assert np.all(series.per_period >= 0)
    assert series.cumulative[0] == 0.0
    np.testing.assert_allclose(
        series.cumulative, np.cumsum(series.per_period)
    )
    diversity = cumulative_egr(small_atlas_panel, 10, 20, 'diversity', 1.0)
    np.testing.assert_allclose(diversity.cumulative, series.cumulative)


def test_cumulative_egr_errors(small_atlas_panel: MarketPanel) -> None:
    """Test invalid arguments of the cumulative rate.

    Args:
        small_atlas_panel: a simulated panel.
    """
    with pytest.raises(ParameterError):
        cumulative_egr(small_atlas_panel, 0, 1)
    with pytest.raises(ParameterError):
        cumulative_egr(small_atlas_panel, 5, 0)
    with pytest.raises(ParameterError):
        cumulative_egr(small_atlas_panel, 5, 20, start=290)
    with pytest.raises(ParameterError):
        cumulative_egr(small_atlas_panel, 5, 1, 'diversity')


def test_cumulative_egr_drops_exits(flow_panel: MarketPanel) -> None:
    """Test that a delisted stock is left out of its last period.

    Args:
        flow_panel: C exits after day 7.
    """
    series = cumulative_egr(flow_panel, 3, 1)
    assert series.dropped == 1


def test_entropy_path_lockstep(lockstep_panel: MarketPanel) -> None:
    """Test that the entropy of a lockstep market is constant.

    Args:
        lockstep_panel: caps 30, 20 and 10 times a common factor.
    """
    expected = shannon_entropy(np.array([0.5, 1 / 3, 1 / 6]))
    np.testing.assert_allclose(entropy_path(lockstep_panel), expected)
    np.testing.assert_allclose(
        entropy_path(lockstep_panel, 1), 0.0, atol=1e-15
    )
    np.testing.assert_allclose(
        entropy_path(lockstep_panel, measure='diversity', p=1.0), 1.0
    )


def test_frozen_cohorts_lockstep(lockstep_panel: MarketPanel) -> None:
    """Test that frozen cohorts of a lockstep market have flat paths.

    Args:
        lockstep_panel: an 8-day panel.
    """
    paths = frozen_cohort_entropy(lockstep_panel, 2, subintervals=2)
    assert list(paths.columns) == ['t', 'cohort', 'entropy']
    assert len(paths) == lockstep_panel.n_days
    slopes = cohort_slopes(paths)
    assert list(slopes['cohort']) == [0, 1]
    np.testing.assert_allclose(slopes['slope'], 0.0, atol=1e-12)


def test_frozen_cohort_keeps_survivors(flow_panel: MarketPanel) -> None:
    """Test that a cohort drops members that exit.

    Args:
        flow_panel: C exits after day 7.
    """
    paths = frozen_cohort_entropy(flow_panel, 2, subintervals=1)
    assert paths['entropy'].iloc[-1] == 0.0
    assert paths['entropy'].iloc[0] > 0.0


def test_random_batches(small_atlas_panel: MarketPanel) -> None:
    """Test that random batches are reproducible from their seed.

    Args:
        small_atlas_panel: a simulated panel.
    """
    first = random_batch_entropy(small_atlas_panel, 5, 3, 4, seed=9)
    second = random_batch_entropy(small_atlas_panel, 5, 3, 4, seed=9)
    assert list(first.columns) == ['t', 'cohort', 'batch', 'entropy']
    assert first.equals(second)
    assert len(first) == small_atlas_panel.n_days * 4
    assert first['entropy'].max() <= math.log(5) + 1e-12
    assert len(cohort_slopes(first)) == 12


def test_series_stats_alternating() -> None:
    """Test the autocorrelation of an alternating series."""
    report = series_stats(np.tile([1.0, -1.0], 50), max_lag=2)
    assert report.acf[0] == pytest.approx(-0.99)
    assert report.acf[1] == pytest.approx(0.98)
    assert report.mean == 0.0
    assert report.skewness == pytest.approx(0.0, abs=1e-12)


def test_series_stats_correlation() -> None:
    """Test the correlations of identical and constant series."""
    x = np.random.default_rng(5).standard_t(3, size=300)
    report = series_stats(x, y=x.copy())
    assert report.pearson == pytest.approx(1.0)
    assert report.winsorized_pearson == pytest.approx(1.0)
    assert report.correlation_defined

    flat = series_stats(x, y=np.ones(300))
    assert flat.pearson is None
    assert not flat.correlation_defined


def test_series_stats_constant() -> None:
    """Test the flagged statistics of a constant series."""
    report = series_stats(np.full(30, 2.0), max_lag=5)
    assert report.sd == 0.0
    assert report.skewness is None
    assert report.excess_kurtosis is None
    assert np.all(np.isnan(report.acf))
    assert report.as_dict()['skewness'] is None


def test_series_stats_errors() -> None:
    """Test the argument checks of the summary statistics."""
    with pytest.raises(ParameterError):
        series_stats(np.ones(5), max_lag=5)
    with pytest.raises(ParameterError):
        series_stats(np.arange(30.0), max_lag=5, winsor_q=0.5)
    with pytest.raises(ParameterError):
        series_stats(np.arange(30.0), max_lag=5, y=np.arange(10.0))


def test_binned_means() -> None:
    """Test equal-count bins."""
    x = np.arange(100.0)[::-1]
    binned = binned_means(x, 2 * x, bins=20)
    assert list(binned['count']) == [5] * 20
    assert binned['x_mean'].iloc[0] == 2.0
    np.testing.assert_allclose(binned['y_mean'], 2 * binned['x_mean'])
    assert len(binned_means(np.arange(3.0), np.arange(3.0), 20)) == 3
    assert binned_means(np.array([]), np.array([])).empty


def test_joint_lockstep(lockstep_panel: MarketPanel) -> None:
    """Test that a lockstep market has zero rates and entropy ranges.

    Args:
        lockstep_panel: an 8-day panel.
    """
    table = diversity_egr_joint(lockstep_panel, 3, 2)
    assert list(table.rows['window_start']) == [0, 2, 4]
    np.testing.assert_allclose(table.rows['delta_gamma'], 0.0, atol=1e-15)
    np.testing.assert_allclose(
        table.rows['entropy_range'], 0.0, atol=1e-12
    )
    with pytest.raises(ParameterError):
        diversity_egr_joint(lockstep_panel, 3, 1)


def test_joint_invariants(small_atlas_panel: MarketPanel) -> None:
    """Test the signs of the joint table columns.

    Args:
        small_atlas_panel: a simulated panel with 301 days.
    """
    table = diversity_egr_joint(small_atlas_panel, 10, 50, bins=3)
    assert list(table.rows['window_start']) == [0, 50, 100, 150, 200, 250]
    assert np.all(table.rows['delta_gamma'] >= 0)
    assert np.all(table.rows['entropy_range'] >= 0)
    assert np.all(
        table.rows['entropy_range'] >= table.rows['entropy_change'].abs()
    )
    assert table.binned['count'].sum() == 6


def test_daily_joint(small_atlas_panel: MarketPanel) -> None:
    """Test the daily joint table.

    Args:
        small_atlas_panel: a simulated panel with 301 days.
    """
    table = daily_joint(small_atlas_panel, 10)
    assert len(table.rows) == 300
    assert np.all(table.rows['egr'] >= 0)
    assert table.binned['count'].sum() == 300


def test_daily_joint_needs_two_stocks() -> None:
    """Test that days with a single stock leave the daily joint table."""
    panel = make_panel({
        'A': [10.0, 11.0, 12.0, 13.0],
        'B': [5.0, 6.0, None, None],
    })
    table = daily_joint(panel, 2)
    assert list(table.rows['t']) == [1]
    assert np.all(np.isfinite(table.rows['dlog_entropy']))
    with pytest.raises(UndefinedStatisticError, match='K must be'):
        daily_joint(panel, 1)


def test_frequency_spread(small_atlas_panel: MarketPanel) -> None:
    """Test the daily minus single-period excess growth per window.

    Args:
        small_atlas_panel: a simulated panel.
    """
    spread = egr_frequency_spread(small_atlas_panel, 10, [(0, 1), (0, 100)])
    np.testing.assert_allclose(
        spread['spread'], spread['delta_gamma'] - spread['gamma_window']
    )
    assert spread['spread'].iloc[0] == pytest.approx(0.0, abs=1e-15)
    assert np.all(spread['gamma_window'] >= 0)
