"""Trace extraction, acceptance accounting, densities, and split R-hat."""

import numpy as np
import pytest

from laggard.diagnostics import (
    MIN_DENSITY_BINS,
    default_trace_lags,
    density_bins,
    diagnose,
    gelman_split_rhat,
)
from laggard.engine import Hooks, McmcControl, ModelSpec, fit
from laggard.errors import SpecError
from laggard.simulate import SimConfig, simulate_dataset, window_curve


def _fit(hooks=None, seed=0):
    cfg = SimConfig(
        n=80,
        T=8,
        exposure_names=("e",),
        theta={"e": window_curve(8, 3, 5, 0.1)},
        gamma=(0.5,),
        noise_sd=1.0,
    )
    data, _ = simulate_dataset(cfg, seed=seed)
    return fit(ModelSpec(), data, McmcControl(n_burn=40, n_iter=80, n_thin=2, seed=seed), hooks)


class TestDefaultTraceLags:
    def test_quartiles(self):
        assert default_trace_lags(8) == [2, 4, 6]
        assert default_trace_lags(37) == [9, 18, 28]

    def test_deduplicates_for_short_series(self):
        assert default_trace_lags(2) == [1, 2]
        assert default_trace_lags(1) == [1]


class TestDensityBins:
    def test_bin_count_floor(self):
        rng = np.random.default_rng(0)
        edges, density = density_bins(rng.standard_normal(50))
        assert len(density) >= MIN_DENSITY_BINS
        assert len(edges) == len(density) + 1

    def test_integrates_to_one(self):
        rng = np.random.default_rng(1)
        edges, density = density_bins(rng.standard_normal(500))
        assert float(np.sum(density * np.diff(edges))) == pytest.approx(1.0)

    def test_constant_series(self):
        edges, density = density_bins(np.full(10, 3.0))
        assert edges.tolist() == [2.5, 3.5]
        assert density.tolist() == [1.0]


class TestDiagnose:
    def test_trace_names_and_lengths(self):
        f = _fit()
        rep = diagnose(f)
        R = f.n_retained
        assert {"theta[e][2]", "theta[e][4]", "theta[e][6]", "cumulative[e]", "sigma2"} <= set(
            rep.traces
        )
        assert "gamma[(Intercept)]" in rep.traces
        assert all(len(s) == R for s in rep.traces.values())
        assert set(rep.densities) == set(rep.traces)
        np.testing.assert_array_equal(rep.traces["theta[e][4]"], f.theta_draws["e"][:, 3])

    def test_acceptance_bounds_and_force_accept(self):
        plain = diagnose(_fit())
        assert 0.0 < plain.acceptance["dlm"]["overall"] < 1.0
        forced = diagnose(_fit(hooks=Hooks(force_accept=True)))
        assert forced.acceptance["dlm"]["overall"] == 1.0
        assert np.all(forced.acceptance["dlm"]["rolling"] == 1.0)

    def test_frozen_trees_stay_at_one_leaf(self):
        rep = diagnose(_fit(hooks=Hooks(freeze_trees=True)))
        np.testing.assert_array_equal(rep.tree_sizes, np.ones_like(rep.tree_sizes))

    def test_lag_validation(self):
        f = _fit()
        with pytest.raises(SpecError):
            diagnose(f, lags=[0])
        with pytest.raises(SpecError):
            diagnose(f, lags=[9])

    def test_determinism_and_round_trip(self):
        a = diagnose(_fit()).to_dict()
        b = diagnose(_fit()).to_dict()
        assert a == b


class TestSplitRhat:
    def test_identical_constant_chains(self):
        assert gelman_split_rhat([np.ones(100), np.ones(100)]) == 1.0

    def test_white_noise_near_one(self):
        rng = np.random.default_rng(2)
        chains = [rng.standard_normal(2000) for _ in range(4)]
        assert 0.99 <= gelman_split_rhat(chains) <= 1.05

    def test_separated_chains_flagged(self):
        rng = np.random.default_rng(3)
        chains = [rng.standard_normal(500), rng.standard_normal(500) + 10.0]
        assert gelman_split_rhat(chains) > 1.1

    def test_trending_single_chain_flagged(self):
        # split halves of a drifting series have different means
        assert gelman_split_rhat([np.linspace(0, 1, 400)]) > 1.1

    def test_short_series_rejected(self):
        with pytest.raises(SpecError):
            gelman_split_rhat([np.ones(3)])
