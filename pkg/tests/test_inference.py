"""Posterior summaries: windows, marginalization, heterogeneity, summaries."""

from functools import lru_cache

import numpy as np
import pytest

from laggard.data import modifier_split_candidates
from laggard.engine import McmcControl, ModelSpec, fit, run_chains
from laggard.errors import SpecError
from laggard.inference import (
    Levels,
    Mean,
    Percentile,
    adj_coexposure,
    combine_fits,
    critical_windows,
    cumulative_effect,
    individualized_effect,
    marginal_effect,
    modifier_pip,
    relative_effect_sizes,
    subgroup_effect,
    summarize,
)
from laggard.simulate import HetRule, ModifierSpec, SimConfig, simulate_dataset, window_curve


@lru_cache(maxsize=None)
def _fit_tdlm(seed=0, **control_kw):
    cfg = SimConfig(
        n=100,
        T=6,
        exposure_names=("e",),
        theta={"e": window_curve(6, 2, 4, 0.1)},
        gamma=(0.5,),
        noise_sd=1.0,
    )
    data, _ = simulate_dataset(cfg, seed=seed)
    kw = dict(n_burn=50, n_iter=100, n_thin=2, seed=seed)
    kw.update(control_kw)
    return fit(ModelSpec(), data, McmcControl(**kw)), data


@lru_cache(maxsize=None)
def _fit_tdlmm(mode="noself", seed=1, names=("a", "b")):
    cfg = SimConfig(
        n=100,
        T=5,
        exposure_names=names,
        theta={names[0]: window_curve(5, 2, 3, 0.1)},
        gamma=(0.5,),
        noise_sd=1.0,
    )
    data, _ = simulate_dataset(cfg, seed=seed)
    spec = ModelSpec(mixture=True, interaction_mode=mode)
    return fit(spec, data, McmcControl(n_burn=50, n_iter=100, n_thin=2, seed=seed)), data


@lru_cache(maxsize=None)
def _fit_hdlm(seed=2):
    cfg = SimConfig(
        n=150,
        T=5,
        exposure_names=("e",),
        theta={"e": window_curve(5, 2, 3, 0.1)},
        gamma=(0.5,),
        noise_sd=1.0,
        modifiers=(
            ModifierSpec("age", "continuous", low=20.0, high=70.0),
            ModifierSpec("sex", "categorical", levels=("F", "M")),
        ),
        het_rule=HetRule(
            modifier="sex",
            exposure="e",
            theta_when=window_curve(5, 2, 3, 0.2),
            theta_else=np.zeros(5),
            level="M",
        ),
    )
    data, _ = simulate_dataset(cfg, seed=seed)
    defs = tuple(modifier_split_candidates(m) for m in data.modifiers)
    spec = ModelSpec(het=True, modifiers=defs)
    return fit(spec, data, McmcControl(n_burn=60, n_iter=120, n_thin=2, seed=seed)), data


class TestCriticalWindows:
    def test_single_run(self):
        lower = np.array([-1.0, 0.1, 0.2, -0.5])
        upper = np.array([1.0, 0.5, 0.9, 0.1])
        assert critical_windows(lower, upper) == [(2, 3)]

    def test_negative_run_and_singleton(self):
        lower = np.array([-2.0, -1.0, -0.1, 0.3])
        upper = np.array([-0.5, -0.2, 0.4, 0.8])
        assert critical_windows(lower, upper) == [(1, 2), (4, 4)]

    def test_no_windows(self):
        assert critical_windows(-np.ones(5), np.ones(5)) == []

    def test_all_lags(self):
        assert critical_windows(np.full(3, 0.1), np.ones(3)) == [(1, 3)]


class TestCumulativeEffect:
    def test_matches_manual_quantiles(self):
        draws = np.arange(200.0).reshape(100, 2)
        mean, lo, hi = cumulative_effect(draws, conf_level=0.9)
        sums = draws.sum(axis=1)
        assert mean == pytest.approx(sums.mean())
        assert lo == pytest.approx(np.quantile(sums, 0.05))
        assert hi == pytest.approx(np.quantile(sums, 0.95))

    def test_interval_nesting(self):
        f, _ = _fit_tdlm()
        _, lo50, hi50 = cumulative_effect(f.theta_draws["e"], conf_level=0.5)
        _, lo95, hi95 = cumulative_effect(f.theta_draws["e"], conf_level=0.95)
        assert lo95 <= lo50 <= hi50 <= hi95


class TestCombineFits:
    def test_concatenates_chains(self):
        cfg = SimConfig(
            n=60, T=4, exposure_names=("e",), theta={"e": np.zeros(4)}, gamma=(0.0,), noise_sd=1.0
        )
        data, _ = simulate_dataset(cfg, seed=3)
        chains = run_chains(
            ModelSpec(), data, McmcControl(n_burn=10, n_iter=20, n_thin=2, seed=1, n_chains=3)
        )
        combined = combine_fits(chains)
        assert combined.n_retained == sum(c.n_retained for c in chains)
        np.testing.assert_array_equal(
            combined.theta_draws["e"], np.concatenate([c.theta_draws["e"] for c in chains])
        )
        assert combined.meta["n_chains_combined"] == 3


class TestMarginalization:
    def test_policies_agree_when_no_interactions(self):
        f, _ = _fit_tdlmm(mode="none")
        by_mean = marginal_effect(f, "a", Mean())
        by_median = marginal_effect(f, "a", Percentile(50))
        np.testing.assert_allclose(by_mean, by_median, atol=1e-12)

    def test_mean_equals_pooled_levels(self):
        f, data = _fit_tdlmm(mode="noself")
        pooled = tuple(float(e.values.mean()) for e in data.exposures)
        np.testing.assert_array_equal(
            marginal_effect(f, "a", Mean()), marginal_effect(f, "a", Levels(pooled))
        )

    def test_co_exposure_levels_shift_marginal_effect(self):
        f, _ = _fit_tdlmm(mode="noself", seed=7)
        low = marginal_effect(f, "a", Percentile(25))
        high = marginal_effect(f, "a", Percentile(75))
        # the cross-interaction surface is contracted against the level of b
        assert not np.allclose(low, high)

    def test_levels_validation(self):
        f, _ = _fit_tdlmm()
        with pytest.raises(SpecError):
            marginal_effect(f, "a", Levels((0.0,)))  # wrong length
        with pytest.raises(SpecError):
            marginal_effect(f, "nope", Mean())
        with pytest.raises(SpecError):
            Percentile(140)

    def test_non_mixture_rejects_marginalization(self):
        f, _ = _fit_tdlm()
        with pytest.raises(SpecError):
            marginal_effect(f, "e", Mean())


class TestHeterogeneous:
    def test_modifier_pip_shape_and_range(self):
        f, _ = _fit_hdlm()
        pips = modifier_pip(f)
        assert set(pips) == {"age", "sex"}
        assert all(0.0 <= v <= 1.0 for v in pips.values())

    def test_individualized_effect_shapes(self):
        f, _ = _fit_hdlm()
        out = individualized_effect(f, {"age": 35.0, "sex": 1})
        rec = out["e"]
        assert rec["mean"].shape == rec["lower"].shape == rec["upper"].shape == (f.n_lags,)
        assert np.all(rec["lower"] <= rec["mean"]) and np.all(rec["mean"] <= rec["upper"])

    def test_individualized_requires_all_modifiers(self):
        f, _ = _fit_hdlm()
        with pytest.raises(SpecError):
            individualized_effect(f, {"age": 35.0})

    def test_subgroup_population_consistency(self):
        """Weighting subgroup means by subgroup size reproduces the mean of
        a single subgroup covering the whole sample."""
        f, _ = _fit_hdlm()
        split = subgroup_effect(f, [{"modifier": "sex", "levels": [0, 1]}])
        full = subgroup_effect(f, [{"modifier": "age", "bins": [-1e9, 1e9]}])
        (full_rec,) = full.values()
        n = full_rec["n_rows"]
        weighted = sum(
            rec["n_rows"] * np.asarray(rec["exposures"]["e"]["mean"]) for rec in split.values()
        ) / n
        assert sum(rec["n_rows"] for rec in split.values()) == n
        np.testing.assert_allclose(weighted, full_rec["exposures"]["e"]["mean"], atol=1e-10)

    def test_subgroup_labels(self):
        f, _ = _fit_hdlm()
        bins = subgroup_effect(f, [{"modifier": "age", "bins": [20.0, 45.0, 70.5]}])
        assert list(bins) == ["age[20,45)", "age[45,70.5)"]
        crossed = subgroup_effect(
            f,
            [{"modifier": "sex", "levels": [0, 1]}, {"modifier": "age", "bins": [20.0, 45.0]}],
        )
        assert list(crossed) == ["sex=0 & age[20,45)", "sex=1 & age[20,45)"]

    def test_subgroup_rejects_three_specs(self):
        f, _ = _fit_hdlm()
        with pytest.raises(SpecError):
            subgroup_effect(f, [{"modifier": "sex"}] * 3)

    def test_het_fit_rejects_marginal_effect(self):
        f, _ = _fit_hdlm()
        with pytest.raises(SpecError):
            marginal_effect(f, "e", Mean())


class TestRelativeEffectSizes:
    def test_max_is_one(self):
        f, _ = _fit_tdlmm()
        sizes = relative_effect_sizes(f)
        assert max(sizes.values()) == pytest.approx(1.0)
        assert set(sizes) == {"a", "b"}


class TestAdjCoexposure:
    def test_contrast_fields_and_ordering(self):
        f, data = _fit_tdlmm(mode="noself", seed=9)
        out = adj_coexposure(data.exposures, f, contrast=(0.25, 0.75))
        assert set(out) == {"a", "b"}
        for rec in out.values():
            assert rec["lower"] <= rec["mean"] <= rec["upper"]
            assert rec["low"] < rec["high"]

    def test_no_interactions_reduces_to_cumulative_contrast(self):
        """With interactions off, the contrast is a linear combination of
        per-exposure cumulative effects at the predicted level shifts."""
        f, data = _fit_tdlmm(mode="none", seed=9)
        out = adj_coexposure(data.exposures, f, contrast=(0.25, 0.75))
        names = f.exposure_names
        cum_means = {n: float(f.theta_draws[n].sum(axis=1).mean()) for n in names}
        for rec in out.values():
            expected = sum(
                cum_means[n] * (rec["predicted_high"][j] - rec["predicted_low"][j])
                for j, n in enumerate(names)
            )
            assert rec["mean"] == pytest.approx(expected, abs=1e-10)

    def test_mismatched_exposure_order_rejected(self):
        f, data = _fit_tdlmm(mode="none", seed=9)
        with pytest.raises(SpecError):
            adj_coexposure(tuple(reversed(data.exposures)), f)


class TestSummarize:
    def test_tdlm_summary_fields(self):
        f, _ = _fit_tdlm()
        s = summarize(f)
        d = s.to_dict()
        assert d["model_info"]["model_class"] == "tdlm"
        assert "e" in d["dlm_tables"]
        assert d["residual_se"] is not None
        text = s.render()
        assert "Model run info:" in text
        assert "Fixed effect coefficients:" in text
        assert "DLM effect: e" in text
        assert "residual standard errors:" in text
        assert "* = CI does not contain zero" in text

    def test_render_is_deterministic(self):
        f, _ = _fit_tdlm()
        assert summarize(f).render() == summarize(f).render()

    def test_het_summary_points_to_explorer(self):
        f, _ = _fit_hdlm()
        s = summarize(f)
        assert s.to_dict()["pips"]
        assert not s.dlm_tables
        assert "serve" in s.render()

    def test_conf_level_appears_in_render(self):
        f, _ = _fit_tdlm()
        assert "confidence level: 0.9" in summarize(f, conf_level=0.9).render()

    def test_bad_conf_level(self):
        f, _ = _fit_tdlm()
        with pytest.raises(SpecError):
            summarize(f, conf_level=1.2)
