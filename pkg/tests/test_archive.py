"""Archive round trips, byte determinism, and version gating."""

import json
import zipfile

import numpy as np
import pytest

from laggard.archive import FORMAT_VERSION, load_fit, save_fit
from laggard.data import modifier_split_candidates
from laggard.engine import McmcControl, ModelSpec, fit
from laggard.errors import ArchiveError
from laggard.inference import individualized_effect, summarize
from laggard.simulate import HetRule, ModifierSpec, SimConfig, simulate_dataset, window_curve


def _fit_tdlmm(seed=0):
    cfg = SimConfig(
        n=60,
        T=4,
        exposure_names=("a", "b"),
        theta={"a": window_curve(4, 2, 3, 0.1)},
        gamma=(0.5,),
        noise_sd=1.0,
    )
    data, _ = simulate_dataset(cfg, seed=seed)
    spec = ModelSpec(mixture=True, interaction_mode="noself")
    return fit(spec, data, McmcControl(n_burn=20, n_iter=40, n_thin=2, seed=seed))


def _fit_hdlmm(seed=1):
    cfg = SimConfig(
        n=80,
        T=4,
        exposure_names=("a", "b"),
        theta={"a": window_curve(4, 2, 3, 0.1)},
        gamma=(0.5,),
        noise_sd=1.0,
        modifiers=(ModifierSpec("age", "continuous", low=20.0, high=70.0),),
        het_rule=HetRule(
            modifier="age",
            exposure="a",
            theta_when=window_curve(4, 2, 3, 0.2),
            theta_else=np.zeros(4),
            threshold=45.0,
        ),
    )
    data, _ = simulate_dataset(cfg, seed=seed)
    defs = tuple(modifier_split_candidates(m) for m in data.modifiers)
    spec = ModelSpec(het=True, mixture=True, interaction_mode="noself", modifiers=defs)
    return fit(spec, data, McmcControl(n_burn=20, n_iter=40, n_thin=2, seed=seed))


class TestRoundTrip:
    def test_tdlmm_arrays_bit_exact(self, tmp_path):
        f = _fit_tdlmm()
        path = tmp_path / "fit.laggard"
        save_fit(f, path)
        g = load_fit(path)
        np.testing.assert_array_equal(f.gamma_draws, g.gamma_draws)
        np.testing.assert_array_equal(f.sigma2_draws, g.sigma2_draws)
        for name in f.exposure_names:
            np.testing.assert_array_equal(f.theta_draws[name], g.theta_draws[name])
        for key in f.interaction_draws:
            np.testing.assert_array_equal(f.interaction_draws[key], g.interaction_draws[key])
        np.testing.assert_array_equal(
            f.exposure_selection_counts, g.exposure_selection_counts
        )
        assert g.meta["spec"] == f.meta["spec"]
        assert summarize(f).render() == summarize(g).render()

    def test_het_round_trip_reproduces_individual_estimates(self, tmp_path):
        f = _fit_hdlmm()
        path = tmp_path / "fit.laggard"
        save_fit(f, path)
        g = load_fit(path)
        a = individualized_effect(f, {"age": 30.0})
        b = individualized_effect(g, {"age": 30.0})
        for name in a:
            np.testing.assert_array_equal(a[name]["mean"], b[name]["mean"])
            np.testing.assert_array_equal(a[name]["lower"], b[name]["lower"])


class TestDeterminism:
    def test_rewrites_are_byte_identical(self, tmp_path):
        f = _fit_tdlmm()
        p1, p2 = tmp_path / "a.laggard", tmp_path / "b.laggard"
        save_fit(f, p1)
        save_fit(f, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_save_load_save_is_byte_identical(self, tmp_path):
        f = _fit_hdlmm()
        p1, p2 = tmp_path / "a.laggard", tmp_path / "b.laggard"
        save_fit(f, p1)
        save_fit(load_fit(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestManifest:
    def test_required_fields(self, tmp_path):
        f = _fit_tdlmm()
        path = tmp_path / "fit.laggard"
        save_fit(f, path)
        with zipfile.ZipFile(path) as z:
            manifest = json.loads(z.read("manifest.json"))
        assert manifest["format_version"] == FORMAT_VERSION
        assert manifest["exposure_names"] == ["a", "b"]
        assert manifest["spec"]["mixture"] is True
        assert len(manifest["data_sha256"]) == 64
        assert manifest["n_lags"] == f.n_lags
        assert manifest["control"]["n_iter"] == 40

    def test_fixed_timestamps(self, tmp_path):
        f = _fit_tdlmm()
        path = tmp_path / "fit.laggard"
        save_fit(f, path)
        with zipfile.ZipFile(path) as z:
            assert all(i.date_time == (1980, 1, 1, 0, 0, 0) for i in z.infolist())


class TestVersionGate:
    def test_unknown_major_version_rejected(self, tmp_path):
        f = _fit_tdlmm()
        path = tmp_path / "fit.laggard"
        save_fit(f, path)
        with zipfile.ZipFile(path) as z:
            names = z.namelist()
            blobs = {n: z.read(n) for n in names}
        manifest = json.loads(blobs["manifest.json"])
        manifest["format_version"] = "99.0"
        blobs["manifest.json"] = json.dumps(manifest).encode()
        bad = tmp_path / "bad.laggard"
        with zipfile.ZipFile(bad, "w") as z:
            for n in names:
                z.writestr(n, blobs[n])
        with pytest.raises(ArchiveError):
            load_fit(bad)

    def test_minor_version_bump_accepted(self, tmp_path):
        f = _fit_tdlmm()
        path = tmp_path / "fit.laggard"
        save_fit(f, path)
        with zipfile.ZipFile(path) as z:
            names = z.namelist()
            blobs = {n: z.read(n) for n in names}
        manifest = json.loads(blobs["manifest.json"])
        manifest["format_version"] = manifest["format_version"].split(".")[0] + ".7"
        blobs["manifest.json"] = json.dumps(manifest).encode()
        ok = tmp_path / "ok.laggard"
        with zipfile.ZipFile(ok, "w") as z:
            for n in names:
                z.writestr(n, blobs[n])
        g = load_fit(ok)
        np.testing.assert_array_equal(f.gamma_draws, g.gamma_draws)

    def test_not_an_archive(self, tmp_path):
        path = tmp_path / "junk.laggard"
        path.write_bytes(b"not a zip")
        with pytest.raises(ArchiveError):
            load_fit(path)
