"""Convergence and mixing diagnostics for treed distributed-lag fits.

The report is pure, deterministic, and read-only over a PosteriorFit: trace
series for selected quantities, per-move-kind acceptance rates, mean tree
sizes, and binned posterior densities. No automatic verdicts are issued.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import PosteriorFit
from .errors import SpecError

MIN_DENSITY_BINS = 20


@dataclass
class DiagnosticsReport:
    traces: dict  # name -> (R,) series
    acceptance: dict  # kind -> {"overall": float, "rolling": (R,) rates}
    tree_sizes: np.ndarray  # (R,) mean terminal counts
    densities: dict  # name -> {"edges": (B+1,), "density": (B,)}

    def to_dict(self) -> dict:
        return {
            "traces": {k: v.tolist() for k, v in self.traces.items()},
            "acceptance": {
                k: {"overall": v["overall"], "rolling": v["rolling"].tolist()}
                for k, v in self.acceptance.items()
            },
            "tree_sizes": self.tree_sizes.tolist(),
            "densities": {
                k: {"edges": v["edges"].tolist(), "density": v["density"].tolist()}
                for k, v in self.densities.items()
            },
        }


def default_trace_lags(T: int) -> list[int]:
    """Lags at the quartiles of [1, T], deduplicated."""
    picks = sorted({max(1, round(q * T)) for q in (0.25, 0.5, 0.75)})
    return picks


def density_bins(series: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Freedman-Diaconis binned density with a floor of MIN_DENSITY_BINS bins."""
    series = np.asarray(series, dtype=np.float64)
    lo, hi = float(series.min()), float(series.max())
    if hi == lo:
        edges = np.array([lo - 0.5, lo + 0.5])
        return edges, np.array([1.0])
    q25, q75 = np.quantile(series, [0.25, 0.75])
    width = 2.0 * (q75 - q25) / series.size ** (1.0 / 3.0)
    n_bins = MIN_DENSITY_BINS if width <= 0 else max(MIN_DENSITY_BINS, math.ceil((hi - lo) / width))
    density, edges = np.histogram(series, bins=n_bins, density=True)
    return edges, density


def diagnose(fit: PosteriorFit, lags=None, params=None) -> DiagnosticsReport:
    """Build a diagnostics report.

    ``lags`` picks per-exposure lag traces (default: quartiles of T);
    ``params`` restricts extra series (default: sigma2 for Gaussian fits,
    cumulative effect per exposure, fixed-effect components).
    """
    if fit.tree_logs is None or "proposed" not in fit.tree_logs:
        raise SpecError("fit does not retain tree logs")
    T = fit.n_lags
    lags = list(lags) if lags else default_trace_lags(T)
    for t in lags:
        if not 1 <= t <= T:
            raise SpecError(f"trace lag {t} outside [1, {T}]")
    if params is None:
        params = ["sigma2", "cumulative", "gamma"]

    traces: dict[str, np.ndarray] = {}
    for name, draws in fit.theta_draws.items():
        for t in lags:
            traces[f"theta[{name}][{t}]"] = draws[:, t - 1].copy()
    if "cumulative" in params:
        for name, draws in fit.theta_draws.items():
            traces[f"cumulative[{name}]"] = draws.sum(axis=1)
    if "sigma2" in params and fit.meta["family"] == "gaussian":
        traces["sigma2"] = fit.sigma2_draws.copy()
    if "gamma" in params:
        for j, nm in enumerate(fit.meta["design_names"]):
            traces[f"gamma[{nm}]"] = fit.gamma_draws[:, j].copy()

    acceptance = {}
    for kind, proposed in fit.tree_logs["proposed"].items():
        total = proposed.sum()
        if total == 0:
            continue
        accepted = fit.tree_logs["accepted"][kind]
        rolling = np.divide(
            accepted, proposed, out=np.zeros_like(accepted, dtype=np.float64), where=proposed > 0
        )
        acceptance[kind] = {
            "overall": float(accepted.sum() / total),
            "rolling": rolling,
        }

    densities = {name: dict(zip(("edges", "density"), density_bins(s))) for name, s in traces.items()}

    return DiagnosticsReport(
        traces=traces,
        acceptance=acceptance,
        tree_sizes=fit.tree_logs["tree_sizes"].copy(),
        densities=densities,
    )


def gelman_split_rhat(series_list) -> float:
    """Split-chain potential scale reduction factor.

    Each series is halved into two sub-chains; zero total variance is
    defined as 1.0 (flagged constant chains, not divergence).
    """
    chains = []
    for s in series_list:
        s = np.asarray(s, dtype=np.float64)
        if s.size < 4:
            raise SpecError("each series needs length >= 4")
        half = s.size // 2
        chains.append(s[:half])
        chains.append(s[half : 2 * half])
    n = min(c.size for c in chains)
    chains = np.stack([c[:n] for c in chains])
    means = chains.mean(axis=1)
    variances = chains.var(axis=1, ddof=1)
    W = variances.mean()
    B = n * means.var(ddof=1)
    if W <= 0:
        return 1.0
    var_hat = (n - 1) / n * W + B / n
    return float(math.sqrt(var_hat / W))
