"""Synthetic dataset generator with a recorded ground truth.

Used throughout the test suite in place of an external fixture: the
truth record stores the exact lag-effect curves, interaction grids, and
subgroup rule injected into the outcome.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, ExposureMatrix, ModifierColumn
from .errors import DataError


@dataclass(frozen=True)
class ModifierSpec:
    """Declarative description of one generated modifier column."""

    name: str
    kind: str = "categorical"
    levels: tuple[str, ...] = ("A", "B")
    low: float = 0.0
    high: float = 1.0


@dataclass(frozen=True)
class HetRule:
    """Subgroup rule: the exposure's lag curve depends on one modifier.

    Rows where the modifier matches ``level`` (categorical) or is
    <= ``threshold`` (continuous) get ``theta_when``; others get
    ``theta_else``.
    """

    modifier: str
    exposure: str
    theta_when: np.ndarray
    theta_else: np.ndarray
    level: str | None = None
    threshold: float | None = None


@dataclass(frozen=True)
class SimConfig:
    n: int
    T: int
    exposure_names: tuple[str, ...] = ("X1",)
    theta: dict = field(default_factory=dict)  # exposure name -> length-T curve
    interactions: dict = field(default_factory=dict)  # (name1, name2) -> T x T grid
    gamma: tuple[float, ...] = (0.0,)  # intercept first, then covariates
    n_covariates: int = 0
    noise_sd: float = 1.0
    family: str = "gaussian"
    rho_lag: float = 0.7
    rho_exposure: float = 0.0
    modifiers: tuple[ModifierSpec, ...] = ()
    het_rule: HetRule | None = None


@dataclass(frozen=True)
class SimTruth:
    """Exactly what was injected into the simulated outcome."""

    theta: dict  # exposure name -> length-T array (population-level curve)
    interactions: dict
    gamma: np.ndarray
    noise_sd: float
    family: str
    het_rule: HetRule | None = None


def window_curve(T: int, lo: int, hi: int, value: float) -> np.ndarray:
    """Length-T curve equal to ``value`` on lags [lo, hi] and zero elsewhere."""
    theta = np.zeros(T)
    theta[lo - 1 : hi] = value
    return theta


def _ar1(rng: np.random.Generator, n: int, T: int, rho: float) -> np.ndarray:
    z = rng.standard_normal((n, T))
    out = np.empty((n, T))
    out[:, 0] = z[:, 0]
    scale = np.sqrt(1.0 - rho * rho)
    for t in range(1, T):
        out[:, t] = rho * out[:, t - 1] + scale * z[:, t]
    return out


def simulate_dataset(config: SimConfig, seed: int) -> tuple[Dataset, SimTruth]:
    """Generate a reproducible Dataset plus the truth record behind it."""
    n, T = config.n, config.T
    if n < 1 or T < 2:
        raise DataError("need n >= 1 and T >= 2")
    if len(config.gamma) != 1 + config.n_covariates:
        raise DataError(
            f"gamma has {len(config.gamma)} entries, expected {1 + config.n_covariates} "
            "(intercept plus covariates)"
        )
    for name, curve in config.theta.items():
        if name not in config.exposure_names:
            raise DataError(f"theta given for unknown exposure {name!r}")
        if len(curve) != T:
            raise DataError(f"theta for {name!r} has length {len(curve)}, expected {T}")
    for (m1, m2), grid in config.interactions.items():
        if m1 not in config.exposure_names or m2 not in config.exposure_names:
            raise DataError(f"interaction given for unknown pair {(m1, m2)!r}")
        if np.shape(grid) != (T, T):
            raise DataError(f"interaction grid for {(m1, m2)!r} must be {T} x {T}")
    if config.het_rule is not None:
        rule = config.het_rule
        if rule.exposure not in config.exposure_names:
            raise DataError(f"het rule names unknown exposure {rule.exposure!r}")
        if rule.modifier not in {m.name for m in config.modifiers}:
            raise DataError(f"het rule names unknown modifier {rule.modifier!r}")
        if len(rule.theta_when) != T or len(rule.theta_else) != T:
            raise DataError("het rule curves must have length T")

    rng = np.random.Generator(np.random.Philox(seed))

    # fixed effects
    Z = np.ones((n, 1))
    names = ["(Intercept)"]
    if config.n_covariates:
        Z = np.column_stack([Z, rng.standard_normal((n, config.n_covariates))])
        names += [f"z{j + 1}" for j in range(config.n_covariates)]
    gamma = np.asarray(config.gamma, dtype=np.float64)

    # exposures: lag-1 autocorrelated, optionally sharing a common factor
    common = _ar1(rng, n, T, config.rho_lag)
    exposures = []
    for name in config.exposure_names:
        own = _ar1(rng, n, T, config.rho_lag)
        x = np.sqrt(config.rho_exposure) * common + np.sqrt(1 - config.rho_exposure) * own
        exposures.append(ExposureMatrix(name, x))

    # modifiers
    mod_cols = []
    for spec in config.modifiers:
        if spec.kind == "categorical":
            codes = rng.integers(0, len(spec.levels), size=n)
            mod_cols.append(ModifierColumn(spec.name, "categorical", codes, tuple(spec.levels)))
        else:
            vals = rng.uniform(spec.low, spec.high, size=n)
            mod_cols.append(ModifierColumn(spec.name, "continuous", vals))

    # linear predictor
    lin = Z @ gamma
    theta_truth = {}
    for e in exposures:
        curve = np.asarray(config.theta.get(e.name, np.zeros(T)), dtype=np.float64)
        theta_truth[e.name] = curve
        if config.het_rule is not None and config.het_rule.exposure == e.name:
            continue
        lin = lin + e.values @ curve
    if config.het_rule is not None:
        rule = config.het_rule
        col = next(m for m in mod_cols if m.name == rule.modifier)
        if col.kind == "categorical":
            mask = col.values == col.levels.index(rule.level)
        else:
            mask = col.values <= rule.threshold
        x = next(e for e in exposures if e.name == rule.exposure).values
        when = np.asarray(rule.theta_when, dtype=np.float64)
        els = np.asarray(rule.theta_else, dtype=np.float64)
        lin = lin + np.where(mask, x @ when, x @ els)
        theta_truth[rule.exposure] = np.mean(mask) * when + np.mean(~mask) * els
    interactions = {}
    name_to_x = {e.name: e.values for e in exposures}
    for (m1, m2), grid in config.interactions.items():
        grid = np.asarray(grid, dtype=np.float64)
        interactions[(m1, m2)] = grid
        lin = lin + np.einsum("it,tu,iu->i", name_to_x[m1], grid, name_to_x[m2])

    if config.family == "gaussian":
        y = lin + config.noise_sd * rng.standard_normal(n)
    elif config.family == "logit":
        p = 1.0 / (1.0 + np.exp(-lin))
        y = (rng.random(n) < p).astype(np.float64)
    else:
        raise DataError(f"unsupported family {config.family!r}")

    data = Dataset(
        outcome=y,
        design=Z,
        design_names=tuple(names),
        exposures=tuple(exposures),
        modifiers=tuple(mod_cols),
    )
    truth = SimTruth(
        theta=theta_truth,
        interactions=interactions,
        gamma=gamma,
        noise_sd=config.noise_sd,
        family=config.family,
        het_rule=config.het_rule,
    )
    return data, truth


def sim_config_from_file(path) -> SimConfig:
    """Read a generator config from a JSON key-value file.

    Curves may be given as explicit arrays or as
    ``{"window": [lo, hi], "value": v}`` shorthand.
    """
    with open(path) as fh:
        raw = json.load(fh)
    T = int(raw["T"])

    def curve(spec):
        if isinstance(spec, dict):
            lo, hi = spec["window"]
            return window_curve(T, int(lo), int(hi), float(spec["value"]))
        return np.asarray(spec, dtype=np.float64)

    theta = {name: curve(spec) for name, spec in raw.get("theta", {}).items()}
    modifiers = tuple(
        ModifierSpec(
            name=m["name"],
            kind=m.get("kind", "categorical"),
            levels=tuple(m.get("levels", ["A", "B"])),
            low=float(m.get("low", 0.0)),
            high=float(m.get("high", 1.0)),
        )
        for m in raw.get("modifiers", [])
    )
    het_rule = None
    if "het_rule" in raw:
        h = raw["het_rule"]
        het_rule = HetRule(
            modifier=h["modifier"],
            exposure=h["exposure"],
            theta_when=curve(h["theta_when"]),
            theta_else=curve(h["theta_else"]),
            level=h.get("level"),
            threshold=h.get("threshold"),
        )
    return SimConfig(
        n=int(raw["n"]),
        T=T,
        exposure_names=tuple(raw.get("exposures", ["X1"])),
        theta=theta,
        interactions={},
        gamma=tuple(raw.get("gamma", [0.0] * (1 + int(raw.get("covariates", 0))))),
        n_covariates=int(raw.get("covariates", 0)),
        noise_sd=float(raw.get("noise_sd", 1.0)),
        family=raw.get("family", "gaussian"),
        rho_lag=float(raw.get("rho_lag", 0.7)),
        rho_exposure=float(raw.get("rho_exposure", 0.0)),
        modifiers=modifiers,
        het_rule=het_rule,
    )
