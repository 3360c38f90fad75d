"""Posterior summaries: lag-effect tables, critical windows, cumulative
effects, mixture marginalization, co-exposure adjustment, modifier
inclusion probabilities, Bayes-factor exposure selection, and
individualized / subgroup effects for heterogeneous fits.

All functions are pure over immutable PosteriorFit objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import PosteriorFit
from .errors import SpecError
from .trees import ModifierTree, TreePair

PRIOR_PREDICTIVE_SEED = 20260826
PRIOR_PREDICTIVE_REPS = 50000


# ----------------------------------------------------------------------
# marginalization policies


@dataclass(frozen=True)
class Mean:
    """Fix each co-exposure at its empirical mean level."""


@dataclass(frozen=True)
class Percentile:
    """Fix each co-exposure at its per-lag q-th percentile (q in [0, 100]).

    With pooled=True a single pooled percentile is used across lags.
    """

    q: float
    pooled: bool = False

    def __post_init__(self):
        if not 0 <= self.q <= 100:
            raise SpecError("percentile q must be in [0, 100]")


@dataclass(frozen=True)
class Levels:
    """Fix each co-exposure at a supplied constant level (fitted exposure order)."""

    values: tuple[float, ...]


MarginalizePolicy = Mean | Percentile | Levels


def _resolve_levels(fit: PosteriorFit, policy: MarginalizePolicy) -> np.ndarray:
    """(M, T) matrix of co-exposure levels implied by the policy.

    Mean delegates to Levels(empirical means) so the two are identical
    by construction.
    """
    values = fit.meta["exposure_values"]
    M, T = len(values), fit.n_lags
    if isinstance(policy, Mean):
        return _resolve_levels(fit, Levels(tuple(float(np.mean(x)) for x in values)))
    if isinstance(policy, Levels):
        if len(policy.values) != M:
            raise SpecError(f"Levels vector has length {len(policy.values)}; expected {M}")
        return np.tile(np.asarray(policy.values, dtype=np.float64)[:, None], (1, T))
    if policy.pooled:
        return np.tile(
            np.array([[np.percentile(x, policy.q)] for x in values]), (1, T)
        )
    return np.stack([np.percentile(x, policy.q, axis=0) for x in values])


# ----------------------------------------------------------------------
# chain combination


def combine_fits(fits) -> PosteriorFit:
    """Concatenate retained draws of one or more chains into a single fit."""
    if isinstance(fits, PosteriorFit):
        return fits
    fits = list(fits)
    if len(fits) == 1:
        return fits[0]
    first = fits[0]

    def cat(get):
        return np.concatenate([get(f) for f in fits], axis=0)

    tree_records = None
    if first.tree_records is not None:
        tree_records = [rec for f in fits for rec in f.tree_records]
    het_records = None
    if first.het_tree_records is not None:
        het_records = [rec for f in fits for rec in f.het_tree_records]
    logs = {
        key: (
            {k: cat(lambda f, key=key, k=k: f.tree_logs[key][k]) for k in first.tree_logs[key]}
            if isinstance(first.tree_logs[key], dict)
            else cat(lambda f, key=key: f.tree_logs[key])
        )
        for key in first.tree_logs
    }
    meta = dict(first.meta)
    meta["n_chains_combined"] = len(fits)
    return PosteriorFit(
        meta=meta,
        gamma_draws=cat(lambda f: f.gamma_draws),
        sigma2_draws=cat(lambda f: f.sigma2_draws),
        theta_draws={k: cat(lambda f, k=k: f.theta_draws[k]) for k in first.theta_draws},
        interaction_draws={
            k: cat(lambda f, k=k: f.interaction_draws[k]) for k in first.interaction_draws
        },
        exposure_selection_counts=cat(lambda f: f.exposure_selection_counts),
        modifier_usage=cat(lambda f: f.modifier_usage),
        tree_logs=logs,
        tree_records=tree_records,
        het_tree_records=het_records,
    )


# ----------------------------------------------------------------------
# core summaries


def _interval(draws: np.ndarray, conf_level: float, axis=0):
    lo = np.quantile(draws, (1 - conf_level) / 2, axis=axis)
    hi = np.quantile(draws, (1 + conf_level) / 2, axis=axis)
    return draws.mean(axis=axis), lo, hi


def critical_windows(lower, upper) -> list[tuple[int, int]]:
    """Maximal runs of consecutive lags (1-based) whose interval excludes 0."""
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if lower.shape != upper.shape:
        raise SpecError("lower and upper must have equal length")
    flags = (lower > 0) | (upper < 0)
    runs = []
    start = None
    for t, f in enumerate(flags, start=1):
        if f and start is None:
            start = t
        elif not f and start is not None:
            runs.append((start, t - 1))
            start = None
    if start is not None:
        runs.append((start, len(flags)))
    return runs


def cumulative_effect(theta_draws: np.ndarray, conf_level: float = 0.95):
    """Posterior (mean, lower, upper) of the summed lag effect."""
    theta_draws = np.asarray(theta_draws, dtype=np.float64)
    if theta_draws.size == 0:
        raise SpecError("empty draw matrix")
    sums = theta_draws.sum(axis=1)
    mean, lo, hi = _interval(sums, conf_level)
    return float(mean), float(lo), float(hi)


def marginal_effect(fit, exposure, policy: MarginalizePolicy = Mean()) -> np.ndarray:
    """Per-draw marginal lag-effect curves for one exposure of a mixture fit.

    Each curve is the exposure's main effect plus every interaction with a
    co-exposure contracted against that co-exposure's policy level.
    Self-interaction surfaces describe joint variation of a single exposure
    and are not part of the marginal curve.
    """
    fit = combine_fits(fit)
    if not fit.meta["spec"].mixture:
        raise SpecError("marginal_effect requires a mixture fit")
    if fit.meta["spec"].het:
        raise SpecError("co-exposure marginalization is not defined for heterogeneous fits")
    names = fit.exposure_names
    name = names[exposure] if isinstance(exposure, (int, np.integer)) else exposure
    if name not in names:
        raise SpecError(f"unknown exposure {name!r}")
    levels = _resolve_levels(fit, policy)
    out = fit.theta_draws[name].copy()
    for (n1, n2), grids in fit.interaction_draws.items():
        if n1 == n2:
            continue
        if n1 == name:
            out += np.einsum("rtu,u->rt", grids, levels[names.index(n2)])
        elif n2 == name:
            out += np.einsum("rtu,t->ru", grids, levels[names.index(n1)])
    return out


def modifier_pip(fit) -> dict:
    """Posterior probability each modifier appears in at least one split."""
    fit = combine_fits(fit)
    spec = fit.meta["spec"]
    if not spec.het:
        raise SpecError("modifier_pip requires a heterogeneous fit")
    means = fit.modifier_usage.mean(axis=0)
    return {d.name: float(p) for d, p in zip(spec.modifiers, means)}


# ----------------------------------------------------------------------
# exposure selection


def _prior_inclusion_probs(M: int, A: int, kappa: float, noself: bool) -> np.ndarray:
    """Monte Carlo prior-predictive probability that each exposure occupies
    at least one of the 2A slots under the Dirichlet-kappa assignment prior."""
    rng = np.random.Generator(np.random.Philox(PRIOR_PREDICTIVE_SEED))
    reps = PRIOR_PREDICTIVE_REPS
    probs = rng.dirichlet(np.full(M, kappa / M), size=reps)  # (reps, M)
    included = np.zeros((reps, M), dtype=bool)
    for _ in range(A):
        cum = probs.cumsum(axis=1)
        e1 = (rng.random((reps, 1)) < cum / cum[:, -1:]).argmax(axis=1)
        if noself:
            p2 = probs.copy()
            p2[np.arange(reps), e1] = 0.0
            # small kappa can make a draw numerically degenerate on one
            # exposure; renormalize such rows uniformly over the partners
            dead = p2.sum(axis=1) <= 0.0
            if dead.any():
                p2[dead] = 1.0
                p2[np.flatnonzero(dead), e1[dead]] = 0.0
            cum2 = p2.cumsum(axis=1)
            e2 = (rng.random((reps, 1)) < cum2 / cum2[:, -1:]).argmax(axis=1)
        else:
            e2 = (rng.random((reps, 1)) < cum / cum[:, -1:]).argmax(axis=1)
        included[np.arange(reps), e1] = True
        included[np.arange(reps), e2] = True
    return included.mean(axis=0)


def exposure_selection(fit, bf_threshold: float = 0.5) -> dict:
    """Per-exposure Bayes factors for mixture selection.

    The Bayes factor is the posterior odds of the exposure occupying at
    least one tree slot divided by the prior-predictive odds of the same
    event; selected when the factor meets the threshold.
    """
    fit = combine_fits(fit)
    spec = fit.meta["spec"]
    if not spec.mixture:
        raise SpecError("exposure_selection requires a mixture fit")
    names = fit.exposure_names
    M = len(names)
    counts = fit.exposure_selection_counts
    R = counts.shape[0]
    post = (counts >= 1).mean(axis=0)
    prior = _prior_inclusion_probs(M, spec.tree_prior.num_trees, spec.kappa, spec.interaction_mode == "noself")
    eps_post = 1.0 / (2 * R)
    eps_prior = 1.0 / (2 * PRIOR_PREDICTIVE_REPS)
    rel = relative_effect_sizes(fit)
    out = {}
    for m, name in enumerate(names):
        p = min(max(post[m], eps_post), 1 - eps_post)
        q = min(max(prior[m], eps_prior), 1 - eps_prior)
        bf = (p / (1 - p)) / (q / (1 - q))
        out[name] = {
            "bayes_factor": float(bf),
            "selected": bool(bf >= bf_threshold),
            "posterior_inclusion": float(post[m]),
            "prior_inclusion": float(prior[m]),
            "relative_effect": rel[name],
        }
    return out


def relative_effect_sizes(fit) -> dict:
    """Posterior mean of the summed absolute marginal lag effect, scaled so
    the largest exposure reads 1. Artifact-defined; see README."""
    fit = combine_fits(fit)
    spec = fit.meta["spec"]
    names = fit.exposure_names
    raw = {}
    for name in names:
        if spec.mixture and not spec.het:
            draws = marginal_effect(fit, name, Mean())
        else:
            draws = fit.theta_draws[name]
        raw[name] = float(np.abs(draws).sum(axis=1).mean())
    top = max(raw.values()) or 1.0
    return {name: v / top for name, v in raw.items()}


# ----------------------------------------------------------------------
# heterogeneous effects


def _het_structures(fit) -> list:
    """Per retained draw, reconstructed modifier trees (cached on the fit)."""
    cache = fit.meta.get("_het_cache")
    if cache is not None:
        return cache
    if fit.het_tree_records is None:
        raise SpecError("fit does not carry heterogeneous tree draws")
    spec = fit.meta["spec"]
    T = fit.n_lags
    rebuilt = [
        [ModifierTree.from_record(spec.modifiers, T, rec) for rec in draw]
        for draw in fit.het_tree_records
    ]
    fit.meta["_het_cache"] = rebuilt
    return rebuilt


def _leaf_thetas(tree: ModifierTree, n_exposures: int, T: int) -> np.ndarray:
    """(n_leaves, M, T) lag-effect contribution of each leaf payload."""
    leaves = tree.leaves()
    out = np.zeros((len(leaves), n_exposures, T))
    for i, leaf in enumerate(leaves):
        payload = leaf.payload
        if isinstance(payload, TreePair):
            out[i, payload.exposure1] += payload.tree1.theta()
            out[i, payload.exposure2] += payload.tree2.theta()
        else:
            out[i, 0] += payload.theta()
    return out


def individualized_effect(fit, modifier_values: dict, conf_level: float = 0.95) -> dict:
    """Lag-effect curve for a single modifier profile.

    Returns per-exposure (mean, lower, upper) length-T arrays.
    """
    fit = combine_fits(fit)
    spec = fit.meta["spec"]
    if not spec.het:
        raise SpecError("individualized_effect requires a heterogeneous fit")
    for d in spec.modifiers:
        if d.name not in modifier_values:
            raise SpecError(f"missing modifier value for {d.name!r}")
    names = fit.exposure_names
    M, T = len(names), fit.n_lags
    draws_trees = _het_structures(fit)
    R = len(draws_trees)
    curves = np.zeros((R, M, T))
    for r, trees in enumerate(draws_trees):
        for tree in trees:
            idx = tree.assign(modifier_values)
            curves[r] += _leaf_thetas(tree, M, T)[idx]
    out = {}
    for m, name in enumerate(names):
        mean, lo, hi = _interval(curves[:, m, :], conf_level)
        out[name] = {"mean": mean, "lower": lo, "upper": hi}
    return out


def _subgroup_masks(fit, group_by) -> dict:
    """Subgroup label -> boolean row mask, from 1-2 modifier specs."""
    if not 1 <= len(group_by) <= 2:
        raise SpecError("group_by accepts one or two modifier specs")
    columns = fit.meta["modifier_columns"]
    per_spec = []
    for g in group_by:
        name = g["modifier"]
        if name not in columns:
            raise SpecError(f"unknown modifier {name!r}")
        col = columns[name]
        entries = []
        if "bins" in g:
            edges = list(g["bins"])
            if sorted(edges) != edges or len(edges) < 2:
                raise SpecError("bins must be increasing edges")
            for lo, hi in zip(edges[:-1], edges[1:]):
                label = f"{name}[{lo:g},{hi:g})"
                entries.append((label, (col >= lo) & (col < hi)))
        else:
            levels = g.get("levels")
            if levels is None:
                levels = np.unique(col).tolist()
            for lv in levels:
                entries.append((f"{name}={lv:g}", col == lv))
        per_spec.append(entries)
    masks = {}
    if len(per_spec) == 1:
        for label, mask in per_spec[0]:
            masks[label] = mask
    else:
        for l1, m1 in per_spec[0]:
            for l2, m2 in per_spec[1]:
                masks[f"{l1} & {l2}"] = m1 & m2
    return masks


def subgroup_effect(fit, group_by, conf_level: float = 0.95) -> dict:
    """Average individualized effects over the empirical rows of each subgroup.

    Modifiers not named in group_by are marginalized empirically. Returns
    subgroup label -> {exposure -> (mean, lower, upper), n_rows}; empty
    subgroups report n_rows 0 with no curves.
    """
    fit = combine_fits(fit)
    spec = fit.meta["spec"]
    if not spec.het:
        raise SpecError("subgroup_effect requires a heterogeneous fit")
    names = fit.exposure_names
    M, T = len(names), fit.n_lags
    columns = fit.meta["modifier_columns"]
    masks = _subgroup_masks(fit, group_by)
    draws_trees = _het_structures(fit)
    R = len(draws_trees)
    labels = [lb for lb, mk in masks.items() if mk.any()]
    curves = {lb: np.zeros((R, M, T)) for lb in labels}
    for r, trees in enumerate(draws_trees):
        for tree in trees:
            assignments = tree.assign_all(columns)
            thetas = _leaf_thetas(tree, M, T)  # (L, M, T)
            for lb in labels:
                mask = masks[lb]
                occ = np.bincount(assignments[mask], minlength=thetas.shape[0])
                curves[lb][r] += np.tensordot(occ / mask.sum(), thetas, axes=1)
    out = {}
    for lb, mask in masks.items():
        if not mask.any():
            out[lb] = {"n_rows": 0, "exposures": {}}
            continue
        exposures = {}
        for m, name in enumerate(names):
            mean, lo, hi = _interval(curves[lb][:, m, :], conf_level)
            exposures[name] = {"mean": mean, "lower": lo, "upper": hi}
        out[lb] = {"n_rows": int(mask.sum()), "exposures": exposures}
    return out


# ----------------------------------------------------------------------
# co-exposure adjustment


def _smooth_basis(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    cols = [np.ones_like(x), x, x**2, x**3]
    for k in knots:
        cols.append(np.clip(x - k, 0.0, None) ** 3)
    return np.stack(cols, axis=1)


def adj_coexposure(exposures, fit, contrast=(0.25, 0.75), exact_levels=None, conf_level: float = 0.95) -> dict:
    """Effect contrast per target exposure with co-exposures moved to their
    predicted levels at the target's low and high values.

    Co-exposure predictions come from a cubic smooth (10 evenly spaced
    knots) of co-exposure time-averages on target time-averages. The
    contrast is evaluated on the fitted response surface: main effects
    plus interaction surfaces at the implied level vectors.
    """
    fit = combine_fits(fit)
    names = fit.exposure_names
    if [e.name for e in exposures] != list(names):
        raise SpecError("exposure list does not match the fitted exposure order")
    averages = [e.values.mean(axis=1) for e in exposures]  # per-subject time averages
    M = len(names)
    cum = {name: fit.theta_draws[name].sum(axis=1) for name in names}  # (R,)
    grid_sums = {key: g.sum(axis=(1, 2)) for key, g in fit.interaction_draws.items()}
    out = {}
    for m, target in enumerate(names):
        a = averages[m]
        if exact_levels is not None:
            lo_t, hi_t = exact_levels
        else:
            lo_q, hi_q = contrast
            lo_t, hi_t = np.quantile(a, [lo_q, hi_q])
        if not lo_t < hi_t:
            raise SpecError("degenerate contrast: low must be strictly below high")
        lo_levels = np.empty(M)
        hi_levels = np.empty(M)
        lo_levels[m], hi_levels[m] = lo_t, hi_t
        knots = np.linspace(a.min(), a.max(), 12)[1:-1]
        basis = _smooth_basis(a, knots)
        for j in range(M):
            if j == m:
                continue
            coef, *_ = np.linalg.lstsq(basis, averages[j], rcond=None)
            pred = _smooth_basis(np.array([lo_t, hi_t]), knots) @ coef
            lo_levels[j], hi_levels[j] = pred
        delta = np.zeros(fit.n_retained)
        for j, name in enumerate(names):
            delta += cum[name] * (hi_levels[j] - lo_levels[j])
        for (n1, n2), sums in grid_sums.items():
            i1, i2 = names.index(n1), names.index(n2)
            delta += sums * (hi_levels[i1] * hi_levels[i2] - lo_levels[i1] * lo_levels[i2])
        mean, lo, hi = _interval(delta, conf_level)
        out[target] = {
            "mean": float(mean),
            "lower": float(lo),
            "upper": float(hi),
            "low": float(lo_t),
            "high": float(hi_t),
            "predicted_low": lo_levels.tolist(),
            "predicted_high": hi_levels.tolist(),
        }
    return out


# ----------------------------------------------------------------------
# full summary


@dataclass
class FitSummary:
    conf_level: float
    policy: str
    model_info: dict
    fixed_effects: list
    dlm_tables: dict
    critical: dict
    cumulative: dict
    interaction_windows: dict
    pips: dict
    selection: dict
    relative_effect: dict
    residual_se: float | None
    footer: str = ""

    def to_dict(self) -> dict:
        def arr(x):
            return np.asarray(x).tolist()

        return {
            "conf_level": self.conf_level,
            "policy": self.policy,
            "model_info": self.model_info,
            "fixed_effects": self.fixed_effects,
            "dlm_tables": {
                name: {k: arr(v) for k, v in tab.items()} for name, tab in self.dlm_tables.items()
            },
            "critical_windows": {name: [list(r) for r in runs] for name, runs in self.critical.items()},
            "cumulative": self.cumulative,
            "interaction_windows": {
                f"{a}:{b}": {k: arr(v) for k, v in tab.items()}
                for (a, b), tab in self.interaction_windows.items()
            },
            "pips": self.pips,
            "exposure_selection": self.selection,
            "relative_effect": self.relative_effect,
            "residual_se": self.residual_se,
            "footer": self.footer,
        }

    def render(self) -> str:
        return render_summary(self)


def _policy_label(policy: MarginalizePolicy) -> str:
    if isinstance(policy, Mean):
        return "mean"
    if isinstance(policy, Percentile):
        return f"percentile {policy.q:g}" + (" (pooled)" if policy.pooled else "")
    return "levels " + ",".join(f"{v:g}" for v in policy.values)


def summarize(fit, conf_level: float = 0.95, policy: MarginalizePolicy = Mean()) -> FitSummary:
    """Full posterior summary of one fit or a list of chains."""
    fit = combine_fits(fit)
    if not 0 < conf_level < 1:
        raise SpecError("conf_level must be in (0, 1)")
    spec = fit.meta["spec"]
    names = fit.exposure_names
    if isinstance(policy, Levels) and len(policy.values) != len(names):
        raise SpecError(f"Levels vector has length {len(policy.values)}; expected {len(names)}")

    control = fit.meta["control"]
    model_info = {
        "model_class": spec.model_class,
        "family": spec.family,
        "n": fit.meta["n"],
        "n_lags": fit.n_lags,
        "n_trees": spec.tree_prior.num_trees,
        "n_burn": control.n_burn,
        "n_iter": control.n_iter,
        "n_thin": control.n_thin,
        "n_retained": fit.n_retained,
        "n_chains": fit.meta.get("n_chains_combined", 1),
        "interaction_mode": spec.interaction_mode,
        "kappa": spec.kappa if spec.mixture else None,
        "kernel_backend": fit.meta["kernel_backend"],
        "exposure_names": list(names),
    }

    mean, lo, hi = _interval(fit.gamma_draws, conf_level)
    fixed = [
        {
            "name": nm,
            "mean": float(mean[j]),
            "lower": float(lo[j]),
            "upper": float(hi[j]),
            "significant": bool(lo[j] > 0 or hi[j] < 0),
        }
        for j, nm in enumerate(fit.meta["design_names"])
    ]

    dlm_tables = {}
    crit = {}
    cumulative = {}
    footer = ""
    if spec.het:
        footer = (
            "Heterogeneous fit: per-lag exposure effects vary with the modifiers. "
            "Use the explorer UI (laggard serve) for individualized and subgroup estimates."
        )
    else:
        for name in names:
            if spec.mixture:
                draws = marginal_effect(fit, name, policy)
            else:
                draws = fit.theta_draws[name]
            m_, l_, h_ = _interval(draws, conf_level)
            dlm_tables[name] = {
                "mean": m_,
                "lower": l_,
                "upper": h_,
                "critical": (l_ > 0) | (h_ < 0),
            }
            crit[name] = critical_windows(l_, h_)
            cm, cl, ch = cumulative_effect(draws, conf_level)
            cumulative[name] = {"mean": cm, "lower": cl, "upper": ch}

    interaction_windows = {}
    for key, grids in fit.interaction_draws.items():
        gm = grids.mean(axis=0)
        gl = np.quantile(grids, (1 - conf_level) / 2, axis=0)
        gh = np.quantile(grids, (1 + conf_level) / 2, axis=0)
        interaction_windows[key] = {
            "mean": gm,
            "lower": gl,
            "upper": gh,
            "flagged": (gl > 0) | (gh < 0),
        }

    pips = modifier_pip(fit) if spec.het else {}
    selection = exposure_selection(fit) if spec.mixture else {}
    relative = relative_effect_sizes(fit) if not spec.het else {}
    residual_se = float(np.sqrt(fit.sigma2_draws).mean()) if spec.family == "gaussian" else None

    return FitSummary(
        conf_level=conf_level,
        policy=_policy_label(policy),
        model_info=model_info,
        fixed_effects=fixed,
        dlm_tables=dlm_tables,
        critical=crit,
        cumulative=cumulative,
        interaction_windows=interaction_windows,
        pips=pips,
        selection=selection,
        relative_effect=relative,
        residual_se=residual_se,
        footer=footer,
    )


def format_windows(runs) -> str:
    return ",".join(f"{a}-{b}" if a != b else f"{a}" for a, b in runs)


def render_summary(s: FitSummary) -> str:
    lines = []
    info = s.model_info
    lines.append("Model run info:")
    lines.append(f" - model: {info['model_class']} ({info['family']})")
    lines.append(f" - observations: {info['n']}, lags: {info['n_lags']}, trees: {info['n_trees']}")
    lines.append(
        f" - burn-in: {info['n_burn']}, iterations: {info['n_iter']}, thinning: {info['n_thin']}"
    )
    lines.append(f" - chains: {info['n_chains']}, retained draws: {info['n_retained']}")
    if info["kappa"] is not None:
        lines.append(f" - exposure sparsity kappa: {info['kappa']:g}")
    lines.append(f" - confidence level: {s.conf_level:g}")
    if s.dlm_tables and info["model_class"] == "tdlmm":
        lines.append(f" - co-exposure marginalization: {s.policy}")
    lines.append("")
    lines.append("Fixed effect coefficients:")
    lines.append(f"{'':1}{'name':<20}{'mean':>12}{'lower':>12}{'upper':>12}")
    for row in s.fixed_effects:
        star = "*" if row["significant"] else " "
        lines.append(
            f"{star}{row['name']:<20}{row['mean']:>12.4f}{row['lower']:>12.4f}{row['upper']:>12.4f}"
        )
    lines.append("")
    if s.selection:
        lines.append("Exposure selection (Bayes factor >= 0.5):")
        for name, row in s.selection.items():
            star = "*" if row["selected"] else " "
            lines.append(f"{star}{name} ({row['relative_effect']:.2f})")
        lines.append("")
    for name, tab in s.dlm_tables.items():
        lines.append(f"DLM effect: {name}")
        cum = s.cumulative[name]
        lines.append(
            f" cumulative effect: {cum['mean']:.7g} ({cum['lower']:.7g}, {cum['upper']:.7g})"
        )
        runs = s.critical[name]
        lines.append(f" critical windows: {format_windows(runs) if runs else '(none)'}")
        lines.append(f"{'':1}{'lag':<6}{'mean':>12}{'lower':>12}{'upper':>12}")
        for t in range(len(tab["mean"])):
            star = "*" if tab["critical"][t] else " "
            lines.append(
                f"{star}{t + 1:<6}{tab['mean'][t]:>12.4f}{tab['lower'][t]:>12.4f}{tab['upper'][t]:>12.4f}"
            )
        lines.append("")
    if s.pips:
        lines.append("Modifier PIP (posterior inclusion probability):")
        for name, p in s.pips.items():
            lines.append(f" {name:<20}{p:>8.4f}")
        lines.append("")
    lines.append("* = CI does not contain zero")
    if s.residual_se is not None:
        lines.append(f"residual standard errors: {s.residual_se:.4f}")
    if s.footer:
        lines.append(s.footer)
    return "\n".join(lines) + "\n"
