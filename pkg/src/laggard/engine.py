"""MCMC fitting for all model classes: tdlm, tdlmm, hdlm, hdlmm.

Each iteration sweeps: structure moves by Metropolis-Hastings with
terminal effects integrated out analytically, conjugate effect draws,
conjugate fixed-effect and variance draws, a slice-sampled global
shrinkage scale, Pólya-Gamma latents for logistic outcomes, and
Dirichlet-weighted exposure reassignment for mixtures. Deterministic
given the seed (per-chain counter-based RNG streams).
"""

from __future__ import annotations

import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from . import kernels
from .data import Dataset, ModifierDef
from .errors import LaggardError, SpecError, UnsupportedModelError
from .polya_gamma import pg_ones
from .trees import (
    DlmTree,
    ModifierTree,
    ModNode,
    Proposal,
    TreePair,
    TreePriorParams,
    draw_dlm_topology,
    propose_modifier_move,
    propose_move,
)

FAMILIES = ("gaussian", "logit")
INTERACTION_MODES = ("none", "noself", "all")

SIGMA_PRIOR_SHAPE = 0.001
SIGMA_PRIOR_RATE = 0.001


@dataclass(frozen=True)
class ShrinkageConfig:
    """Global effect-shrinkage scale: delta, omega ~ N(0, tau^2) with a
    half-Cauchy prior on tau, slice sampled."""

    halfcauchy_scale: float = 1.0
    init_tau: float = 0.1


@dataclass(frozen=True)
class ModelSpec:
    family: str = "gaussian"
    dlm_type: str = "linear"
    mixture: bool = False
    het: bool = False
    interaction_mode: str = "none"
    tree_prior: TreePriorParams = field(default_factory=TreePriorParams)
    shrinkage: ShrinkageConfig = field(default_factory=ShrinkageConfig)
    kappa: float = 1.0
    modifier_sparsity: float = 0.5
    modifiers: tuple[ModifierDef, ...] = ()

    def __post_init__(self):
        if self.family == "zinb":
            raise UnsupportedModelError("family 'zinb' is not supported")
        if self.family not in FAMILIES:
            raise SpecError(f"unknown family {self.family!r}; supported: {FAMILIES}")
        if self.dlm_type != "linear":
            raise UnsupportedModelError(f"dlm_type {self.dlm_type!r} is not supported")
        if self.interaction_mode not in INTERACTION_MODES:
            raise SpecError(f"unknown interaction mode {self.interaction_mode!r}")
        if self.interaction_mode != "none" and not self.mixture:
            raise SpecError("interaction_mode requires mixture=True")
        if self.het and not self.modifiers:
            raise SpecError("het=True requires modifier definitions")
        if not 0 < self.modifier_sparsity <= 1:
            raise SpecError("modifier_sparsity must be in (0, 1]")
        if self.kappa <= 0:
            raise SpecError("kappa must be > 0")

    @property
    def model_class(self) -> str:
        if self.het:
            return "hdlmm" if self.mixture else "hdlm"
        return "tdlmm" if self.mixture else "tdlm"


@dataclass(frozen=True)
class McmcControl:
    n_burn: int = 2500
    n_iter: int = 10000
    n_thin: int = 5
    seed: int = 0
    n_chains: int = 1
    store_trees: bool = False
    debug_checks: bool = False
    progress: bool = False

    def __post_init__(self):
        if min(self.n_burn, 0) < 0 or self.n_iter < 1 or self.n_thin < 1 or self.n_chains < 1:
            raise SpecError("invalid MCMC control values")

    @property
    def n_retained(self) -> int:
        return self.n_iter // self.n_thin


@dataclass(frozen=True)
class Hooks:
    """Test-only levers; all default off."""

    freeze_trees: bool = False
    freeze_effects: bool = False
    force_accept: bool = False
    fix_sigma2: float | None = None
    fix_tau2: float | None = None
    fix_gamma: np.ndarray | None = None


@dataclass
class PosteriorFit:
    """Retained posterior draws plus structural logs."""

    meta: dict
    gamma_draws: np.ndarray  # (R, p)
    sigma2_draws: np.ndarray  # (R,)
    theta_draws: dict  # exposure name -> (R, T)
    interaction_draws: dict  # (name1, name2) -> (R, T, T); mixture only
    exposure_selection_counts: np.ndarray  # (R, M)
    modifier_usage: np.ndarray  # (R, n_modifiers)
    tree_logs: dict  # accepted/proposed per kind, tree sizes, per retained draw
    tree_records: list | None = None  # per retained draw, per structure
    het_tree_records: list | None = None

    @property
    def n_retained(self) -> int:
        return self.gamma_draws.shape[0]

    @property
    def exposure_names(self) -> tuple[str, ...]:
        return tuple(self.meta["exposure_names"])

    @property
    def n_lags(self) -> int:
        return int(self.meta["n_lags"])


def node_effect_posterior(residual, segment_covariate, sigma2: float, tau2: float):
    """Gaussian posterior (mean, variance) of one terminal effect."""
    u = np.asarray(segment_covariate, dtype=np.float64)
    r = np.asarray(residual, dtype=np.float64)
    v = 1.0 / (u @ u / sigma2 + 1.0 / tau2)
    return v * (u @ r) / sigma2, v


def sample_exposure_index(log_mls, selection_probs, rng, exclude=None) -> int:
    """Draw a slot's exposure from its full conditional.

    log_mls[m] is the marginal likelihood of the slot's tree under
    exposure m; selection_probs is the current Dirichlet simplex.
    """
    logw = np.asarray(log_mls, dtype=np.float64) + np.log(selection_probs)
    if exclude is not None:
        logw = logw.copy()
        logw[exclude] = -np.inf
    logw -= logw.max()
    w = np.exp(logw)
    w /= w.sum()
    return int(rng.choice(len(w), p=w))


def _log_marginal(U, w, r, tau2):
    """Log marginal likelihood (up to tree-independent terms) with the
    coefficient vector integrated out under N(0, tau2 I), plus the
    factorization needed to draw the coefficients."""
    A, b = kernels.gram_moment(U, w, r)
    P = A + np.eye(A.shape[0]) / tau2
    L = cho_factor(P, lower=True)
    mu = cho_solve(L, b)
    logdet = 2.0 * np.sum(np.log(np.diag(L[0])))
    logml = -0.5 * (A.shape[0] * math.log(tau2) + logdet) + 0.5 * (b @ mu)
    return logml, (L[0], mu)


def _draw_effects(fac, rng):
    L, mu = fac
    z = rng.standard_normal(mu.shape[0])
    return mu + solve_triangular(L.T, z, lower=False)


class _Structure:
    """One ensemble member: a DLM tree, a tree pair, or a modifier tree."""

    __slots__ = ("kind", "tree", "pair", "mod_tree", "fitted")

    def __init__(self, kind, tree=None, pair=None, mod_tree=None, n=0):
        self.kind = kind  # "dlm" | "pair" | "modifier"
        self.tree = tree
        self.pair = pair
        self.mod_tree = mod_tree
        self.fitted = np.zeros(n)


class _Chain:
    def __init__(self, spec: ModelSpec, data: Dataset, control: McmcControl, hooks: Hooks, seed: int):
        self.spec = spec
        self.data = data
        self.control = control
        self.hooks = hooks
        self.rng = np.random.Generator(np.random.Philox(seed))
        self.n = data.n
        self.T = data.n_lags
        self.M = len(data.exposures)
        self.A = spec.tree_prior.num_trees
        self.prior = spec.tree_prior

        if spec.mixture and self.M < 2:
            raise SpecError("mixture=True requires at least two exposures")
        if spec.family == "logit" and not set(np.unique(data.outcome)) <= {0.0, 1.0}:
            raise SpecError("logit family requires outcome values in {0, 1}")

        # cumulative-sum representations for interval-sum designs
        self.cumsums = []
        for e in data.exposures:
            cs = np.zeros((self.n, self.T + 1))
            np.cumsum(e.values, axis=1, out=cs[:, 1:])
            self.cumsums.append(np.ascontiguousarray(cs))

        self.Z = data.design
        self.p = self.Z.shape[1]

        if spec.het:
            self.mod_columns = {}
            for d in spec.modifiers:
                self.mod_columns[d.name] = data.modifier(d.name).values

        # state
        self.gamma = np.zeros(self.p)
        if hooks.fix_gamma is not None:
            self.gamma = np.asarray(hooks.fix_gamma, dtype=np.float64).copy()
        self.sigma2 = hooks.fix_sigma2 if hooks.fix_sigma2 is not None else float(np.var(data.outcome)) or 1.0
        self.tau2 = hooks.fix_tau2 if hooks.fix_tau2 is not None else spec.shrinkage.init_tau**2
        self.selection_probs = np.full(self.M, 1.0 / self.M)
        K = len(spec.modifiers)
        self.modifier_probs = np.full(K, 1.0 / K) if K else None
        self.pg_latents = None

        self.structures = [self._init_structure(a) for a in range(self.A)]

        if spec.family == "gaussian":
            self.y_work = data.outcome
            self.weights = np.full(self.n, 1.0 / self.sigma2)
        else:
            self.y_work = np.zeros(self.n)
            self.weights = np.full(self.n, 0.25)
        self.residual = self.y_work - self.Z @ self.gamma

        # acceptance bookkeeping (reset per retained window)
        self.counts = {k: [0, 0] for k in ("dlm", "pair", "modifier")}  # accepted, proposed

    # ------------------------------------------------------------------
    # initialization

    def _init_structure(self, a: int) -> _Structure:
        spec = self.spec
        if spec.het:
            leaf = ModNode()
            leaf.payload = self._fresh_payload(a)
            tree = ModifierTree(spec.modifiers, leaf)
            return _Structure("modifier", mod_tree=tree, n=self.n)
        if spec.mixture:
            return _Structure("pair", pair=self._fresh_pair(a), n=self.n)
        return _Structure("dlm", tree=DlmTree(self.T), n=self.n)

    def _fresh_pair(self, a: int) -> TreePair:
        e1 = a % self.M
        e2 = (a + 1) % self.M
        return TreePair(self.T, e1, e2, interacting=self.spec.interaction_mode != "none")

    def _fresh_payload(self, a: int):
        if self.spec.mixture:
            return self._fresh_pair(a)
        return DlmTree(self.T)

    # ------------------------------------------------------------------
    # designs and marginal likelihoods

    def _dlm_design(self, tree: DlmTree, exposure: int, rows=None) -> np.ndarray:
        lo, hi = tree.bounds()
        U = kernels.interval_sums(self.cumsums[exposure], lo, hi)
        return U if rows is None else U[rows]

    def _pair_design(self, pair: TreePair, rows=None, U1=None, U2=None) -> np.ndarray:
        if U1 is None:
            U1 = self._dlm_design(pair.tree1, pair.exposure1, rows)
        if U2 is None:
            U2 = self._dlm_design(pair.tree2, pair.exposure2, rows)
        if not pair.interacting:
            return np.concatenate([U1, U2], axis=1)
        W = (U1[:, :, None] * U2[:, None, :]).reshape(U1.shape[0], -1)
        return np.concatenate([U1, U2, W], axis=1)

    def _structure_design_blocks(self, structure: _Structure):
        """List of (rows, design) blocks; modifier trees give one block per leaf."""
        if structure.kind == "dlm":
            return [(None, self._dlm_design(structure.tree, 0))]
        if structure.kind == "pair":
            return [(None, self._pair_design(structure.pair))]
        assignments = structure.mod_tree.assign_all(self.mod_columns)
        blocks = []
        for leaf_idx, leaf in enumerate(structure.mod_tree.leaves()):
            rows = np.flatnonzero(assignments == leaf_idx)
            payload = leaf.payload
            if isinstance(payload, TreePair):
                blocks.append((rows, self._pair_design(payload, rows)))
            else:
                blocks.append((rows, self._dlm_design(payload, 0, rows)))
        return blocks

    def _structure_logml(self, structure: _Structure, r: np.ndarray):
        """Total log marginal likelihood of a structure plus per-block factors."""
        total = 0.0
        facs = []
        empty = False
        for rows, U in self._structure_design_blocks(structure):
            rr = r if rows is None else r[rows]
            ww = self.weights if rows is None else self.weights[rows]
            if rows is not None and rows.size == 0:
                # zero-data block: marginal factor is 1, coefficients come
                # from the prior at draw time
                empty = True
                facs.append(None)
                continue
            logml, fac = _log_marginal(U, ww, rr, self.tau2)
            total += logml
            facs.append(fac)
        return total, facs, empty

    # ------------------------------------------------------------------
    # effect draws and fitted values

    def _set_structure_effects(self, structure: _Structure, facs):
        rng = self.rng
        blocks = self._structure_design_blocks(structure)
        fitted = np.zeros(self.n)
        for (rows, U), fac in zip(blocks, facs, strict=True):
            k = U.shape[1]
            if fac is None:
                eff = math.sqrt(self.tau2) * rng.standard_normal(k)
            else:
                eff = _draw_effects(fac, rng)
            self._assign_effects(structure, rows, eff)
            contrib = U @ eff
            if rows is None:
                fitted += contrib
            else:
                fitted[rows] += contrib
        structure.fitted = fitted

    def _assign_effects(self, structure: _Structure, rows, eff):
        if structure.kind == "dlm":
            structure.tree.set_effects(eff)
            return
        if structure.kind == "pair":
            self._set_pair_effects(structure.pair, eff)
            return
        # modifier structure: match the leaf owning these rows
        assignments = structure.mod_tree.assign_all(self.mod_columns)
        for leaf_idx, leaf in enumerate(structure.mod_tree.leaves()):
            leaf_rows = np.flatnonzero(assignments == leaf_idx)
            if rows is not None and leaf_rows.size == rows.size and np.array_equal(leaf_rows, rows):
                payload = leaf.payload
                if isinstance(payload, TreePair):
                    self._set_pair_effects(payload, eff)
                else:
                    payload.set_effects(eff)
                return
        raise AssertionError("no leaf matched the effect block")

    @staticmethod
    def _set_pair_effects(pair: TreePair, eff):
        c1 = pair.tree1.n_terminals
        c2 = pair.tree2.n_terminals
        pair.tree1.set_effects(eff[:c1])
        pair.tree2.set_effects(eff[c1 : c1 + c2])
        if pair.interacting:
            pair.omega = np.asarray(eff[c1 + c2 :], dtype=np.float64).reshape(c1, c2)
        else:
            pair.omega = np.zeros((c1, c2))

    def _collect_effects(self):
        out = []
        for s in self.structures:
            if s.kind == "dlm":
                out.append(s.tree.effects())
            elif s.kind == "pair":
                out.append(s.pair.tree1.effects())
                out.append(s.pair.tree2.effects())
                if s.pair.interacting:
                    out.append(s.pair.omega.ravel())
            else:
                for leaf in s.mod_tree.leaves():
                    payload = leaf.payload
                    if isinstance(payload, TreePair):
                        out.append(payload.tree1.effects())
                        out.append(payload.tree2.effects())
                        if payload.interacting:
                            out.append(payload.omega.ravel())
                    else:
                        out.append(payload.effects())
        return np.concatenate(out) if out else np.zeros(0)

    # ------------------------------------------------------------------
    # structure updates

    def _mh_accept(self, log_alpha: float) -> bool:
        if self.hooks.force_accept:
            self.rng.random()
            return True
        return math.log(self.rng.random()) < log_alpha

    def _update_dlm_structure(self, structure: _Structure, r: np.ndarray):
        prop = propose_move(structure.tree, self.rng, self.prior)
        cur_ml, _, _ = self._structure_logml(structure, r)
        cand = _Structure("dlm", tree=prop.tree, n=self.n)
        new_ml, _, _ = self._structure_logml(cand, r)
        self.counts["dlm"][1] += 1
        if self._mh_accept(new_ml - cur_ml + prop.log_prior_ratio + prop.log_trans_ratio):
            structure.tree = prop.tree
            self.counts["dlm"][0] += 1

    def _update_pair_structure(self, structure: _Structure, r: np.ndarray):
        pair = structure.pair
        for slot in (1, 2):
            tree = pair.tree1 if slot == 1 else pair.tree2
            prop = propose_move(tree, self.rng, self.prior)
            cur_ml, _, _ = self._structure_logml(structure, r)
            cand_pair = TreePair(self.T, pair.exposure1, pair.exposure2, pair.interacting)
            cand_pair.tree1 = prop.tree if slot == 1 else pair.tree1
            cand_pair.tree2 = prop.tree if slot == 2 else pair.tree2
            cand = _Structure("pair", pair=cand_pair, n=self.n)
            new_ml, _, _ = self._structure_logml(cand, r)
            self.counts["pair"][1] += 1
            if self._mh_accept(new_ml - cur_ml + prop.log_prior_ratio + prop.log_trans_ratio):
                if slot == 1:
                    pair.tree1 = prop.tree
                else:
                    pair.tree2 = prop.tree
                pair.resize_omega()
                self.counts["pair"][0] += 1

    def _update_exposure_assignments(self, structure: _Structure, r: np.ndarray):
        pair = structure.pair
        for slot in (1, 2):
            exclude = None
            if self.spec.interaction_mode == "noself":
                exclude = pair.exposure2 if slot == 1 else pair.exposure1
            log_mls = np.empty(self.M)
            for m in range(self.M):
                if exclude is not None and m == exclude:
                    log_mls[m] = -np.inf
                    continue
                trial = TreePair(self.T, pair.exposure1, pair.exposure2, pair.interacting)
                trial.tree1, trial.tree2 = pair.tree1, pair.tree2
                if slot == 1:
                    trial.exposure1 = m
                else:
                    trial.exposure2 = m
                U = self._pair_design(trial)
                log_mls[m], _ = _log_marginal(U, self.weights, r, self.tau2)
            chosen = sample_exposure_index(log_mls, self.selection_probs, self.rng, exclude=exclude)
            if slot == 1:
                pair.exposure1 = chosen
            else:
                pair.exposure2 = chosen

    def _update_modifier_structure(self, structure: _Structure, r: np.ndarray):
        prop = propose_modifier_move(structure.mod_tree, self.rng, self.prior, self.modifier_probs)
        if prop is not None:
            self.counts["modifier"][1] += 1
            if prop.kind == "grow" and prop.new_leaf is not None:
                prop.new_leaf.payload = self._draw_fresh_payload(structure)
            cand = _Structure("modifier", mod_tree=prop.tree, n=self.n)
            assignments = prop.tree.assign_all(self.mod_columns)
            counts = np.bincount(assignments, minlength=prop.tree.n_terminals)
            if np.all(counts > 0):  # proposals creating data-empty leaves are rejected
                cur_ml, _, _ = self._structure_logml(structure, r)
                new_ml, _, _ = self._structure_logml(cand, r)
                if self._mh_accept(
                    new_ml - cur_ml + prop.log_prior_ratio + prop.log_trans_ratio
                ):
                    structure.mod_tree = prop.tree
                    self.counts["modifier"][0] += 1
        # nested payload moves, one per leaf
        for leaf in structure.mod_tree.leaves():
            payload = leaf.payload
            if isinstance(payload, TreePair):
                for slot in (1, 2):
                    tree = payload.tree1 if slot == 1 else payload.tree2
                    prop = propose_move(tree, self.rng, self.prior)
                    cur_ml, _, _ = self._structure_logml(structure, r)
                    saved = (payload.tree1, payload.tree2, payload.omega)
                    if slot == 1:
                        payload.tree1 = prop.tree
                    else:
                        payload.tree2 = prop.tree
                    payload.resize_omega()
                    new_ml, _, _ = self._structure_logml(structure, r)
                    self.counts["pair"][1] += 1
                    if self._mh_accept(
                        new_ml - cur_ml + prop.log_prior_ratio + prop.log_trans_ratio
                    ):
                        self.counts["pair"][0] += 1
                    else:
                        payload.tree1, payload.tree2, payload.omega = saved
            else:
                prop = propose_move(payload, self.rng, self.prior)
                cur_ml, _, _ = self._structure_logml(structure, r)
                saved = leaf.payload
                leaf.payload = prop.tree
                new_ml, _, _ = self._structure_logml(structure, r)
                self.counts["dlm"][1] += 1
                if self._mh_accept(new_ml - cur_ml + prop.log_prior_ratio + prop.log_trans_ratio):
                    self.counts["dlm"][0] += 1
                else:
                    leaf.payload = saved
        if self.spec.mixture:
            self._update_het_exposures(structure, r)

    def _draw_fresh_payload(self, structure: _Structure):
        if self.spec.mixture:
            # the exposure pair is shared across all leaves of a structure
            existing = structure.mod_tree.leaves()[0].payload
            pair = TreePair(
                self.T, existing.exposure1, existing.exposure2, existing.interacting
            )
            pair.tree1 = draw_dlm_topology(self.T, self.prior, self.rng)
            pair.tree2 = draw_dlm_topology(self.T, self.prior, self.rng)
            pair.resize_omega()
            return pair
        return draw_dlm_topology(self.T, self.prior, self.rng)

    def _update_het_exposures(self, structure: _Structure, r: np.ndarray):
        """Shared exposure assignment across all leaf pairs of a modifier tree."""
        leaves = structure.mod_tree.leaves()
        first = leaves[0].payload
        for slot in (1, 2):
            exclude = None
            if self.spec.interaction_mode == "noself":
                exclude = first.exposure2 if slot == 1 else first.exposure1
            log_mls = np.empty(self.M)
            for m in range(self.M):
                if exclude is not None and m == exclude:
                    log_mls[m] = -np.inf
                    continue
                saved = [(p.payload.exposure1, p.payload.exposure2) for p in leaves]
                for leaf in leaves:
                    if slot == 1:
                        leaf.payload.exposure1 = m
                    else:
                        leaf.payload.exposure2 = m
                log_mls[m], _, _ = self._structure_logml(structure, r)
                for leaf, (e1, e2) in zip(leaves, saved):
                    leaf.payload.exposure1, leaf.payload.exposure2 = e1, e2
            chosen = sample_exposure_index(log_mls, self.selection_probs, self.rng, exclude=exclude)
            for leaf in leaves:
                if slot == 1:
                    leaf.payload.exposure1 = chosen
                else:
                    leaf.payload.exposure2 = chosen

    # ------------------------------------------------------------------
    # global updates

    def _update_gamma(self):
        if self.hooks.fix_gamma is not None:
            return
        f = sum(s.fitted for s in self.structures)
        r = self.y_work - f
        A, b = kernels.gram_moment(self.Z, self.weights, r)
        L = cho_factor(A, lower=True)
        mu = cho_solve(L, b)
        z = self.rng.standard_normal(self.p)
        self.gamma = mu + solve_triangular(L[0].T, z, lower=False)

    def _update_sigma2(self):
        if self.spec.family != "gaussian":
            return
        if self.hooks.fix_sigma2 is not None:
            self.weights = np.full(self.n, 1.0 / self.sigma2)
            return
        f = sum(s.fitted for s in self.structures)
        resid = self.data.outcome - self.Z @ self.gamma - f
        shape = SIGMA_PRIOR_SHAPE + 0.5 * self.n
        rate = SIGMA_PRIOR_RATE + 0.5 * float(resid @ resid)
        self.sigma2 = rate / self.rng.gamma(shape)
        self.weights = np.full(self.n, 1.0 / self.sigma2)

    def _update_tau2(self):
        if self.hooks.fix_tau2 is not None:
            return
        eff = self._collect_effects()
        k = eff.size
        ss = float(eff @ eff)
        scale = self.spec.shrinkage.halfcauchy_scale

        def logpost(u):  # u = log tau
            tau = math.exp(u)
            return -k * u - ss / (2.0 * tau * tau) - math.log1p((tau / scale) ** 2) + u

        self.tau2 = math.exp(_slice_sample(logpost, 0.5 * math.log(self.tau2), self.rng)) ** 2

    def _update_pg_latents(self):
        f = sum(s.fitted for s in self.structures)
        psi = self.Z @ self.gamma + f
        omega = pg_ones(psi, self.rng)
        self.pg_latents = omega
        self.weights = omega
        self.y_work = (self.data.outcome - 0.5) / omega

    def _update_selection_probs(self):
        counts = np.zeros(self.M)
        for s in self.structures:
            if s.kind == "pair":
                counts[s.pair.exposure1] += 1
                counts[s.pair.exposure2] += 1
            elif s.kind == "modifier" and self.spec.mixture:
                payload = s.mod_tree.leaves()[0].payload
                counts[payload.exposure1] += 1
                counts[payload.exposure2] += 1
        self.selection_probs = self.rng.dirichlet(self.spec.kappa / self.M + counts)

    def _update_modifier_probs(self):
        K = len(self.spec.modifiers)
        counts = np.zeros(K)
        for s in self.structures:
            if s.kind != "modifier":
                continue
            for node, _ in s.mod_tree.internals_with_depth():
                counts[node.mod_idx] += 1
        self.modifier_probs = self.rng.dirichlet(self.spec.modifier_sparsity / K + counts)

    # ------------------------------------------------------------------
    # sweep

    def sweep(self):
        if self.spec.family == "logit":
            self._update_pg_latents()
        base = self.y_work - self.Z @ self.gamma
        f = sum(s.fitted for s in self.structures)
        for structure in self.structures:
            r = base - (f - structure.fitted)
            if not self.hooks.freeze_trees:
                if structure.kind == "dlm":
                    self._update_dlm_structure(structure, r)
                elif structure.kind == "pair":
                    self._update_pair_structure(structure, r)
                    self._update_exposure_assignments(structure, r)
                else:
                    self._update_modifier_structure(structure, r)
            if not self.hooks.freeze_effects:
                _, facs, _ = self._structure_logml(structure, r)
                old = structure.fitted.copy()
                self._set_structure_effects(structure, facs)
                f += structure.fitted - old
        self._update_gamma()
        self._update_sigma2()
        self._update_tau2()
        if self.spec.mixture:
            self._update_selection_probs()
        if self.spec.het:
            self._update_modifier_probs()
        self.residual = self.y_work - self.Z @ self.gamma - sum(s.fitted for s in self.structures)

    # ------------------------------------------------------------------
    # draw recording

    def theta_by_exposure(self) -> np.ndarray:
        """(M, T) lag-effect curves; for het models the population average."""
        out = np.zeros((self.M, self.T))
        for s in self.structures:
            if s.kind == "dlm":
                out[0] += s.tree.theta()
            elif s.kind == "pair":
                out[s.pair.exposure1] += s.pair.tree1.theta()
                out[s.pair.exposure2] += s.pair.tree2.theta()
            else:
                assignments = s.mod_tree.assign_all(self.mod_columns)
                for leaf_idx, leaf in enumerate(s.mod_tree.leaves()):
                    wgt = float(np.mean(assignments == leaf_idx))
                    payload = leaf.payload
                    if isinstance(payload, TreePair):
                        out[payload.exposure1] += wgt * payload.tree1.theta()
                        out[payload.exposure2] += wgt * payload.tree2.theta()
                    else:
                        out[0] += wgt * payload.theta()
        return out

    def interaction_grids(self) -> dict:
        """Dense (T, T) interaction grids keyed by ordered exposure index pairs."""
        grids = {}
        for s in self.structures:
            if s.kind != "pair" or not s.pair.interacting:
                continue
            pair = s.pair
            m1, m2 = pair.exposure1, pair.exposure2
            lo1, hi1 = pair.tree1.bounds()
            lo2, hi2 = pair.tree2.bounds()
            key = (m1, m2) if m1 <= m2 else (m2, m1)
            grid = grids.setdefault(key, np.zeros((self.T, self.T)))
            transpose = m1 > m2
            for c1 in range(len(lo1)):
                for c2 in range(len(lo2)):
                    v = pair.omega[c1, c2]
                    if v == 0.0:
                        continue
                    if transpose:
                        kernels.add_block(grid, int(lo2[c2]), int(hi2[c2]), int(lo1[c1]), int(hi1[c1]), v)
                    else:
                        kernels.add_block(grid, int(lo1[c1]), int(hi1[c1]), int(lo2[c2]), int(hi2[c2]), v)
        return grids

    def exposure_counts(self) -> np.ndarray:
        counts = np.zeros(self.M)
        for s in self.structures:
            if s.kind == "pair":
                counts[s.pair.exposure1] += 1
                counts[s.pair.exposure2] += 1
            elif s.kind == "modifier" and self.spec.mixture:
                payload = s.mod_tree.leaves()[0].payload
                counts[payload.exposure1] += 1
                counts[payload.exposure2] += 1
            elif s.kind == "dlm":
                counts[0] += 1
        return counts

    def modifier_usage(self) -> np.ndarray:
        used = np.zeros(len(self.spec.modifiers))
        for s in self.structures:
            if s.kind != "modifier":
                continue
            for node, _ in s.mod_tree.internals_with_depth():
                used[node.mod_idx] = 1.0
        return used

    def mean_terminals(self) -> float:
        sizes = []
        for s in self.structures:
            if s.kind == "dlm":
                sizes.append(s.tree.n_terminals)
            elif s.kind == "pair":
                sizes.append(s.pair.tree1.n_terminals)
                sizes.append(s.pair.tree2.n_terminals)
            else:
                sizes.append(s.mod_tree.n_terminals)
        return float(np.mean(sizes))

    def debug_assertions(self):
        for s in self.structures:
            if s.kind == "dlm":
                s.tree.validate_partition()
            elif s.kind == "pair":
                s.pair.tree1.validate_partition()
                s.pair.tree2.validate_partition()
                s.pair.check_omega()
            else:
                for leaf in s.mod_tree.leaves():
                    payload = leaf.payload
                    if isinstance(payload, TreePair):
                        payload.tree1.validate_partition()
                        payload.tree2.validate_partition()
                        payload.check_omega()
                    else:
                        payload.validate_partition()
        if self.spec.family == "gaussian":
            f = sum(s.fitted for s in self.structures)
            check = self.y_work - self.Z @ self.gamma - f
            if np.max(np.abs(check - self.residual)) > 1e-10:
                raise LaggardError("residual identity violated")
        if self.spec.mixture:
            if self.exposure_counts().sum() != 2 * self.A:
                raise LaggardError("exposure slot counts do not sum to 2A")


def _slice_sample(logf, x0, rng, width=1.0, max_steps=50):
    """Univariate stepping-out slice sampler."""
    logy = logf(x0) - rng.exponential()
    left = x0 - width * rng.random()
    right = left + width
    steps = max_steps
    while steps > 0 and logf(left) > logy:
        left -= width
        steps -= 1
    steps = max_steps
    while steps > 0 and logf(right) > logy:
        right += width
        steps -= 1
    while True:
        x = left + (right - left) * rng.random()
        if logf(x) > logy:
            return x
        if x < x0:
            left = x
        else:
            right = x


def _serialize_structures(chain: _Chain):
    out = []
    for s in chain.structures:
        if s.kind == "dlm":
            out.append({"kind": "dlm", "tree": s.tree.to_record()})
        elif s.kind == "pair":
            out.append({"kind": "pair", "pair": s.pair.to_record()})
        else:
            out.append({"kind": "modifier", "tree": s.mod_tree.to_record()})
    return out


def fit(spec: ModelSpec, data: Dataset, control: McmcControl, hooks: Hooks | None = None) -> PosteriorFit:
    """Run one MCMC chain and return the retained draws."""
    hooks = hooks or Hooks()
    chain = _Chain(spec, data, control, hooks, control.seed)
    R = control.n_retained
    M, T, p = chain.M, chain.T, chain.p
    names = data.exposure_names

    gamma_draws = np.zeros((R, p))
    sigma2_draws = np.zeros(R)
    theta_draws = {name: np.zeros((R, T)) for name in names}
    interaction_draws = {}
    if spec.mixture and spec.interaction_mode != "none" and not spec.het:
        for i in range(M):
            start = i if spec.interaction_mode == "all" else i + 1
            for j in range(start, M):
                interaction_draws[(names[i], names[j])] = np.zeros((R, T, T))
    sel_counts = np.zeros((R, M))
    mod_usage = np.zeros((R, len(spec.modifiers)))
    accepted = {k: np.zeros(R) for k in ("dlm", "pair", "modifier")}
    proposed = {k: np.zeros(R) for k in ("dlm", "pair", "modifier")}
    tree_sizes = np.zeros(R)
    tree_records = [] if control.store_trees else None
    het_records = [] if spec.het else None

    total = control.n_burn + control.n_iter
    r_idx = 0
    for it in range(1, total + 1):
        chain.sweep()
        if control.debug_checks:
            chain.debug_assertions()
        if control.progress and (it % max(1, total // 20) == 0 or it == total):
            acc = {k: (a / max(1, pr)) for k, (a, pr) in chain.counts.items() if pr}
            acc_str = ", ".join(f"{k}: {v:.2f}" for k, v in acc.items())
            print(f"[laggard] iteration {it}/{total} acceptance {acc_str}", file=sys.stderr)
        if it <= control.n_burn:
            continue
        j = it - control.n_burn
        if j % control.n_thin != 0:
            continue
        gamma_draws[r_idx] = chain.gamma
        sigma2_draws[r_idx] = chain.sigma2
        theta = chain.theta_by_exposure()
        for m, name in enumerate(names):
            theta_draws[name][r_idx] = theta[m]
        for (i, j2), grid in chain.interaction_grids().items():
            interaction_draws[(names[i], names[j2])][r_idx] = grid
        sel_counts[r_idx] = chain.exposure_counts()
        if spec.modifiers:
            mod_usage[r_idx] = chain.modifier_usage()
        for k, (a, pr) in chain.counts.items():
            accepted[k][r_idx] = a
            proposed[k][r_idx] = pr
        chain.counts = {k: [0, 0] for k in chain.counts}
        tree_sizes[r_idx] = chain.mean_terminals()
        if tree_records is not None:
            tree_records.append(_serialize_structures(chain))
        if het_records is not None:
            het_records.append(
                [s.mod_tree.to_record() for s in chain.structures if s.kind == "modifier"]
            )
        r_idx += 1

    meta = {
        "model_class": spec.model_class,
        "family": spec.family,
        "spec": spec,
        "control": control,
        "n": data.n,
        "p": p,
        "n_lags": T,
        "exposure_names": list(names),
        "design_names": list(data.design_names),
        "scale_factors": [e.scale_factor for e in data.exposures],
        "interaction_mode": spec.interaction_mode,
        "kernel_backend": kernels.BACKEND,
        # carried so summaries and the server can work from a stored fit alone
        "exposure_values": [e.values for e in data.exposures],
        "modifier_columns": {d.name: data.modifier(d.name).values for d in spec.modifiers},
    }
    return PosteriorFit(
        meta=meta,
        gamma_draws=gamma_draws,
        sigma2_draws=sigma2_draws,
        theta_draws=theta_draws,
        interaction_draws=interaction_draws,
        exposure_selection_counts=sel_counts,
        modifier_usage=mod_usage,
        tree_logs={
            "accepted": accepted,
            "proposed": proposed,
            "tree_sizes": tree_sizes,
        },
        tree_records=tree_records,
        het_tree_records=het_records,
    )


def _fit_one(args):
    spec, data, control, hooks, seed = args
    return fit(spec, data, replace(control, seed=seed, n_chains=1), hooks)


def run_chains(
    spec: ModelSpec, data: Dataset, control: McmcControl, hooks: Hooks | None = None
) -> list[PosteriorFit]:
    """Fit n_chains independent chains with seeds seed, seed + 1, ...

    Chains run in parallel processes when LAGGARD_THREADS allows;
    results are identical to serial execution either way.
    """
    seeds = [control.seed + i for i in range(control.n_chains)]
    jobs = [(spec, data, control, hooks, s) for s in seeds]
    max_workers = int(os.environ.get("LAGGARD_THREADS", "1"))
    if control.n_chains == 1 or max_workers <= 1:
        return [_fit_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(max_workers, control.n_chains)) as pool:
        return list(pool.map(_fit_one, jobs))
