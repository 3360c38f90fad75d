"""Tree structures and Metropolis-Hastings proposal moves.

Three structures share one move kernel (grow / prune / change with
weights 0.3 / 0.3 / 0.4):

* :class:`DlmTree` partitions the lag axis [1, T] into intervals, each
  carrying a constant effect.
* :class:`TreePair` holds two DLM trees for two (possibly equal)
  exposures plus the interaction grid over their terminal intervals.
* :class:`ModifierTree` partitions the modifier space into subgroups;
  each leaf carries a nested payload (a DlmTree or a TreePair).

Conventions: the left interval is closed at the split lag; continuous
modifier rules send value <= threshold left; categorical rules send
members of the stored subset left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import ModifierDef
from .errors import LaggardError

MOVE_WEIGHTS = {"grow": 0.3, "prune": 0.3, "change": 0.4}


@dataclass
class TreePriorParams:
    """Depth-dependent split prior: p_split(d) = alpha * (1 + d)^(-beta)."""

    alpha: float = 0.95
    beta: float = 2.0
    num_trees: int = 20

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise LaggardError("alpha must be in (0, 1)")
        if self.beta < 0:
            raise LaggardError("beta must be >= 0")
        if self.num_trees < 1:
            raise LaggardError("num_trees must be >= 1")

    def p_split(self, depth: int) -> float:
        return self.alpha * (1.0 + depth) ** (-self.beta)


# ---------------------------------------------------------------------------
# DLM tree


class DlmNode:
    __slots__ = ("lo", "hi", "split", "left", "right", "effect")

    def __init__(self, lo, hi, split=None, left=None, right=None, effect=0.0):
        self.lo = lo
        self.hi = hi
        self.split = split
        self.left = left
        self.right = right
        self.effect = effect

    @property
    def is_leaf(self):
        return self.split is None

    def copy(self):
        if self.is_leaf:
            return DlmNode(self.lo, self.hi, effect=self.effect)
        return DlmNode(self.lo, self.hi, self.split, self.left.copy(), self.right.copy())


class DlmTree:
    """Binary tree partitioning lags [1, T] into effect-constant intervals."""

    def __init__(self, T: int, root: DlmNode | None = None):
        self.T = T
        self.root = root if root is not None else DlmNode(1, T)

    def copy(self) -> "DlmTree":
        return DlmTree(self.T, self.root.copy())

    def _walk(self, node, depth, leaves, internals):
        if node.is_leaf:
            leaves.append((node, depth))
        else:
            internals.append((node, depth))
            self._walk(node.left, depth + 1, leaves, internals)
            self._walk(node.right, depth + 1, leaves, internals)

    def leaves_with_depth(self):
        leaves, internals = [], []
        self._walk(self.root, 0, leaves, internals)
        return leaves

    def internals_with_depth(self):
        leaves, internals = [], []
        self._walk(self.root, 0, leaves, internals)
        return internals

    def terminals(self) -> list[DlmNode]:
        """Terminal nodes in lag order (in-order traversal)."""
        return [n for n, _ in self.leaves_with_depth()]

    @property
    def n_terminals(self) -> int:
        return len(self.terminals())

    def evaluate(self, t: int) -> float:
        if not 1 <= t <= self.T:
            raise LaggardError(f"lag {t} outside [1, {self.T}]")
        node = self.root
        while not node.is_leaf:
            node = node.left if t <= node.split else node.right
        return node.effect

    def theta(self) -> np.ndarray:
        """Length-T vector of per-lag effects."""
        out = np.empty(self.T)
        for leaf in self.terminals():
            out[leaf.lo - 1 : leaf.hi] = leaf.effect
        return out

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """1-based (lo, hi) arrays over terminals, in lag order."""
        leaves = self.terminals()
        lo = np.array([n.lo for n in leaves], dtype=np.int64)
        hi = np.array([n.hi for n in leaves], dtype=np.int64)
        return lo, hi

    def set_effects(self, effects) -> None:
        for leaf, value in zip(self.terminals(), effects, strict=True):
            leaf.effect = float(value)

    def effects(self) -> np.ndarray:
        return np.array([n.effect for n in self.terminals()])

    def validate_partition(self) -> None:
        """Assert terminal intervals partition [1, T] exactly."""
        leaves = self.terminals()
        pos = 1
        for leaf in leaves:
            if leaf.lo != pos or leaf.hi < leaf.lo:
                raise LaggardError(f"terminal intervals do not partition [1, {self.T}]")
            pos = leaf.hi + 1
        if pos != self.T + 1:
            raise LaggardError(f"terminal intervals do not partition [1, {self.T}]")

    # serialization: preorder list of node records
    def to_record(self) -> list:
        rec = []

        def visit(node):
            if node.is_leaf:
                rec.append({"lo": node.lo, "hi": node.hi, "effect": node.effect})
            else:
                rec.append({"lo": node.lo, "hi": node.hi, "split": node.split})
                visit(node.left)
                visit(node.right)

        visit(self.root)
        return rec

    @classmethod
    def from_record(cls, T: int, rec: list) -> "DlmTree":
        it = iter(rec)

        def build():
            entry = next(it)
            if "split" in entry:
                node = DlmNode(entry["lo"], entry["hi"], entry["split"])
                node.left = build()
                node.right = build()
                return node
            return DlmNode(entry["lo"], entry["hi"], effect=entry["effect"])

        return cls(T, build())


def evaluate_dlm_tree(tree: DlmTree, t: int) -> float:
    return tree.evaluate(t)


def ensemble_theta(ensemble, T: int) -> np.ndarray:
    """Elementwise sum of per-tree lag effects over an ensemble."""
    out = np.zeros(T)
    for tree in ensemble:
        if tree.T != T:
            raise LaggardError("all trees in an ensemble must span [1, T]")
        out += tree.theta()
    return out


def tree_log_prior(tree, params: TreePriorParams) -> float:
    """Log topology prior: product of split / no-split probabilities by depth."""
    logp = 0.0
    for _, depth in tree.internals_with_depth():
        logp += math.log(params.p_split(depth))
    for _, depth in tree.leaves_with_depth():
        logp += math.log1p(-params.p_split(depth))
    return logp


def dlm_log_gen_prior(tree: DlmTree, params: TreePriorParams) -> float:
    """Generative log prior: split probabilities by depth times uniform
    split-lag choice, with no-split factors only at splittable leaves.

    Sums to 1 over the (finite) space of trees on [1, T]; this is the
    prior the sampler targets.
    """
    logp = 0.0
    for node, depth in tree.internals_with_depth():
        logp += math.log(params.p_split(depth)) - math.log(node.hi - node.lo)
    for node, depth in tree.leaves_with_depth():
        if node.hi > node.lo:
            logp += math.log1p(-params.p_split(depth))
    return logp


def draw_dlm_topology(T: int, params: TreePriorParams, rng: np.random.Generator) -> DlmTree:
    """Sample a DLM tree topology from the generative prior (effects zero)."""

    def build(lo, hi, depth):
        node = DlmNode(lo, hi)
        if hi > lo and rng.random() < params.p_split(depth):
            s = int(rng.integers(lo, hi))  # uniform over [lo, hi - 1]
            node.split = s
            node.left = build(lo, s, depth + 1)
            node.right = build(s + 1, hi, depth + 1)
        return node

    return DlmTree(T, build(1, T, 0))


# ---------------------------------------------------------------------------
# proposals

GROW, PRUNE, CHANGE = "grow", "prune", "change"


@dataclass
class Proposal:
    """A proposed tree move with the exact MH bookkeeping terms.

    ``log_trans_ratio`` is log q(new -> old) - log q(old -> new);
    ``log_prior_ratio`` is the generative-prior log ratio new vs old.
    ``new_leaf`` is set for grow moves on modifier trees (the leaf whose
    payload must be freshly drawn).
    """

    kind: str
    tree: object
    log_trans_ratio: float
    log_prior_ratio: float
    new_leaf: object = None


def _kind_probs(available: dict[str, bool]) -> dict[str, float]:
    total = sum(MOVE_WEIGHTS[k] for k, ok in available.items() if ok)
    return {k: MOVE_WEIGHTS[k] / total for k, ok in available.items() if ok}


def _pick_kind(probs: dict[str, float], rng) -> str:
    kinds = sorted(probs)
    p = np.array([probs[k] for k in kinds])
    return kinds[rng.choice(len(kinds), p=p)]


def propose_move(tree: DlmTree, rng: np.random.Generator, params: TreePriorParams) -> Proposal:
    """Propose a grow, prune, or change move on a DLM tree."""
    growable = [(n, d) for n, d in tree.leaves_with_depth() if n.hi > n.lo]
    prunable = [(n, d) for n, d in tree.internals_with_depth() if n.left.is_leaf and n.right.is_leaf]
    probs = _kind_probs({GROW: bool(growable), PRUNE: bool(prunable), CHANGE: bool(prunable)})
    kind = _pick_kind(probs, rng)

    new = tree.copy()
    n_growable = len(growable)
    n_prunable = len(prunable)

    if kind == GROW:
        idx = int(rng.integers(n_growable))
        node, depth = _nth(new, growable, idx, leaves=True)
        s = int(rng.integers(node.lo, node.hi))
        node.split = s
        node.left = DlmNode(node.lo, s)
        node.right = DlmNode(s + 1, node.hi)
        n_splits = node.hi - node.lo
        # reverse: prune the new internal node
        new_prunable = _count_prunable(new)
        new_probs = _kind_probs(
            {GROW: _count_growable(new) > 0, PRUNE: True, CHANGE: True}
        )
        log_q_fwd = math.log(probs[GROW]) - math.log(n_growable) - math.log(n_splits)
        log_q_rev = math.log(new_probs[PRUNE]) - math.log(new_prunable)
        p_d, p_d1 = params.p_split(depth), params.p_split(depth + 1)
        log_prior = math.log(p_d) - math.log(n_splits) - math.log1p(-p_d)
        if node.left.hi > node.left.lo:
            log_prior += math.log1p(-p_d1)
        if node.right.hi > node.right.lo:
            log_prior += math.log1p(-p_d1)
        return Proposal(GROW, new, log_q_rev - log_q_fwd, log_prior)

    if kind == PRUNE:
        idx = int(rng.integers(n_prunable))
        node, depth = _nth(new, prunable, idx, leaves=False)
        n_splits = node.hi - node.lo
        left_growable = node.left.hi > node.left.lo
        right_growable = node.right.hi > node.right.lo
        node.split = None
        node.left = None
        node.right = None
        new_growable = _count_growable(new)
        new_prunable = _count_prunable(new)
        new_probs = _kind_probs(
            {GROW: True, PRUNE: new_prunable > 0, CHANGE: new_prunable > 0}
        )
        log_q_fwd = math.log(probs[PRUNE]) - math.log(n_prunable)
        log_q_rev = math.log(new_probs[GROW]) - math.log(new_growable) - math.log(n_splits)
        p_d, p_d1 = params.p_split(depth), params.p_split(depth + 1)
        log_prior = -(math.log(p_d) - math.log(n_splits) - math.log1p(-p_d))
        if left_growable:
            log_prior -= math.log1p(-p_d1)
        if right_growable:
            log_prior -= math.log1p(-p_d1)
        return Proposal(PRUNE, new, log_q_rev - log_q_fwd, log_prior)

    # change: redraw the split of a node with two terminal children
    idx = int(rng.integers(n_prunable))
    node, depth = _nth(new, prunable, idx, leaves=False)
    p_d1 = params.p_split(depth + 1)
    old_factors = (node.left.hi > node.left.lo) + (node.right.hi > node.right.lo)
    s = int(rng.integers(node.lo, node.hi))
    node.split = s
    node.left = DlmNode(node.lo, s)
    node.right = DlmNode(s + 1, node.hi)
    new_factors = (node.left.hi > node.left.lo) + (node.right.hi > node.right.lo)
    return Proposal(CHANGE, new, 0.0, (new_factors - old_factors) * math.log1p(-p_d1))


def _nth(new_tree, reference, idx, leaves):
    """Locate in the copied tree the node at position idx of the reference list."""
    if leaves:
        cand = [(n, d) for n, d in new_tree.leaves_with_depth() if n.hi > n.lo]
    else:
        cand = [
            (n, d)
            for n, d in new_tree.internals_with_depth()
            if n.left.is_leaf and n.right.is_leaf
        ]
    assert len(cand) == len(reference)
    return cand[idx]


def _count_growable(tree) -> int:
    return sum(1 for n, _ in tree.leaves_with_depth() if n.hi > n.lo)


def _count_prunable(tree) -> int:
    return sum(
        1 for n, _ in tree.internals_with_depth() if n.left.is_leaf and n.right.is_leaf
    )


# ---------------------------------------------------------------------------
# DLM tree pair with interaction surface


class TreePair:
    """Two DLM trees plus the interaction grid over their terminal cells.

    ``interacting`` is False under interaction mode ``none``, in which
    case omega stays identically zero.
    """

    def __init__(self, T: int, exposure1: int, exposure2: int, interacting: bool = True):
        self.tree1 = DlmTree(T)
        self.tree2 = DlmTree(T)
        self.exposure1 = exposure1
        self.exposure2 = exposure2
        self.interacting = interacting
        self.omega = np.zeros((1, 1))

    def resize_omega(self) -> None:
        """Zero-fill omega to the current terminal counts (after a tree move)."""
        self.omega = np.zeros((self.tree1.n_terminals, self.tree2.n_terminals))

    def check_omega(self) -> None:
        if self.omega.shape != (self.tree1.n_terminals, self.tree2.n_terminals):
            raise LaggardError("omega dimensions out of sync with terminal counts")
        if not self.interacting and np.any(self.omega != 0.0):
            raise LaggardError("omega must be zero under interaction mode 'none'")

    def to_record(self) -> dict:
        return {
            "tree1": self.tree1.to_record(),
            "tree2": self.tree2.to_record(),
            "exposure1": self.exposure1,
            "exposure2": self.exposure2,
            "interacting": self.interacting,
            "omega": self.omega.tolist(),
        }

    @classmethod
    def from_record(cls, T: int, rec: dict) -> "TreePair":
        pair = cls(T, rec["exposure1"], rec["exposure2"], rec["interacting"])
        pair.tree1 = DlmTree.from_record(T, rec["tree1"])
        pair.tree2 = DlmTree.from_record(T, rec["tree2"])
        pair.omega = np.asarray(rec["omega"], dtype=np.float64)
        pair.check_omega()
        return pair


def pair_effects(pair: TreePair, T: int):
    """Main-effect vectors of both trees and the dense T x T interaction grid."""
    main1 = pair.tree1.theta()
    main2 = pair.tree2.theta()
    grid = np.zeros((T, T))
    lo1, hi1 = pair.tree1.bounds()
    lo2, hi2 = pair.tree2.bounds()
    for c1 in range(len(lo1)):
        for c2 in range(len(lo2)):
            grid[lo1[c1] - 1 : hi1[c1], lo2[c2] - 1 : hi2[c2]] = pair.omega[c1, c2]
    return main1, main2, grid


# ---------------------------------------------------------------------------
# modifier tree


class ModNode:
    __slots__ = ("mod_idx", "threshold", "subset", "left", "right", "payload")

    def __init__(self, mod_idx=None, threshold=None, subset=None, left=None, right=None, payload=None):
        self.mod_idx = mod_idx
        self.threshold = threshold
        self.subset = subset
        self.left = left
        self.right = right
        self.payload = payload

    @property
    def is_leaf(self):
        return self.mod_idx is None

    def copy(self, copy_payload=True):
        if self.is_leaf:
            payload = self.payload
            if copy_payload and payload is not None:
                payload = _copy_payload(payload)
            return ModNode(payload=payload)
        return ModNode(
            self.mod_idx,
            self.threshold,
            self.subset,
            self.left.copy(copy_payload),
            self.right.copy(copy_payload),
        )


def _copy_payload(payload):
    if isinstance(payload, DlmTree):
        return payload.copy()
    if isinstance(payload, TreePair):
        rec = payload.to_record()
        return TreePair.from_record(payload.tree1.T, rec)
    raise LaggardError(f"unknown payload type {type(payload)!r}")


class ModifierTree:
    """Binary tree over modifier rules; leaves carry nested DLM payloads."""

    def __init__(self, defs: tuple[ModifierDef, ...], root: ModNode | None = None):
        self.defs = tuple(defs)
        self.root = root if root is not None else ModNode()

    def copy(self, copy_payload=True) -> "ModifierTree":
        return ModifierTree(self.defs, self.root.copy(copy_payload))

    def _walk(self, node, depth, constraints, leaves, internals):
        if node.is_leaf:
            leaves.append((node, depth, constraints))
            return
        internals.append((node, depth, constraints))
        d = self.defs[node.mod_idx]
        if d.kind == "continuous":
            lo, hi = constraints.get(node.mod_idx, (-math.inf, math.inf))
            left_c = dict(constraints)
            left_c[node.mod_idx] = (lo, node.threshold)
            right_c = dict(constraints)
            right_c[node.mod_idx] = (node.threshold, hi)
        else:
            avail = constraints.get(node.mod_idx, frozenset(range(d.n_levels)))
            inside = avail & frozenset(node.subset)
            left_c = dict(constraints)
            left_c[node.mod_idx] = inside
            right_c = dict(constraints)
            right_c[node.mod_idx] = avail - inside
        self._walk(node.left, depth + 1, left_c, leaves, internals)
        self._walk(node.right, depth + 1, right_c, leaves, internals)

    def leaves_with_context(self):
        leaves, internals = [], []
        self._walk(self.root, 0, {}, leaves, internals)
        return leaves

    def internals_with_context(self):
        leaves, internals = [], []
        self._walk(self.root, 0, {}, leaves, internals)
        return internals

    def leaves(self) -> list[ModNode]:
        return [n for n, _, _ in self.leaves_with_context()]

    @property
    def n_terminals(self):
        return len(self.leaves())

    def leaves_with_depth(self):
        return [(n, d) for n, d, _ in self.leaves_with_context()]

    def internals_with_depth(self):
        return [(n, d) for n, d, _ in self.internals_with_context()]

    def eligible_splits(self, mod_idx, constraints) -> list[int]:
        """Indices of split candidates that produce two nonempty rule regions."""
        d = self.defs[mod_idx]
        out = []
        if d.kind == "continuous":
            lo, hi = constraints.get(mod_idx, (-math.inf, math.inf))
            for i, t in enumerate(d.split_candidates):
                if lo < t < hi:
                    out.append(i)
        else:
            avail = constraints.get(mod_idx, None)
            for i, subset in enumerate(d.split_candidates):
                if avail is None:
                    out.append(i)
                else:
                    inside = avail & frozenset(subset)
                    if inside and inside != avail:
                        out.append(i)
        return out

    def assign(self, row: dict) -> int:
        """Leaf index (in-order) for one row of modifier values."""
        node = self.root
        while not node.is_leaf:
            d = self.defs[node.mod_idx]
            if d.name not in row:
                raise LaggardError(f"modifier value missing: {d.name!r}")
            v = row[d.name]
            if d.kind == "continuous":
                node = node.left if v <= node.threshold else node.right
            else:
                node = node.left if v in node.subset else node.right
        for i, leaf in enumerate(self.leaves()):
            if leaf is node:
                return i
        raise AssertionError("leaf not found")

    def assign_all(self, columns: dict) -> np.ndarray:
        """Vectorized leaf assignment; columns maps modifier name -> value array."""
        n = len(next(iter(columns.values())))
        out = np.zeros(n, dtype=np.int64)

        def visit(node, mask):
            if node.is_leaf:
                out[mask] = visit.counter
                visit.counter += 1
                return
            d = self.defs[node.mod_idx]
            v = columns[d.name]
            if d.kind == "continuous":
                left = mask & (v <= node.threshold)
            else:
                left = mask & np.isin(v, np.array(node.subset, dtype=np.int64))
            visit(node.left, left)
            visit(node.right, mask & ~left)

        visit.counter = 0
        visit(self.root, np.ones(n, dtype=bool))
        return out

    def to_record(self) -> list:
        rec = []

        def visit(node):
            if node.is_leaf:
                payload = node.payload
                if isinstance(payload, DlmTree):
                    rec.append({"payload": "dlm", "tree": payload.to_record()})
                elif isinstance(payload, TreePair):
                    rec.append({"payload": "pair", "pair": payload.to_record()})
                else:
                    rec.append({"payload": None})
            else:
                d = self.defs[node.mod_idx]
                entry = {"modifier": node.mod_idx, "name": d.name}
                if d.kind == "continuous":
                    entry["threshold"] = node.threshold
                else:
                    entry["subset"] = list(node.subset)
                rec.append(entry)
                visit(node.left)
                visit(node.right)

        visit(self.root)
        return rec

    @classmethod
    def from_record(cls, defs, T: int, rec: list) -> "ModifierTree":
        it = iter(rec)

        def build():
            entry = next(it)
            if "modifier" in entry:
                node = ModNode(mod_idx=entry["modifier"])
                if "threshold" in entry:
                    node.threshold = entry["threshold"]
                else:
                    node.subset = tuple(entry["subset"])
                node.left = build()
                node.right = build()
                return node
            leaf = ModNode()
            if entry["payload"] == "dlm":
                leaf.payload = DlmTree.from_record(T, entry["tree"])
            elif entry["payload"] == "pair":
                leaf.payload = TreePair.from_record(T, entry["pair"])
            return leaf

        return cls(tuple(defs), build())


def assign_subgroup(mod_tree: ModifierTree, row: dict) -> int:
    return mod_tree.assign(row)


def _child_constraints(tree: ModifierTree, node: ModNode, constraints: dict):
    d = tree.defs[node.mod_idx]
    left_c, right_c = dict(constraints), dict(constraints)
    if d.kind == "continuous":
        lo, hi = constraints.get(node.mod_idx, (-math.inf, math.inf))
        left_c[node.mod_idx] = (lo, node.threshold)
        right_c[node.mod_idx] = (node.threshold, hi)
    else:
        avail = constraints.get(node.mod_idx, frozenset(range(d.n_levels)))
        inside = avail & frozenset(node.subset)
        left_c[node.mod_idx] = inside
        right_c[node.mod_idx] = avail - inside
    return left_c, right_c


def _leaf_growable(tree: ModifierTree, constraints: dict) -> bool:
    return any(tree.eligible_splits(m, constraints) for m in range(len(tree.defs)))


def _pick_modifier(elig_mods, mod_weights, rng) -> int:
    """Choose a modifier from the eligible set, renormalizing the weights.

    The same conditional distribution defines the tree prior's rule
    choice, so the weight factors cancel between the prior and proposal
    ratios and never appear in the acceptance computation.
    """
    if mod_weights is None:
        return elig_mods[int(rng.integers(len(elig_mods)))]
    w = np.asarray([mod_weights[m] for m in elig_mods], dtype=np.float64)
    w /= w.sum()
    return int(rng.choice(np.asarray(elig_mods, dtype=np.int64), p=w))


def propose_modifier_move(
    tree: ModifierTree, rng: np.random.Generator, params: TreePriorParams, mod_weights=None
) -> Proposal | None:
    """Propose a grow, prune, or change move on a modifier tree.

    Returns None when no move is possible (no eligible splits anywhere).
    On grow, the new right leaf's payload is None and must be drawn
    fresh by the caller; on prune, the merged leaf keeps the left
    child's payload. ``mod_weights`` biases which modifier a new split
    uses (default uniform).
    """
    leaves = tree.leaves_with_context()
    growable = [
        (i, n, d, c)
        for i, (n, d, c) in enumerate(leaves)
        if any(tree.eligible_splits(m, c) for m in range(len(tree.defs)))
    ]
    internals = tree.internals_with_context()
    prunable = [
        (i, n, d, c)
        for i, (n, d, c) in enumerate(internals)
        if n.left.is_leaf and n.right.is_leaf
    ]
    if not growable and not prunable:
        return None
    probs = _kind_probs({GROW: bool(growable), PRUNE: bool(prunable), CHANGE: bool(prunable)})
    kind = _pick_kind(probs, rng)
    new = tree.copy()

    if kind == GROW:
        pick = int(rng.integers(len(growable)))
        ref_i, _, depth, constraints = growable[pick]
        node = new.leaves()[ref_i]
        elig_mods = [m for m in range(len(tree.defs)) if tree.eligible_splits(m, constraints)]
        m = _pick_modifier(elig_mods, mod_weights, rng)
        cands = tree.eligible_splits(m, constraints)
        ci = cands[int(rng.integers(len(cands)))]
        _apply_mod_split(new, node, m, ci)
        new_leaf = node.right
        new_prunable = sum(
            1 for n, _ in new.internals_with_depth() if n.left.is_leaf and n.right.is_leaf
        )
        new_growable = sum(
            1
            for _, _, c in new.leaves_with_context()
            if any(new.eligible_splits(mm, c) for mm in range(len(new.defs)))
        )
        new_probs = _kind_probs({GROW: new_growable > 0, PRUNE: True, CHANGE: True})
        log_q_fwd = (
            math.log(probs[GROW])
            - math.log(len(growable))
            - math.log(len(elig_mods))
            - math.log(len(cands))
        )
        log_q_rev = math.log(new_probs[PRUNE]) - math.log(new_prunable)
        p_d, p_d1 = params.p_split(depth), params.p_split(depth + 1)
        left_c, right_c = _child_constraints(new, node, constraints)
        log_prior = (
            math.log(p_d)
            - math.log(len(elig_mods))
            - math.log(len(cands))
            - math.log1p(-p_d)
        )
        if _leaf_growable(new, left_c):
            log_prior += math.log1p(-p_d1)
        if _leaf_growable(new, right_c):
            log_prior += math.log1p(-p_d1)
        return Proposal(GROW, new, log_q_rev - log_q_fwd, log_prior, new_leaf=new_leaf)

    if kind == PRUNE:
        pick = int(rng.integers(len(prunable)))
        ref_i, ref_node, depth, constraints = prunable[pick]
        node = [n for n, _, _ in new.internals_with_context()][ref_i]
        elig_mods = [m for m in range(len(tree.defs)) if tree.eligible_splits(m, constraints)]
        n_cands = len(tree.eligible_splits(node.mod_idx, constraints))
        left_c, right_c = _child_constraints(tree, ref_node, constraints)
        left_growable = _leaf_growable(tree, left_c)
        right_growable = _leaf_growable(tree, right_c)
        node.payload = node.left.payload  # merged leaf keeps the left payload
        node.mod_idx = None
        node.threshold = None
        node.subset = None
        node.left = None
        node.right = None
        new_growable = sum(
            1
            for _, _, c in new.leaves_with_context()
            if any(new.eligible_splits(mm, c) for mm in range(len(new.defs)))
        )
        new_prunable = sum(
            1 for n, _ in new.internals_with_depth() if n.left.is_leaf and n.right.is_leaf
        )
        new_probs = _kind_probs({GROW: True, PRUNE: new_prunable > 0, CHANGE: new_prunable > 0})
        log_q_fwd = math.log(probs[PRUNE]) - math.log(len(prunable))
        log_q_rev = (
            math.log(new_probs[GROW])
            - math.log(new_growable)
            - math.log(len(elig_mods))
            - math.log(n_cands)
        )
        p_d, p_d1 = params.p_split(depth), params.p_split(depth + 1)
        log_prior = -(
            math.log(p_d) - math.log(len(elig_mods)) - math.log(n_cands) - math.log1p(-p_d)
        )
        if left_growable:
            log_prior -= math.log1p(-p_d1)
        if right_growable:
            log_prior -= math.log1p(-p_d1)
        return Proposal(PRUNE, new, log_q_rev - log_q_fwd, log_prior)

    # change: redraw rule at an internal node with two leaf children
    pick = int(rng.integers(len(prunable)))
    ref_i, ref_node, depth, constraints = prunable[pick]
    node = [n for n, _, _ in new.internals_with_context()][ref_i]
    p_d1 = params.p_split(depth + 1)
    old_l, old_r = _child_constraints(tree, ref_node, constraints)
    old_factors = _leaf_growable(tree, old_l) + _leaf_growable(tree, old_r)
    elig_mods = [m for m in range(len(tree.defs)) if tree.eligible_splits(m, constraints)]
    m = _pick_modifier(elig_mods, mod_weights, rng)
    cands = tree.eligible_splits(m, constraints)
    ci = cands[int(rng.integers(len(cands)))]
    left_payload, right_payload = node.left.payload, node.right.payload
    _set_mod_rule(new, node, m, ci)
    node.left.payload = left_payload
    node.right.payload = right_payload
    new_l, new_r = _child_constraints(new, node, constraints)
    old_count = len(tree.eligible_splits(ref_node.mod_idx, constraints))
    new_count = len(cands)
    new_factors = _leaf_growable(new, new_l) + _leaf_growable(new, new_r)
    # rule-choice prior factors cancel against the symmetric proposal except
    # for the candidate-count mismatch between the old and new modifiers
    log_trans = math.log(new_count) - math.log(old_count)
    log_prior = (new_factors - old_factors) * math.log1p(-p_d1) + (
        math.log(old_count) - math.log(new_count)
    )
    return Proposal(CHANGE, new, log_trans, log_prior)


def _apply_mod_split(tree, leaf, mod_idx, cand_idx):
    d = tree.defs[mod_idx]
    leaf.mod_idx = mod_idx
    if d.kind == "continuous":
        leaf.threshold = d.split_candidates[cand_idx]
    else:
        leaf.subset = tuple(d.split_candidates[cand_idx])
    leaf.left = ModNode(payload=leaf.payload)
    leaf.right = ModNode(payload=None)
    leaf.payload = None


def _set_mod_rule(tree, node, mod_idx, cand_idx):
    d = tree.defs[mod_idx]
    node.mod_idx = mod_idx
    node.threshold = None
    node.subset = None
    if d.kind == "continuous":
        node.threshold = d.split_candidates[cand_idx]
    else:
        node.subset = tuple(d.split_candidates[cand_idx])
    node.left = ModNode()
    node.right = ModNode()
