"""Tree structures, priors, and Metropolis-Hastings proposal bookkeeping.

The proposal-ratio checks run the move kernel with the likelihood switched
off: a correctly balanced sampler must then reproduce the generative tree
prior, which we can enumerate exhaustively for small lag counts and sample
forward independently for modifier trees.
"""

import json
import math

import numpy as np
import pytest

from laggard.data import ModifierDef
from laggard.trees import (
    DlmNode,
    DlmTree,
    ModifierTree,
    TreePair,
    TreePriorParams,
    dlm_log_gen_prior,
    draw_dlm_topology,
    ensemble_theta,
    evaluate_dlm_tree,
    pair_effects,
    propose_modifier_move,
    propose_move,
    tree_log_prior,
)

PARAMS = TreePriorParams()


def enumerate_dlm_trees(lo: int, hi: int, depth: int = 0) -> list[DlmNode]:
    """All DLM trees on the lag interval [lo, hi]."""
    out = [DlmNode(lo, hi)]
    for split in range(lo, hi):
        for left in enumerate_dlm_trees(lo, split, depth + 1):
            for right in enumerate_dlm_trees(split + 1, hi, depth + 1):
                out.append(DlmNode(lo, hi, split=split, left=left.copy(), right=right.copy()))
    return out


def tree_key(tree: DlmTree) -> tuple:
    """Full topology key (distinct trees can share a terminal partition)."""

    def visit(node):
        if node.is_leaf:
            return (node.lo, node.hi)
        return (node.lo, node.hi, node.split, visit(node.left), visit(node.right))

    return visit(tree.root)


class TestDlmTree:
    def test_partition_and_theta(self):
        tree = DlmTree(6)
        prop_space = enumerate_dlm_trees(1, 6)
        assert len(prop_space) > 1
        tree.validate_partition()
        root = DlmNode(1, 6, split=3, left=DlmNode(1, 3), right=DlmNode(4, 6))
        tree = DlmTree(6, root)
        tree.set_effects([1.0, -2.0])
        np.testing.assert_array_equal(tree.theta(), [1, 1, 1, -2, -2, -2])
        assert evaluate_dlm_tree(tree, 3) == 1.0
        assert evaluate_dlm_tree(tree, 4) == -2.0

    def test_record_round_trip(self):
        rng = np.random.Generator(np.random.Philox(4))
        for _ in range(20):
            tree = draw_dlm_topology(9, PARAMS, rng)
            tree.set_effects(rng.standard_normal(tree.n_terminals))
            rebuilt = DlmTree.from_record(9, json.loads(json.dumps(tree.to_record())))
            np.testing.assert_array_equal(rebuilt.theta(), tree.theta())
            assert tree_key(rebuilt) == tree_key(tree)

    def test_ensemble_theta_sums_trees(self):
        t1 = DlmTree(4)
        t1.set_effects([1.0])
        root = DlmNode(1, 4, split=2, left=DlmNode(1, 2), right=DlmNode(3, 4))
        t2 = DlmTree(4, root)
        t2.set_effects([0.5, -0.5])
        np.testing.assert_array_equal(ensemble_theta([t1, t2], 4), [1.5, 1.5, 0.5, 0.5])


class TestTreeLogPrior:
    def test_root_only_matches_no_split_probability(self):
        assert tree_log_prior(DlmTree(10), PARAMS) == pytest.approx(math.log(0.05))

    def test_depth_one_complete_tree(self):
        root = DlmNode(1, 4, split=2, left=DlmNode(1, 2), right=DlmNode(3, 4))
        expected = math.log(0.95) + 2 * math.log(1 - 0.95 * 2 ** (-2.0))
        assert tree_log_prior(DlmTree(4, root), PARAMS) == pytest.approx(expected)

    def test_each_extra_split_lowers_the_prior(self):
        depth1 = DlmTree(8, DlmNode(1, 8, split=4, left=DlmNode(1, 4), right=DlmNode(5, 8)))
        deeper_left = DlmNode(1, 4, split=2, left=DlmNode(1, 2), right=DlmNode(3, 4))
        depth2 = DlmTree(8, DlmNode(1, 8, split=4, left=deeper_left, right=DlmNode(5, 8)))
        assert tree_log_prior(depth2, PARAMS) < tree_log_prior(depth1, PARAMS)


class TestGenerativePrior:
    @pytest.mark.parametrize("T", [2, 3, 4, 5])
    def test_normalizes_over_the_full_tree_space(self, T):
        total = sum(
            math.exp(dlm_log_gen_prior(DlmTree(T, root), PARAMS))
            for root in enumerate_dlm_trees(1, T)
        )
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_forward_sampler_matches_enumerated_prior(self):
        T = 4
        space = {tree_key(DlmTree(T, r)): math.exp(dlm_log_gen_prior(DlmTree(T, r), PARAMS))
                 for r in enumerate_dlm_trees(1, T)}
        rng = np.random.Generator(np.random.Philox(11))
        n = 40_000
        counts = {}
        for _ in range(n):
            k = tree_key(draw_dlm_topology(T, PARAMS, rng))
            counts[k] = counts.get(k, 0) + 1
        for key, p in space.items():
            se = math.sqrt(p * (1 - p) / n)
            assert abs(counts.get(key, 0) / n - p) < 4 * se + 1e-4, key

    def test_prior_only_mcmc_reproduces_the_prior(self):
        """With the likelihood off, MH acceptance uses only prior and
        transition ratios; the chain must converge to the generative prior.
        This is the end-to-end check of the grow/prune/change bookkeeping."""
        T = 4
        space = {tree_key(DlmTree(T, r)): math.exp(dlm_log_gen_prior(DlmTree(T, r), PARAMS))
                 for r in enumerate_dlm_trees(1, T)}
        rng = np.random.Generator(np.random.Philox(23))
        tree = DlmTree(T)
        n = 60_000
        counts = {}
        for _ in range(n):
            prop = propose_move(tree, rng, PARAMS)
            if math.log(rng.random()) < prop.log_prior_ratio + prop.log_trans_ratio:
                tree = prop.tree
            k = tree_key(tree)
            counts[k] = counts.get(k, 0) + 1
        # autocorrelated chain: generous tolerance, but all 15 topologies must
        # appear with frequencies near their prior mass
        assert set(counts) == set(space)
        for key, p in space.items():
            assert abs(counts[key] / n - p) < 0.015, (key, counts[key] / n, p)

    def test_consistency_between_gen_prior_and_plain_prior_on_saturated_space(self):
        # for T=2 the only leaf constraint is at depth 1 (length-1 leaves
        # cannot split), so both priors rank the two trees identically
        leaf_only = DlmTree(2)
        split = DlmTree(2, DlmNode(1, 2, split=1, left=DlmNode(1, 1), right=DlmNode(2, 2)))
        assert dlm_log_gen_prior(leaf_only, PARAMS) == pytest.approx(math.log(0.05))
        assert dlm_log_gen_prior(split, PARAMS) == pytest.approx(math.log(0.95))
        assert tree_log_prior(leaf_only, PARAMS) < tree_log_prior(split, PARAMS)


class TestProposals:
    def test_root_only_tree_can_only_grow(self):
        rng = np.random.Generator(np.random.Philox(3))
        for _ in range(50):
            prop = propose_move(DlmTree(5), rng, PARAMS)
            assert prop.kind == "grow"
            assert prop.tree.n_terminals == 2

    def test_single_lag_tree_has_no_grow(self):
        rng = np.random.Generator(np.random.Philox(5))
        root = DlmNode(1, 2, split=1, left=DlmNode(1, 1), right=DlmNode(2, 2))
        kinds = {propose_move(DlmTree(2, root), rng, PARAMS).kind for _ in range(100)}
        # both leaves are length 1: only prune is possible (change would
        # redraw the same split)
        assert "grow" not in kinds

    def test_proposals_never_mutate_the_input(self):
        rng = np.random.Generator(np.random.Philox(7))
        tree = draw_dlm_topology(8, PARAMS, rng)
        key = tree_key(tree)
        for _ in range(200):
            propose_move(tree, rng, PARAMS)
            assert tree_key(tree) == key

    def test_proposed_trees_are_valid_partitions(self):
        rng = np.random.Generator(np.random.Philox(9))
        tree = DlmTree(7)
        for _ in range(500):
            prop = propose_move(tree, rng, PARAMS)
            prop.tree.validate_partition()
            tree = prop.tree


class TestTreePair:
    def test_omega_tracks_terminal_dimensions(self):
        pair = TreePair(6, 0, 1, interacting=True)
        assert pair.omega.shape == (1, 1)
        root = DlmNode(1, 6, split=3, left=DlmNode(1, 3), right=DlmNode(4, 6))
        pair.tree1 = DlmTree(6, root)
        pair.resize_omega()
        pair.check_omega()
        assert pair.omega.shape == (2, 1)

    def test_pair_effects_paints_dense_grid(self):
        pair = TreePair(4, 0, 1, interacting=True)
        root = DlmNode(1, 4, split=2, left=DlmNode(1, 2), right=DlmNode(3, 4))
        pair.tree1 = DlmTree(4, root)
        pair.resize_omega()
        pair.tree1.set_effects([1.0, 2.0])
        pair.tree2.set_effects([3.0])
        pair.omega = np.array([[0.5], [0.25]])
        main1, main2, grid = pair_effects(pair, 4)
        np.testing.assert_array_equal(main1, [1, 1, 2, 2])
        np.testing.assert_array_equal(main2, [3, 3, 3, 3])
        expected = np.repeat([[0.5], [0.25]], 2, axis=0) @ np.ones((1, 4))
        np.testing.assert_array_equal(grid, expected)

    def test_record_round_trip(self):
        rng = np.random.Generator(np.random.Philox(13))
        pair = TreePair(5, 1, 0, interacting=True)
        pair.tree1 = draw_dlm_topology(5, PARAMS, rng)
        pair.tree2 = draw_dlm_topology(5, PARAMS, rng)
        pair.resize_omega()
        pair.omega = rng.standard_normal(pair.omega.shape)
        rebuilt = TreePair.from_record(5, json.loads(json.dumps(pair.to_record())))
        assert rebuilt.exposure1 == 1 and rebuilt.exposure2 == 0
        np.testing.assert_array_equal(rebuilt.omega, pair.omega)
        np.testing.assert_array_equal(rebuilt.tree1.theta(), pair.tree1.theta())


def _modifier_defs():
    return (
        ModifierDef("age", "continuous", (30.0, 40.0, 50.0)),
        ModifierDef("g", "categorical", ((0,), (0, 1)), n_levels=3),
    )


def mod_tree_key(tree: ModifierTree) -> str:
    rec = tree.to_record()
    for entry in rec:
        entry.pop("payload", None)
    return json.dumps(rec, sort_keys=True)


def draw_modifier_topology_forward(defs, params, rng) -> ModifierTree:
    """Independent forward sampler from the generative modifier-tree prior."""
    from laggard.trees import ModNode, _child_constraints

    tree = ModifierTree(defs, ModNode())

    def grow(node, depth, constraints):
        # rule choice is modifier-first: uniform over eligible modifiers,
        # then uniform over that modifier's eligible candidates
        eligible = {
            i: tree.eligible_splits(i, constraints)
            for i in range(len(defs))
            if tree.eligible_splits(i, constraints)
        }
        if not eligible or rng.random() >= params.p_split(depth):
            return
        mods = sorted(eligible)
        mod_idx = mods[rng.integers(len(mods))]
        cands = eligible[mod_idx]
        cand = cands[rng.integers(len(cands))]
        d = defs[mod_idx]
        node.mod_idx = mod_idx
        if d.kind == "continuous":
            node.threshold = d.split_candidates[cand]
        else:
            universe = constraints.get(mod_idx, frozenset(range(d.n_levels)))
            node.subset = tuple(sorted(set(d.split_candidates[cand]) & set(universe)))
        node.left, node.right = ModNode(), ModNode()
        for child in (node.left, node.right):
            cc = _child_constraints(tree, node, constraints)
            grow(child, depth + 1, cc[0] if child is node.left else cc[1])

    grow(tree.root, 0, {})
    return tree


class TestModifierTree:
    def test_assignment_routes_rows(self):
        from laggard.trees import ModNode

        defs = _modifier_defs()
        root = ModNode(mod_idx=0, threshold=40.0, left=ModNode(), right=ModNode())
        tree = ModifierTree(defs, root)
        assert tree.assign({"age": 35.0, "g": 0}) == 0
        assert tree.assign({"age": 45.0, "g": 0}) == 1
        cols = {"age": np.array([35.0, 45.0, 40.0]), "g": np.array([0, 1, 2])}
        np.testing.assert_array_equal(tree.assign_all(cols), [0, 1, 0])

    def test_eligible_splits_respect_constraints(self):
        defs = _modifier_defs()
        tree = ModifierTree(defs)
        assert tree.eligible_splits(0, {0: (30.0, 50.0)}) == [1]
        assert tree.eligible_splits(1, {1: frozenset({0, 1})}) == [0]
        assert tree.eligible_splits(1, {1: frozenset({2})}) == []

    def test_prior_only_mcmc_matches_forward_sampler(self):
        """Modifier-tree move kernel balance: a likelihood-free chain must
        match the forward generative sampler's topology distribution."""
        defs = _modifier_defs()
        rng = np.random.Generator(np.random.Philox(31))
        fwd_counts = {}
        n = 30_000
        for _ in range(n):
            k = mod_tree_key(draw_modifier_topology_forward(defs, PARAMS, rng))
            fwd_counts[k] = fwd_counts.get(k, 0) + 1

        tree = ModifierTree(defs)
        mcmc_counts = {}
        for _ in range(n):
            prop = propose_modifier_move(tree, rng, PARAMS)
            if prop is not None and math.log(rng.random()) < (
                prop.log_prior_ratio + prop.log_trans_ratio
            ):
                tree = prop.tree
            k = mod_tree_key(tree)
            mcmc_counts[k] = mcmc_counts.get(k, 0) + 1

        # compare frequencies of every topology with forward mass >= 1%
        for key, c in fwd_counts.items():
            p = c / n
            if p < 0.01:
                continue
            q = mcmc_counts.get(key, 0) / n
            assert abs(p - q) < 0.02, (key, p, q)

    def test_grow_keeps_left_payload_and_prune_keeps_left(self):
        defs = _modifier_defs()
        rng = np.random.Generator(np.random.Philox(37))
        tree = ModifierTree(defs)
        payload = DlmTree(5)
        tree.root.payload = payload
        grew = None
        for _ in range(100):
            prop = propose_modifier_move(tree, rng, PARAMS)
            if prop is not None and prop.kind == "grow":
                grew = prop
                break
        assert grew is not None
        leaves = grew.tree.leaves()
        assert leaves[0].payload is not None  # left inherits
        assert grew.new_leaf.payload is None  # right is fresh

    def test_record_round_trip_with_payloads(self):
        from laggard.trees import ModNode

        defs = _modifier_defs()
        left, right = ModNode(), ModNode()
        left.payload = DlmTree(4)
        left.payload.set_effects([1.5])
        pair = TreePair(4, 0, 1, interacting=True)
        pair.omega = np.array([[2.0]])
        right.payload = pair
        root = ModNode(mod_idx=1, subset=(0,), left=left, right=right)
        tree = ModifierTree(defs, root)
        rebuilt = ModifierTree.from_record(defs, 4, json.loads(json.dumps(tree.to_record())))
        assert rebuilt.leaves()[0].payload.theta()[0] == 1.5
        np.testing.assert_array_equal(rebuilt.leaves()[1].payload.omega, [[2.0]])
