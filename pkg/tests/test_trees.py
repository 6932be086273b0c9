"""
Tests for tree enumeration, tree values and the zero-momentum cancellation
"""
import time
from fractions import Fraction

import numpy as np
import pytest

from errors import ZeroDivisorLine
from model import ALPHA, BETA, FULL
from oracle import solve_to_order
from trees import (Leaf, LabeledTree, Node, TreeEnumerator, TreeEvaluator, bare_propagator, enumerate_trees,
                   family_key, is_excluded_counterterm, leaf_factor, leaf_factors, mirror, reroot,
                   root_shift_family, semitopological_sum, sum_tree_values, symmetry_factor, tree_dump,
                   tree_value, verify_zero_momentum_cancellation)
from utils import mode_ball


@pytest.fixture(scope="module")
def labeled(ref1):
    return TreeEnumerator(ref1)


@pytest.fixture(scope="module")
def collapsed(ref1):
    return TreeEnumerator(ref1, collapsed=True)


@pytest.fixture(scope="module")
def formal(ref1):
    return solve_to_order(ref1, 5)


class TestNodes:
    def test_children_are_canonical(self):
        a = Node((1, 0), ALPHA, (Leaf(1), Node((0, 1), BETA)))
        b = Node((1, 0), ALPHA, (Node((0, 1), BETA), Leaf(1)))
        assert a == b and hash(a) == hash(b)

    def test_order_and_momentum(self):
        node = Node((1, 0), ALPHA, (Leaf(2), Node((1, 1), BETA)))
        assert node.order == 4
        assert node.momentum == (2, 1)

    def test_symmetry_factor(self):
        twin = Node((1, 0), ALPHA)
        assert symmetry_factor(Node((0, 0), BETA, (Leaf(1), Leaf(1)))) == Fraction(1, 2)
        assert symmetry_factor(Node((0, 0), BETA, (twin, twin, twin))) == Fraction(1, 6)
        inner = Node((1, 0), ALPHA, (Leaf(1), Leaf(1)))
        assert symmetry_factor(Node((0, 0), BETA, (inner, inner))) == Fraction(1, 8)

    def test_vertices_and_dump(self):
        tree = LabeledTree(Node((1, 0), ALPHA, (Leaf(1), Node((0, 1), BETA))))
        kinds = [v.kind for v in tree.vertices()]
        assert sorted(kinds) == ['leaf', 'node', 'node']
        assert tree.node_count == 2
        assert tree.p_q_delta(0) == (0, 2, 0)
        lines = tree_dump(tree)
        assert lines[0].startswith("node #0 nu=(1, 0) gamma=alpha")
        assert len(lines) == 3


class TestEnumeration:
    def test_pruning(self, ref1, labeled):
        assert labeled.trees(1, (1, 0), BETA) == []
        assert len(labeled.trees(1, (1, 0), ALPHA)) == 1
        assert len(TreeEnumerator(ref1, prune=False).trees(1, (1, 0), BETA)) == 1

    def test_support_bound(self, labeled):
        assert labeled.trees(1, (2, 0), ALPHA) == []
        assert labeled.trees(2, (5, 0), ALPHA) == []

    def test_counterterm_tree(self, labeled):
        trees = labeled.trees(2, (0, 0), BETA)
        excluded = [t for t in trees if is_excluded_counterterm(t, 1)]
        assert len(excluded) == 1
        assert excluded[0].root.children == (Leaf(1),)

    def test_leafless(self, ref1):
        enumerator = TreeEnumerator(ref1, leaves=False)
        for tree in enumerator.trees(3, (1, 0), ALPHA):
            assert all(v.kind == 'node' for v in tree.vertices())

    def test_representatives_are_distinct(self, collapsed):
        trees = collapsed.trees(3, (1, 1), FULL)
        assert len({t.key for t in trees}) == len(trees) > 0

    def test_enumerate_trees_defaults(self, ref1, labeled, collapsed):
        assert enumerate_trees(ref1, 2, (1, 1), ALPHA) == labeled.trees(2, (1, 1), ALPHA)
        assert enumerate_trees(ref1, 2, (1, 1), FULL) == collapsed.trees(2, (1, 1), FULL)

    def test_fourth_order_enumeration_time(self, ref1):
        enumerator = TreeEnumerator(ref1)
        start = time.perf_counter()
        count = sum(len(enumerator.trees(4, nu, gamma))
                    for nu in mode_ball(ref1.r, 4 * ref1.nf, include_zero=True) for gamma in (ALPHA, BETA))
        elapsed = time.perf_counter() - start
        assert count > 0
        assert elapsed <= 10.0, f"{count} trees in {elapsed:.2f} s"

    def test_invalid_requests(self, labeled):
        with pytest.raises(ValueError):
            labeled.trees(0, (1, 0), ALPHA)
        with pytest.raises(ValueError):
            labeled.trees(1, (1, 0), FULL)


class TestTreeValues:
    @pytest.mark.parametrize("gamma", [ALPHA, BETA, FULL])
    def test_tree_sums_reproduce_the_recursion(self, ref1, formal, labeled, collapsed, gamma):
        enumerator = collapsed if gamma == FULL else labeled
        slot = ref1.gamma_slice(gamma)
        source = formal.leaf_source()
        for k in range(1, 5):
            scale = formal.h.max_at_order(k)
            for nu in mode_ball(ref1.r, k * ref1.nf):
                value = sum_tree_values(ref1, k, nu, gamma, source, enumerator)
                expected = formal.h.get(k, nu)[slot]
                assert np.max(np.abs(value - expected)) <= 1e-10 * scale, f"k={k}, nu={nu}, gamma={gamma}"

    def test_leaf_factors_match_the_recursion(self, ref1, formal):
        source = leaf_factors(ref1, 2)
        for kappa in (1, 2):
            np.testing.assert_allclose(source[kappa], formal.b0_sequence[kappa], rtol=1e-10, atol=1e-14)

    @pytest.mark.parametrize("gamma,nu", [(ALPHA, (1, 1)), (BETA, (2, 1)), (FULL, (0, 1))])
    def test_semitopological_sum(self, ref1, formal, gamma, nu):
        source = formal.leaf_source()
        brute = semitopological_sum(ref1, 2, nu, gamma, source)
        canonical = sum_tree_values(ref1, 2, nu, gamma, source)
        np.testing.assert_allclose(brute, canonical, rtol=1e-12, atol=1e-14)

    def test_mirror_conjugates(self, ref1, formal, labeled):
        evaluator = TreeEvaluator(ref1, formal.leaf_source())
        for tree in labeled.trees(3, (2, 1), ALPHA):
            value = evaluator.value(tree).value
            np.testing.assert_allclose(evaluator.value(mirror(tree)).value, np.conj(value),
                                       rtol=1e-12, atol=1e-14)

    def test_reduced_value_drops_the_root_propagator(self, ref1, labeled):
        evaluator = TreeEvaluator(ref1, {})
        tree = labeled.trees(1, (1, 1), ALPHA)[0]
        x = ref1.frequency.dot((1, 1))
        np.testing.assert_allclose(evaluator.value(tree, reduced=True).value,
                                   evaluator.value(tree).value * x ** 2, rtol=1e-14)

    def test_single_node_value(self, ref1):
        x = ref1.frequency.dot((1, 1))
        result = tree_value(ref1, LabeledTree(Node((1, 1), ALPHA)), {})
        np.testing.assert_allclose(result.value, np.full(2, 0.5j) / x ** 2, rtol=1e-14)
        assert result.combinatorial_factor == 1

    def test_first_leaf_factor(self, ref1, formal):
        np.testing.assert_allclose(leaf_factor(ref1, 1, {}), formal.b0_sequence[1], rtol=1e-10, atol=1e-14)

    def test_missing_leaf_factor(self, ref1):
        evaluator = TreeEvaluator(ref1, {})
        with pytest.raises(ValueError):
            evaluator.value(LabeledTree(Node((1, 0), ALPHA, (Leaf(1),))))

    def test_bare_propagator(self, ref1):
        np.testing.assert_allclose(bare_propagator(ref1, 2.0), np.eye(3) / 4)
        with pytest.raises(ZeroDivisorLine):
            bare_propagator(ref1, 0.0)


class TestCancellation:
    def test_zero_momentum_alpha_trees_cancel(self, ref1, formal, labeled):
        for k in (2, 3, 4):
            report = verify_zero_momentum_cancellation(ref1, k, formal.leaf_source(), labeled)
            assert report.tree_count > 0
            assert report.relative <= 1e-12, f"order {k}: relative sum {report.relative:.3e}"
            # each root-shift family cancels on its own
            assert report.worst_family <= 1e-12, f"order {k}: worst family {report.worst_family:.3e}"

    def test_root_shift_family(self):
        tree = LabeledTree(Node((1, 0), ALPHA, (Node((-1, 0), ALPHA),)))
        family = root_shift_family(tree)
        assert len(family) == 2
        assert tree in family
        assert family_key(family[0]) == family_key(family[1])

    def test_reroot_keeps_lines(self):
        tree = LabeledTree(Node((1, 0), ALPHA, (Leaf(1), Node((-1, 0), BETA))))
        moved = reroot(tree, 2, BETA)
        assert moved.root.nu == (-1, 0)
        assert moved.node_count == 2
        assert moved.momentum == tree.momentum
        with pytest.raises(ValueError):
            reroot(tree, 1)
