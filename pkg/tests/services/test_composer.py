"""
Unit tests for the FactorisationComposer and the multiplier audits.
"""

import math
import unittest
from dataclasses import replace
from unittest.mock import patch

from spinfactor.exceptions import CompositionError, InputValidationError, ResourceLimitError
from spinfactor.models.graph import complete_graph, path_graph
from spinfactor.services.composer import (
    LEAF_TAG,
    SINGLE_SITE_TAG,
    TRIVIAL_COVER_TAG,
    FactorisationComposer,
    audit_multiplier,
    audit_report,
    compose_at,
    coverage_bound,
)
from spinfactor.services.decomposition import build_separator_tree, subtree_separator_tree
from spinfactor.services.exact_engine import enumerate_gibbs, optimal_at_variance_constant
from spinfactor.services.model_constants import COLORING_BLOCK_TAG, HARDCORE_SPLIT_TAG
from tests.test_config import hardcore_path, triangle_coloring


class TestCoverageBound(unittest.TestCase):
    """Test cases for the coverage factor A."""

    def setUp(self) -> None:
        """Set up test fixtures."""
        self.tree = build_separator_tree(path_graph(8), budget=1)

    def test_separator_case(self) -> None:
        """Test that r = 0 gives A = 1."""
        self.assertEqual(coverage_bound(2, self.tree, 0, True), (1.0, "separators-partition"))

    def test_minimum_of_bounds(self) -> None:
        """Test the least of the height, balanced-tree and ball bounds."""
        value, source = coverage_bound(2, self.tree, 1, True)
        self.assertEqual(value, 3.0)
        self.assertEqual(source, "degree-ball")
        value, source = coverage_bound(2, self.tree, 5, False)
        self.assertEqual(value, float(self.tree.height + 1))
        self.assertEqual(source, "tree-height")


class TestFactorisationComposer(unittest.TestCase):
    """Test cases for the FactorisationComposer class."""

    def setUp(self) -> None:
        """Set up test fixtures."""
        self.composer = FactorisationComposer()
        self.hardcore = hardcore_path(5, 1.0)
        self.hardcore_tree = build_separator_tree(self.hardcore.graph, budget=1)

    def test_hardcore_separator_composition(self) -> None:
        """Test closed-form constants along the separator tree."""
        report = self.composer.compose_separator(self.hardcore, self.hardcore_tree, "var")
        self.assertEqual(report.coverage_A, 1.0)
        self.assertEqual(report.radius, 0)
        root = report.nodes[0]
        self.assertEqual(root.c_us, 4.0)
        self.assertEqual(root.split_tag, HARDCORE_SPLIT_TAG)
        self.assertEqual(root.c_s, 1.0)
        self.assertEqual(root.block_tag, SINGLE_SITE_TAG)
        leaf = report.nodes[3]
        self.assertEqual(leaf.split_tag, LEAF_TAG)
        self.assertEqual(report.composed_C, 16.0)
        self.assertEqual(report.path_product(report.worst_node), 16.0)

    def test_coloring_ball_composition(self) -> None:
        """Test the triangle with four colours and radius one."""
        sys = triangle_coloring(4)
        tree = build_separator_tree(sys.graph, budget=1)
        report = self.composer.compose(sys, tree, 1, "var")
        self.assertEqual([node.c_s for node in report.nodes], [1024.0, 32.0, 1.0])
        self.assertEqual(report.nodes[0].split_tag, TRIVIAL_COVER_TAG)
        self.assertEqual(report.nodes[0].block_tag, COLORING_BLOCK_TAG)
        self.assertEqual(report.coverage_A, 3.0)
        self.assertEqual(report.composed_C, 3072.0)
        self.assertLessEqual(report.measured_coverage, report.coverage_A)

    def test_exact_strategy_audits(self) -> None:
        """Test that an exact composition passes the random-function audit."""
        sys = hardcore_path(4, 1.0)
        table = enumerate_gibbs(sys)
        composer = FactorisationComposer(["exact-variance"])
        report = composer.compose(sys, build_separator_tree(sys.graph, 1), 0, "var", table)
        self.assertGreaterEqual(report.composed_C, optimal_at_variance_constant(table) - 1e-9)
        summary = composer.audit(report, table, functions=100, seed=2)
        self.assertEqual(summary.violations, 0)
        self.assertTrue(summary.dominates_optimal)
        self.assertTrue(summary.passed)

    def test_entropy_falls_back_to_measured(self) -> None:
        """Test that entropy skips the closed forms."""
        sys = hardcore_path(3, 1.0)
        report = self.composer.compose_separator(sys, build_separator_tree(sys.graph, 1), "ent")
        root = report.nodes[0]
        self.assertEqual(root.split_tag, "measured-strong")
        self.assertIn("split:model-closed-form", root.skipped)
        self.assertTrue(math.isfinite(report.composed_C))

    def test_no_applicable_strategy(self) -> None:
        """Test that exhausting the strategy order raises."""
        composer = FactorisationComposer(["measured-weak"])
        with self.assertRaises(CompositionError) as ctx:
            composer.compose_separator(self.hardcore, self.hardcore_tree, "var")
        self.assertIn("split:measured-weak", ctx.exception.reasons)

    @patch("spinfactor.services.composer.optimal_block_variance_constant")
    def test_eigen_cap_skips_strategy(self, mock_optimal) -> None:
        """Test that an exact table over the eigen cap is a skipped strategy."""
        mock_optimal.side_effect = ResourceLimitError("table has 26250 states", "dense_eigen_cap", 4096)
        composer = FactorisationComposer(["exact-variance"])
        with self.assertRaises(CompositionError) as ctx:
            composer.compose_separator(self.hardcore, self.hardcore_tree, "var")
        reason = ctx.exception.reasons["split:exact-variance"]
        self.assertIn("dense_eigen_cap", reason)
        self.assertTrue(mock_optimal.called)

    @patch("spinfactor.services.composer.optimal_block_variance_constant")
    def test_eigen_cap_falls_through(self, mock_optimal) -> None:
        """Test that a later strategy takes over after the cap is hit."""
        mock_optimal.side_effect = ResourceLimitError("too large", "dense_eigen_cap", 4096)
        composer = FactorisationComposer(["exact-variance", "model-closed-form"])
        report = composer.compose_separator(self.hardcore, self.hardcore_tree, "var")
        root = report.nodes[0]
        self.assertEqual(root.split_tag, HARDCORE_SPLIT_TAG)
        self.assertIn("dense_eigen_cap", root.skipped["split:exact-variance"])

    def test_sampled_pinnings_flagged(self) -> None:
        """Test that sampling pinnings is reported."""
        composer = FactorisationComposer(["exact-variance"], pinning_cap=1, sample_size=1)
        report = composer.compose_separator(self.hardcore, self.hardcore_tree, "var")
        self.assertTrue(report.sampled)
        self.assertTrue(report.to_dict()["sampled"])

    def test_subtree_tree_composition(self) -> None:
        """Test composition on the subtree construction."""
        sys = hardcore_path(4, 0.5)
        report = compose_at(sys, subtree_separator_tree(sys.graph), 0, "var")
        self.assertEqual(len(report.nodes), 4)
        self.assertGreaterEqual(report.composed_C, 1.0)

    def test_report_dict(self) -> None:
        """Test the serialised report shape."""
        report = compose_at(self.hardcore, self.hardcore_tree)
        data = report.to_dict()
        for key in ("kind", "radius_r", "strategy_order", "coverage_A", "coverage_source",
                    "measured_coverage", "composed_C", "worst_node", "tree", "per_node"):
            self.assertIn(key, data)
        self.assertEqual(
            sorted(data["per_node"][0]),
            sorted(["index", "U", "S", "ball", "T", "C_US", "C_S", "split_tag",
                    "block_tag", "sampled", "skipped"]),
        )

    def test_invalid_inputs(self) -> None:
        """Test unknown strategies, kinds and mismatched trees."""
        with self.assertRaises(InputValidationError):
            FactorisationComposer(["guess"])
        with self.assertRaises(InputValidationError):
            self.composer.compose(self.hardcore, self.hardcore_tree, 0, "kl")
        with self.assertRaises(InputValidationError):
            self.composer.compose(self.hardcore, self.hardcore_tree, -1, "var")
        other = build_separator_tree(path_graph(4), 1)
        with self.assertRaises(InputValidationError):
            self.composer.compose(self.hardcore, other, 0, "var")


class TestAuditMultiplier(unittest.TestCase):
    """Test cases for the random-function audit."""

    def test_too_small_constant_is_caught(self) -> None:
        """Test that a constant below the optimum is flagged."""
        table = enumerate_gibbs(hardcore_path(2, 1.0))
        summary = audit_multiplier(table, 1.0, "var", functions=200, seed=0)
        self.assertFalse(summary.dominates_optimal)
        self.assertFalse(summary.passed)
        self.assertAlmostEqual(summary.optimal_constant, 2.0)

    def test_entropy_audit(self) -> None:
        """Test that entropy audits skip the optimal constant."""
        table = enumerate_gibbs(triangle_coloring(4))
        summary = audit_multiplier(table, 3072.0, "ent", functions=50, seed=1)
        self.assertIsNone(summary.optimal_constant)
        self.assertEqual(summary.violations, 0)
        self.assertEqual(summary.to_dict()["functions"], 50)

    def test_coverage_above_bound_fails_audit(self) -> None:
        """Test that a measured coverage above A cannot pass."""
        sys = hardcore_path(5, 1.0)
        table = enumerate_gibbs(sys)
        report = compose_at(sys, build_separator_tree(sys.graph, budget=1))
        self.assertFalse(report.coverage_exceeded)
        self.assertFalse(audit_report(report, table, functions=30, seed=0).coverage_exceeded)

        bad = replace(report, measured_coverage=int(report.coverage_A) + 1)
        self.assertTrue(bad.coverage_exceeded)
        self.assertTrue(bad.to_dict()["coverage_exceeded"])
        summary = audit_report(bad, table, functions=30, seed=0)
        self.assertTrue(summary.coverage_exceeded)
        self.assertFalse(summary.passed)
        self.assertTrue(summary.to_dict()["coverage_exceeded"])


if __name__ == "__main__":
    unittest.main()
