"""
Unit tests for the closed-form hardcore and colouring node constants.
"""

import unittest

from spinfactor.exceptions import DomainError, InputValidationError
from spinfactor.models.graph import complete_graph, star_graph
from spinfactor.models.spin_system import uniform_coloring
from spinfactor.services.exact_engine import enumerate_gibbs
from spinfactor.services.model_constants import (
    COLORING_BLOCK_TAG,
    COLORING_SPLIT_TAG,
    HARDCORE_BLOCK_TAG,
    HARDCORE_SPLIT_TAG,
    check_coloring_slack,
    coloring_marginal_lower_bound,
    coloring_node_constants,
    effective_degree,
    hardcore_node_constants,
    min_conditional_marginal,
)
from tests.test_config import hardcore_path, triangle_coloring


class TestHardcoreConstants(unittest.TestCase):
    """Test cases for the hardcore closed forms."""

    def setUp(self) -> None:
        """Set up test fixtures."""
        self.sys = hardcore_path(5, 1.0)

    def test_separator_constants(self) -> None:
        """Test C_US = 2 (1 + lambda)^|S| and C_S = (1 + lambda)^(|S| - 1)."""
        constants = hardcore_node_constants(self.sys, range(5), [2])
        self.assertEqual(constants.c_us, 4.0)
        self.assertEqual(constants.c_s, 1.0)
        self.assertEqual(constants.split_tag, HARDCORE_SPLIT_TAG)
        self.assertEqual(constants.block_tag, HARDCORE_BLOCK_TAG)

    def test_block_size_override(self) -> None:
        """Test C_S for a ball larger than the separator."""
        constants = hardcore_node_constants(hardcore_path(5, 2.0), range(5), [1, 3], block_size=4)
        self.assertEqual(constants.c_us, 18.0)
        self.assertEqual(constants.c_s, 27.0)
        self.assertEqual(constants.to_dict()["C_S"], 27.0)

    def test_wrong_model(self) -> None:
        """Test that colourings are rejected."""
        with self.assertRaises(DomainError):
            hardcore_node_constants(triangle_coloring(4), range(3), [0])

    def test_separator_outside_node(self) -> None:
        """Test that S must lie inside U."""
        with self.assertRaises(InputValidationError):
            hardcore_node_constants(self.sys, [0, 1], [3])


class TestColoringConstants(unittest.TestCase):
    """Test cases for the colouring closed forms."""

    def setUp(self) -> None:
        """Set up test fixtures."""
        self.triangle = triangle_coloring(4)

    def test_effective_degree(self) -> None:
        """Test that Delta is at least three."""
        self.assertEqual(effective_degree(self.triangle), 3)
        self.assertEqual(effective_degree(uniform_coloring(star_graph(4), 6)), 4)

    def test_constants(self) -> None:
        """Test base 2^Delta q for the triangle with four colours."""
        constants = coloring_node_constants(self.triangle, range(3), [0], block_size=3)
        self.assertEqual(constants.c_us, 64.0)
        self.assertEqual(constants.c_s, 1024.0)
        self.assertEqual(constants.split_tag, COLORING_SPLIT_TAG)
        self.assertEqual(constants.block_tag, COLORING_BLOCK_TAG)

    def test_explicit_delta_and_q(self) -> None:
        """Test overriding Delta and q."""
        constants = coloring_node_constants(self.triangle, range(3), [0, 1], delta=4, q=5)
        self.assertEqual(constants.c_us, 2.0 * 80.0 ** 2)
        self.assertEqual(constants.c_s, 80.0)

    def test_slack_required(self) -> None:
        """Test that lists below deg + 2 are a domain error."""
        tight = uniform_coloring(complete_graph(3), 3)
        with self.assertRaises(DomainError):
            check_coloring_slack(tight)
        with self.assertRaises(DomainError):
            coloring_node_constants(tight, range(3), [0])

    def test_marginal_lower_bound(self) -> None:
        """Test the marginal lower bound formula."""
        self.assertAlmostEqual(coloring_marginal_lower_bound(2, 3), 1.0 / 24.0)
        self.assertAlmostEqual(coloring_marginal_lower_bound(4, 6), 1.0 / 96.0)
        with self.assertRaises(InputValidationError):
            coloring_marginal_lower_bound(2, 0)

    def test_measured_marginals_respect_bound(self) -> None:
        """Test measured minimum marginals against the bound."""
        for q in (3, 4):
            table = enumerate_gibbs(uniform_coloring(complete_graph(3), q))
            witness = min_conditional_marginal(table)
            self.assertGreaterEqual(witness.value, coloring_marginal_lower_bound(2, q))
        table = enumerate_gibbs(uniform_coloring(complete_graph(3), 3))
        self.assertAlmostEqual(min_conditional_marginal(table).value, 1.0 / 3.0)


if __name__ == "__main__":
    unittest.main()
