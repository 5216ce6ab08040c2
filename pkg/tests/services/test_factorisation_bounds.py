"""
Unit tests for the factorisation-constant calculators.
"""

import math
import unittest

import numpy as np

from spinfactor.exceptions import InputValidationError
from spinfactor.models.graph import path_graph
from spinfactor.models.spin_system import Pinning, general_system
from spinfactor.services.exact_engine import (
    block_factorization_check,
    enumerate_gibbs,
    optimal_block_variance_constant,
)
from spinfactor.services.factorisation_bounds import (
    TwoBlockView,
    crude_constants,
    crude_multivariable_constant,
    influence_matrix,
    kl_divergence,
    marginal_equivalence_check,
    max_pairwise_tv,
    pinning_level_scan,
    pinsker_step_audit,
    spectral_independence_gap,
    spectral_independence_profile,
    strong_correlation_constant,
    total_variation,
    weak_correlation_constant,
)
from spinfactor.utils.data_processor import DataProcessor, random_test_functions
from tests.test_config import AUDIT_TOL, hardcore_path, sample_product


def soft_edge():
    """Two ferromagnetic spins with uniform fields."""
    return general_system(path_graph(2), [(0, 1), (0, 1)], [[1, 1], [1, 1]], {(0, 1): [[2, 1], [1, 2]]})


class TestDistances(unittest.TestCase):
    """Test cases for the distance helpers."""

    def test_total_variation(self) -> None:
        """Test TV between two distributions."""
        self.assertAlmostEqual(total_variation([0.5, 0.5], [1.0, 0.0]), 0.5)

    def test_max_pairwise_tv(self) -> None:
        """Test the largest pairwise TV over rows."""
        rows = np.array([[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]])
        self.assertAlmostEqual(max_pairwise_tv(rows), 1.0)
        self.assertEqual(max_pairwise_tv(rows[:1]), 0.0)

    def test_kl_divergence(self) -> None:
        """Test KL divergence, including the infinite case."""
        self.assertAlmostEqual(kl_divergence([0.5, 0.5], [0.5, 0.5]), 0.0)
        self.assertTrue(math.isinf(kl_divergence([0.5, 0.5], [1.0, 0.0])))


class TestTwoBlockConstants(unittest.TestCase):
    """Test cases for weak and strong correlation constants."""

    def setUp(self) -> None:
        """Set up test fixtures."""
        self.hardcore = enumerate_gibbs(hardcore_path(2, 1.0))
        self.soft = enumerate_gibbs(soft_edge())

    def test_view_validation(self) -> None:
        """Test that the blocks must partition the free vertices."""
        with self.assertRaises(InputValidationError):
            TwoBlockView.of(self.hardcore, [0], [])
        with self.assertRaises(InputValidationError):
            TwoBlockView.of(self.hardcore, [0], [0, 1])

    def test_product_is_uncorrelated(self) -> None:
        """Test that independent blocks give constant one."""
        table = enumerate_gibbs(sample_product((2, 3)))
        view = TwoBlockView.of(table, [0], [1])
        weak = weak_correlation_constant(view)
        self.assertAlmostEqual(weak.epsilon, 0.0)
        self.assertAlmostEqual(weak.constant, 1.0)
        strong = strong_correlation_constant(view)
        self.assertAlmostEqual(strong.var_constant, 1.0)

    def test_weak_correlation(self) -> None:
        """Test the weak correlation constant of the soft edge."""
        result = weak_correlation_constant(TwoBlockView.of(self.soft, [0], [1]))
        self.assertAlmostEqual(result.epsilon, 1.0 / 3.0)
        self.assertAlmostEqual(result.constant, 2.0)
        self.assertTrue(result.applicable)

    def test_weak_correlation_inapplicable(self) -> None:
        """Test that hard constraints break the weak premise."""
        result = weak_correlation_constant(TwoBlockView.of(self.hardcore, [0], [1]))
        self.assertFalse(result.applicable)
        self.assertAlmostEqual(result.epsilon, 1.0)

    def test_strong_correlation(self) -> None:
        """Test the strong constants of the hardcore edge."""
        result = strong_correlation_constant(TwoBlockView.of(self.hardcore, [0], [1]))
        self.assertAlmostEqual(result.eps_x, 0.5)
        self.assertAlmostEqual(result.eps_y, 0.5)
        self.assertAlmostEqual(result.constant("var"), 2.0)
        self.assertAlmostEqual(result.constant("ent"), 4.0 + 2.0 * math.log(3.0))

    def test_strong_correlation_inapplicable(self) -> None:
        """Test a frozen pair: proper two-colourings of an edge."""
        sys = general_system(path_graph(2), [(0, 1), (0, 1)], [[1, 1], [1, 1]], {(0, 1): [[0, 1], [1, 0]]})
        result = strong_correlation_constant(TwoBlockView.of(enumerate_gibbs(sys), [0], [1]))
        self.assertFalse(result.applicable)
        self.assertIsNone(result.constant("ent"))

    def test_constants_dominate_optimal(self) -> None:
        """Test that both two-block constants bound the optimal one."""
        optimal = optimal_block_variance_constant(self.soft, [(0,), (1,)])
        self.assertAlmostEqual(optimal, 1.5, places=8)
        view = TwoBlockView.of(self.soft, [0], [1])
        self.assertGreaterEqual(weak_correlation_constant(view).constant, optimal - 1e-9)
        self.assertGreaterEqual(strong_correlation_constant(view).var_constant, optimal - 1e-9)

    def test_pinsker_audit(self) -> None:
        """Test the product-of-TV against KL step."""
        view = TwoBlockView.of(enumerate_gibbs(hardcore_path(4, 1.0)), [0, 1], [2, 3])
        rng = np.random.default_rng(11)
        for _ in range(20):
            audit = pinsker_step_audit(view, rng.uniform(0.1, 2.0, view.table.size))
            self.assertTrue(audit.holds)
        with self.assertRaises(InputValidationError):
            pinsker_step_audit(view, np.zeros(view.table.size))


class TestInfluence(unittest.TestCase):
    """Test cases for influence matrices and the derived constants."""

    def setUp(self) -> None:
        """Set up test fixtures."""
        self.edge = enumerate_gibbs(hardcore_path(2, 1.0))

    def test_influence_matrix(self) -> None:
        """Test the hardcore edge influences."""
        matrix = influence_matrix(self.edge)
        np.testing.assert_allclose(matrix.entries, [[0.0, 0.5], [0.5, 0.0]])
        self.assertAlmostEqual(matrix.spectral_radius, 0.5)
        self.assertAlmostEqual(matrix.max_row_sum, 0.5)

    def test_influence_needs_two_free_vertices(self) -> None:
        """Test pinning down to a single free vertex."""
        with self.assertRaises(InputValidationError):
            influence_matrix(self.edge, Pinning.of({0: 0}))

    def test_pinning_level_scan(self) -> None:
        """Test the level scan on a path of three."""
        table = enumerate_gibbs(hardcore_path(3, 1.0))
        levels = pinning_level_scan(table)
        self.assertEqual([level.size for level in levels], [0, 1])
        self.assertEqual(levels[0].pinnings_examined, 1)
        self.assertGreater(levels[0].max_influence, 0.0)

    def test_crude_constants(self) -> None:
        """Test the crude closed forms."""
        result = crude_constants(0.5, 3, 0.1)
        self.assertAlmostEqual(result.constant("var"), 4.0)
        self.assertAlmostEqual(result.constant("ent"), (2.0 + math.log(10.0)) / 0.25)
        self.assertFalse(crude_constants(0.0, 3, 0.1).applicable)

    def test_crude_multivariable_constant(self) -> None:
        """Test the crude constant of the hardcore edge."""
        result = crude_multivariable_constant(self.edge)
        self.assertAlmostEqual(result.epsilon, 0.5)
        self.assertAlmostEqual(result.var_constant, 2.0)

    def test_spectral_independence_gap(self) -> None:
        """Test the product bound and its premise."""
        self.assertAlmostEqual(spectral_independence_gap([0.0, 0.0], 3).bound, 1.0 / 3.0)
        self.assertAlmostEqual(spectral_independence_gap([0.5], 2).bound, 0.25)
        self.assertFalse(spectral_independence_gap([1.0], 2).applicable)
        with self.assertRaises(InputValidationError):
            spectral_independence_gap([0.1], 3)

    def test_spectral_independence_matches_edge_gap(self) -> None:
        """Test that the bound is tight for the hardcore edge."""
        etas = spectral_independence_profile(self.edge)
        self.assertEqual(len(etas), 1)
        self.assertAlmostEqual(spectral_independence_gap(etas, 2).bound, 0.25)

    def test_product_has_no_influence(self) -> None:
        """Test that independent spins have zero spectral independence."""
        etas = spectral_independence_profile(enumerate_gibbs(sample_product()))
        np.testing.assert_allclose(etas, [0.0, 0.0])


class TestBoundSoundness(unittest.TestCase):
    """Test that every computed constant satisfies its inequality on random functions."""

    def setUp(self) -> None:
        """Set up test fixtures."""
        processor = DataProcessor(seed=23)
        self.suite = processor.generate_instance_suite(count=12, max_vertices=5)
        self.suite.append({"name": "soft-edge", "system": soft_edge()})
        self.rng = np.random.default_rng(29)
        self.applied = {"weak": 0, "strong": 0, "crude": 0}

    def _assert_sound(self, table, blocks, constant, kind, label) -> None:
        for f in random_test_functions(table.size, 500, kind, self.rng):
            check = block_factorization_check(table, blocks, f, constant, kind)
            self.assertGreaterEqual(check.relative_slack, -AUDIT_TOL, label)

    def test_constants_are_sound(self) -> None:
        """Test weak, strong and crude constants for variance and entropy."""
        for instance in self.suite:
            table = enumerate_gibbs(instance["system"])
            free = table.free_vertices
            half = max(1, len(free) // 2)
            x, y = free[:half], free[half:]
            view = TwoBlockView.of(table, x, y)
            weak = weak_correlation_constant(view)
            strong = strong_correlation_constant(view)
            crude = crude_multivariable_constant(table) if len(free) >= 2 else None
            for kind in ("var", "ent"):
                label = f"{instance['name']} {kind}"
                if weak.applicable:
                    self._assert_sound(table, [x, y], weak.constant, kind, f"weak {label}")
                    self.applied["weak"] += 1
                if strong.applicable:
                    self._assert_sound(table, [x, y], strong.constant(kind), kind, f"strong {label}")
                    self.applied["strong"] += 1
                if crude is not None and crude.applicable:
                    singles = [(v,) for v in free]
                    self._assert_sound(table, singles, crude.constant(kind), kind, f"crude {label}")
                    self.applied["crude"] += 1
        self.assertTrue(all(count > 0 for count in self.applied.values()), self.applied)


class TestMarginalEquivalence(unittest.TestCase):
    """Test cases for the marginal-equivalence transfer."""

    def test_equivalence_on_path(self) -> None:
        """Test equal constants with Z as the separating vertex."""
        table = enumerate_gibbs(hardcore_path(3, 1.0))
        result = marginal_equivalence_check(table, [0], [2], [1], entropy_samples=5, seed=1)
        self.assertTrue(result.equivalent)
        self.assertLess(result.entropy_audit.lift_residual, 1e-9)
        self.assertEqual(result.entropy_audit.samples, 5)

    def test_equivalence_on_longer_path(self) -> None:
        """Test a wider Z on a path of five."""
        table = enumerate_gibbs(hardcore_path(5, 2.0))
        result = marginal_equivalence_check(table, [0, 1], [4], [2, 3])
        self.assertTrue(result.equivalent)
        self.assertIsNone(result.entropy_audit)

    def test_invalid_blocks(self) -> None:
        """Test overlap and coverage checks."""
        table = enumerate_gibbs(hardcore_path(3, 1.0))
        with self.assertRaises(InputValidationError):
            marginal_equivalence_check(table, [0, 1], [1], [2])
        with self.assertRaises(InputValidationError):
            marginal_equivalence_check(table, [0], [2], [])


if __name__ == "__main__":
    unittest.main()
