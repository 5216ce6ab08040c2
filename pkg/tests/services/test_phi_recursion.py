"""
Unit tests for the recursive multiplier solver.
"""

import math
import unittest

from spinfactor.exceptions import InputValidationError
from spinfactor.services.phi_recursion import (
    LOG2,
    LOG_LOGT,
    minimal_log_k0,
    phi_bound,
    phi_recursion_solve,
    recursion_form,
)


class TestRecursionForm(unittest.TestCase):
    """Test cases for recursion forms and their side conditions."""

    def test_invalid_parameters(self) -> None:
        """Test exponent and form validation."""
        with self.assertRaises(InputValidationError):
            recursion_form(LOG_LOGT, 0.5)
        with self.assertRaises(InputValidationError):
            recursion_form(LOG2, 0.0)
        with self.assertRaises(InputValidationError):
            recursion_form("log3", 2.0)

    def test_minimal_log_k0_is_tight(self) -> None:
        """Test that the side condition holds at L0 and fails just below."""
        for form in (LOG_LOGT, LOG2):
            spec = recursion_form(form, 2.0)
            low = minimal_log_k0(spec)
            self.assertGreaterEqual(spec.side_condition(low), 0.0)
            self.assertLess(spec.side_condition(low * 0.99), 0.0)
            self.assertGreaterEqual(spec.side_condition(low * 10.0), 0.0)

    def test_log_logt_threshold_magnitude(self) -> None:
        """Test that 100 t^3 (log log k)^3 <= log k needs a large k0."""
        low = minimal_log_k0(recursion_form(LOG_LOGT, 2.0))
        self.assertGreater(low, 1e6)
        self.assertLess(low, 1e7)

    def test_phi_bound_base_case(self) -> None:
        """Test that arguments below k0 return phi(k0)."""
        spec = recursion_form(LOG2, 2.0)
        self.assertEqual(phi_bound(spec, 5.0, 10.0, 3.0), 3.0)

    def test_phi_bound_one_step(self) -> None:
        """Test one recursive step of the log2 form."""
        spec = recursion_form(LOG2, 2.0)
        low = minimal_log_k0(spec)
        value = phi_bound(spec, 2.0 * low, low, 1.0)
        self.assertAlmostEqual(value, 6.0 * 2.0 * low)


class TestPhiRecursionSolve(unittest.TestCase):
    """Test cases for the tabulated solver."""

    def test_envelope_holds(self) -> None:
        """Test the closed-form envelopes for both forms."""
        for form, exponent in ((LOG_LOGT, 3), (LOG2, 2)):
            result = phi_recursion_solve(2.0, form=form, phi0=2.5)
            self.assertTrue(result.holds, form)
            self.assertEqual(result.log_k0, result.minimal_log_k0)
            top = result.rows[-1]
            self.assertAlmostEqual(top.envelope, 2.5 * top.log_k ** exponent)
            self.assertTrue(any(row.log_k >= result.log_k0 for row in result.rows))

    def test_explicit_log_k0(self) -> None:
        """Test a base case above the minimum and one below it."""
        spec = recursion_form(LOG_LOGT, 1.5)
        low = minimal_log_k0(spec)
        result = phi_recursion_solve(1.5, log_k0=2.0 * low)
        self.assertEqual(result.log_k0, 2.0 * low)
        self.assertTrue(result.holds)
        with self.assertRaises(InputValidationError):
            phi_recursion_solve(1.5, log_k0=low / 2.0)

    def test_invalid_inputs(self) -> None:
        """Test phi0 and grid validation."""
        with self.assertRaises(InputValidationError):
            phi_recursion_solve(2.0, phi0=0.0)
        with self.assertRaises(InputValidationError):
            phi_recursion_solve(2.0, grid_points=1)

    def test_result_dict(self) -> None:
        """Test the serialised result."""
        data = phi_recursion_solve(2.0, form=LOG2, d=1.5).to_dict()
        self.assertEqual(data["form"], LOG2)
        self.assertEqual(data["d"], 1.5)
        self.assertTrue(data["envelope_holds"])
        self.assertTrue(all(len(row) == 4 for row in data["rows"]))
        self.assertTrue(all(math.isfinite(row[1]) for row in data["rows"]))


if __name__ == "__main__":
    unittest.main()
