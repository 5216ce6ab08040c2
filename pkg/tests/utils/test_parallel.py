"""
Unit tests for the ordered worker pool.
"""

import os
import unittest
from unittest.mock import patch

from spinfactor.config import THREADS_ENV_VAR
from spinfactor.exceptions import InputValidationError
from spinfactor.utils.parallel import ordered_map, resolve_thread_count


class TestResolveThreadCount(unittest.TestCase):
    """Test cases for thread count resolution."""

    def test_explicit_value(self) -> None:
        """Test that an explicit count wins."""
        with patch.dict(os.environ, {THREADS_ENV_VAR: "7"}):
            self.assertEqual(resolve_thread_count(2), 2)

    def test_environment_variable(self) -> None:
        """Test the environment fallback."""
        with patch.dict(os.environ, {THREADS_ENV_VAR: "3"}):
            self.assertEqual(resolve_thread_count(), 3)

    def test_cpu_count_default(self) -> None:
        """Test the CPU count fallback."""
        with patch.dict(os.environ, {}, clear=True):
            self.assertGreaterEqual(resolve_thread_count(), 1)

    def test_invalid_values(self) -> None:
        """Test non-integer and non-positive counts."""
        with patch.dict(os.environ, {THREADS_ENV_VAR: "many"}):
            with self.assertRaises(InputValidationError):
                resolve_thread_count()
        with self.assertRaises(InputValidationError):
            resolve_thread_count(0)


class TestOrderedMap(unittest.TestCase):
    """Test cases for ordered_map."""

    def test_order_is_preserved(self) -> None:
        """Test that results follow input order for any worker count."""
        items = list(range(40))
        expected = [i * i for i in items]
        for workers in (1, 2, 8):
            self.assertEqual(ordered_map(lambda x: x * x, items, workers), expected)

    def test_empty_input(self) -> None:
        """Test an empty work list."""
        self.assertEqual(ordered_map(lambda x: x, [], 4), [])


if __name__ == "__main__":
    unittest.main()
