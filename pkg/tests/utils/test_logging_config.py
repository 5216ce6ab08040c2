"""
Unit tests for the logging helpers.
"""

import logging
import tempfile
import unittest
from pathlib import Path

from spinfactor.config import DEFAULT_LOG_LEVEL
from spinfactor.utils.logging_config import ROOT_LOGGER_NAME, get_logger, setup_logging


class TestLoggingConfig(unittest.TestCase):
    """Test cases for setup_logging and get_logger."""

    def tearDown(self) -> None:
        """Restore the default configuration."""
        setup_logging(DEFAULT_LOG_LEVEL)

    def test_child_logger_names(self) -> None:
        """Test that module loggers live under the package logger."""
        self.assertEqual(get_logger("composer").name, f"{ROOT_LOGGER_NAME}.composer")

    def test_handlers_do_not_stack(self) -> None:
        """Test that repeated setup replaces handlers."""
        setup_logging("INFO")
        logger = setup_logging("DEBUG")
        self.assertEqual(len(logger.handlers), 1)
        self.assertEqual(logger.level, logging.DEBUG)
        self.assertFalse(logger.propagate)

    def test_unknown_level_falls_back(self) -> None:
        """Test that an unknown level name means INFO."""
        self.assertEqual(setup_logging("chatty").level, logging.INFO)

    def test_log_file(self) -> None:
        """Test the optional file handler."""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "logs" / "run.log"
            logger = setup_logging("INFO", str(path))
            get_logger("test").info("enumerated %d states", 5)
            for handler in logger.handlers:
                handler.flush()
            self.assertIn("enumerated 5 states", path.read_text())
            setup_logging(DEFAULT_LOG_LEVEL)


if __name__ == "__main__":
    unittest.main()
