"""
Test suite for SpinFactor.

Unit tests for the graph and spin-system models, the analysis services,
the utilities and the command-line entry point.
"""

__version__ = "1.0.0"
