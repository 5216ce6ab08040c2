"""Unit tests for the analysis services."""
