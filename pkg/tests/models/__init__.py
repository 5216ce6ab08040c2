"""Unit tests for the graph and spin-system models."""
