"""
SpinFactor package.

Exact-oracle toolkit for approximate tensorization of variance and entropy
in spin systems: separator decompositions, factorization-constant
calculators, recursive composition and Glauber dynamics.
"""

__version__ = "1.0.0"
__author__ = "SpinFactor Team"
