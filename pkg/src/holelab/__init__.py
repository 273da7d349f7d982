"""Numerical laboratory for Poisson problems in domains with concentrated holes."""

__version__ = "0.1.0"
