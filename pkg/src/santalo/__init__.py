"""Numerical laboratory for the Blaschke-Santalo inequality and its functional forms."""

__version__ = "0.1.0"
