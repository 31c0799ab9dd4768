"""Numerical and exact verification of determinant formulas for the modular discriminant."""

__version__ = "0.1.0"
