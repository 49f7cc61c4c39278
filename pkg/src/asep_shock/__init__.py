"""Numerical laboratory for stationary open ASEP in the shock region and its
triple-point scaling limit."""

__version__ = "0.1.0"
