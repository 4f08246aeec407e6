"""Stein's method and zero-bias checks for two-effect hierarchical linear recursions."""

__version__ = "0.1.0"

__all__ = ["__version__"]
