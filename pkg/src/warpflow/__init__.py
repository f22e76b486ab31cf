"""Numerical laboratory for invariant Ricci flow on the sphere."""

__version__ = "0.1.0"
