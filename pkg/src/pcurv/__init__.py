"""Computational toolkit for p-curvature, rigid gauge reduction and numerical monodromy."""

__version__ = "0.1.0"
