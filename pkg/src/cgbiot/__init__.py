"""Continuous Galerkin space-time finite elements for the dynamic Biot system."""

__version__ = "0.1.0"
