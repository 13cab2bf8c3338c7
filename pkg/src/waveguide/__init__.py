"""Numerical laboratory for quasilinear wave equations on R^3 x [a, b]."""

__version__ = "0.1.0"
