"""Numerical verification of projective spherically symmetric Finsler
metrics with constant flag curvature."""

__version__ = "0.1.0"
