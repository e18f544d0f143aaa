"""Grad-Rubin solvers for magnetohydrostatic equilibria on annular and shell domains."""

__version__ = "0.1.0"
