"""Finite-rank perturbations of large random matrices: simulation and predictions."""

__version__ = "0.1.0"
