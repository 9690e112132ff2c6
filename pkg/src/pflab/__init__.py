"""Finite-dimensional Pauli-Fierz operators on lattices, with verification checks."""

__version__ = "0.1.0"
