"""Discrete elastic models on hexagonal lattices over reference metrics."""

__version__ = "0.1.0"
