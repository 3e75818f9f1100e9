"""Gradient search on a sphere-multiobjectivized single-objective problem."""

__version__ = "0.1.0"
