"""Oscillation-model user dynamics on directed weighted networks."""

__version__ = "0.1.0"
