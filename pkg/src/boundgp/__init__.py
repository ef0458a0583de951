"""Gaussian-process power-curve models for bounded targets."""

__version__ = "0.1.0"
