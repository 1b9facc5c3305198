"""Estimation and certification of link states inside blacked-out grid areas."""

__version__ = "0.1.0"
