"""Quantitative convex integration for the hexagonal-to-rhombic three-well inclusion."""

__version__ = "0.1.0"
