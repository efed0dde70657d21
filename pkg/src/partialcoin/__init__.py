"""Simulation of partial coins through nonnegative Sibuya-based decompositions."""

__version__ = "0.1.0"
