"""Simulation-in-the-loop gate for generated vehicle controller code."""

__version__ = "0.1.0"
