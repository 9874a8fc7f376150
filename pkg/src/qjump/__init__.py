"""Simulation and analysis of jump-type quantum stochastic master equations."""

__version__ = "0.1.0"
