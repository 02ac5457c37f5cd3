"""Simulation and statistical checks for iterated random walks in random scenery."""

__version__ = "0.1.0"
