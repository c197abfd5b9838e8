"""Discrete-time Hawkes process: simulation, compensator, exact laws and limit checks."""

__version__ = "0.1.0"
