"""Repeated balls-into-bins: simulation, Tetris coupling, exact oracle and Monte Carlo checks."""

__version__ = "0.1.0"
