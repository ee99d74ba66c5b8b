"""Cahn-Hilliard-Navier-Stokes with dynamic boundary conditions on a periodic channel."""

__version__ = "0.1.0"
