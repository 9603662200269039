"""Simulation and exact laws of infinitely divisible fields through their spectral representations."""
__version__ = "0.1.0"
