"""Randomized compiling plus zero-noise extrapolation for noisy VQE simulations."""

__version__ = "0.1.0"
