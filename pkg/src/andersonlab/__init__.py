"""Numerical laboratory for the 3D Anderson–Bernoulli model and discrete
unique continuation on Z^3."""

__version__ = "0.1.0"
