"""Stability analysis of the force-based quasicontinuum method on a periodic chain."""

__version__ = "0.1.0"
