"""Exact Gaussian score inference and LAN diagnostics for mixed fractional Brownian motion."""

__version__ = "0.1.0"
