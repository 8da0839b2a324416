"""Multivariate QSP state preparation and quantum Monte Carlo risk estimation."""

__version__ = "0.1.0"
