"""Spectral statistics of random Zakharov-Shabat operators."""

__version__ = "0.1.0"
