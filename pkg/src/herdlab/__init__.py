"""Herding models of financial markets: jump processes, SDEs, oracles and spectral tools."""

__version__ = "0.1.0"
