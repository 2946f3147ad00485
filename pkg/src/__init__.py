"""Kernel intensity estimation and bandwidth selection for spatial point patterns."""

__version__ = "0.3.0"
