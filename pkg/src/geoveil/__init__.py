"""Spatial privacy exposure metrics and a dual-mode privacy-preserving sensing pipeline."""

__version__ = "0.1.0"
