"""Criticality-driven exploration, clustering and reduction of driving scenarios."""

__version__ = "0.1.0"
