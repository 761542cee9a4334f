"""Exact, asymptotic and simulated laws of the lowest idle server in M/M/inf with ranked servers."""

__version__ = "1.0.0"
