"""Distributed string sorting on a simulated message-passing machine."""

__version__ = "0.1.0"
