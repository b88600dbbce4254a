"""Simulate box fragmentation and check the Benford behavior of frame volumes."""

__version__ = "0.1.0"
