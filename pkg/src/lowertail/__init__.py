"""Directed last-passage percolation conditioned on a lower-tail event."""
__version__ = "0.1.0"
