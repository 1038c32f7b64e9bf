"""Sparse graph-based sketching operators and a benchmark harness around them."""

__version__ = "0.1.0"
