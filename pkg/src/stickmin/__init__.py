"""Stick-number minimization of polygonal knots."""

__version__ = "0.1.0"
