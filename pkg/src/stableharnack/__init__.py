"""Numerical toolkit for Harnack-type inequalities of 2-D symmetric stable processes."""

__version__ = "0.1.0"
