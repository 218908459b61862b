"""Observers for nonlinear systems built from one-parameter symmetry groups."""

__version__ = "0.1.0"
