"""Finite-element simulator for curvature-driven pattern formation in two-phase membranes."""

__version__ = "1.0.0"
