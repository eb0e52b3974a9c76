"""Numerical toolkit for the nonlocal isoperimetric (Gamow / Ohta-Kawasaki) functional."""

__version__ = "1.0.0"
