"""Numerical toolkit for minimal-mass blow-up of the 2D cubic Zakharov-Kuznetsov equation."""
__version__ = "0.1.0"
