"""Dual-norm estimation for parametrized functionals on a P1 finite element space."""

__version__ = "0.1.0"
