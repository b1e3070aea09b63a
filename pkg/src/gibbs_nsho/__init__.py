"""Numerical toolkit for Gibbs semigroups generated by rotated harmonic oscillators."""

__version__ = "0.1.0"
