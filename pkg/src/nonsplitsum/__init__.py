"""Computational experiments around non-split sums of Hecke eigenvalues."""

__version__ = "0.1.0"
