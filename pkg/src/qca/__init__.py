"""Exact-arithmetic workbench for generalized quantum current algebras."""

__version__ = "0.1.0"
