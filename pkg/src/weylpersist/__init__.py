"""Persistence exponents of random Weyl polynomials, estimated and certified."""

__version__ = "0.1.0"
