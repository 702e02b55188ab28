"""Localized reduced basis models for elliptic PDEs on parameterized unfitted domains."""

__version__ = "0.1.0"
