"""Generative modeling engine for in-hospital MRSA test-result sequences."""

__version__ = "0.1.0"
