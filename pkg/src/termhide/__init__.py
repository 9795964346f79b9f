"""Modular logic programs with hidden functors, run-time assertion checking
and shallow checks at module boundaries."""

__version__ = "0.1.0"
