"""Constant-weight keyword PIR on a small leveled BFV implementation."""

__version__ = "0.1.0"
