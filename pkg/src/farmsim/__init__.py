"""Deterministic grid-production simulator and ensemble analysis toolkit."""

__version__ = "0.1.0"
