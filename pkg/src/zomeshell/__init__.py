"""Zometool-core hybrid fabrication planner."""

__version__ = "0.1.0"
