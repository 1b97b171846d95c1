"""Pareto-seeded multi-start trajectory optimization over terrain cost fields."""

__version__ = "0.1.0"
