"""Causal synthetic data for recruitment and a fairness audit of linear candidate ranking."""

__version__ = "0.1.0"
