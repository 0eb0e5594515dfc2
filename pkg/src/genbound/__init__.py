"""Generalization-error bounds for differentially private learning algorithms."""

__version__ = "0.1.0"
