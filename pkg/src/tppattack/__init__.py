"""Adversarial attacks and robust training for neural marked temporal
point processes."""

__version__ = "0.1.0"
