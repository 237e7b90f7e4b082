"""Interacting random walk loop soups and the equivalent random path model."""

__version__ = "0.1.0"
