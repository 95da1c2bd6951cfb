"""Elastic curve flows and embeddedness thresholds for closed curves."""

__version__ = "0.1.0"
