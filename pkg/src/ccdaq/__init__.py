"""Simulated large-area CCD data-acquisition and control suite."""

__version__ = "0.1.0"
