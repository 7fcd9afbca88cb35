"""Influence pathway discovery over social-media interaction graphs."""

__version__ = "0.1.0"
