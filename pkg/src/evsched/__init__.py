"""EV charging scheduling under a distribution transformer."""

__version__ = "0.1.0"
