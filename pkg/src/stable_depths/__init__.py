"""Deep Stable neural networks and their alpha-stable process limits."""

__version__ = "0.1.0"
