"""Efficient-betweenness content caching and delivery for wireless networks."""

__version__ = "0.1.0"
