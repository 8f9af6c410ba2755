"""Urysohn spaces over distance monoids and oligomorphic structures at finite scale."""

__version__ = "0.1.0"
