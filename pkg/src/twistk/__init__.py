"""Twisted K-theory of tori at desk scale."""

__version__ = "0.1.0"
