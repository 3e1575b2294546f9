"""Rank-2 commuting difference operators built from elliptic inverse data."""

__version__ = "0.1.0"
