"""Curvature frames, soliton identity checks and potential fitting."""

__version__ = "0.1.0"
