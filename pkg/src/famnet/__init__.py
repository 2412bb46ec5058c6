"""Dual-branch 2D/3D micro-expression recognition with hierarchical attention."""

__version__ = "0.1.0"
