"""Visibility-aware densification of Gaussian splatting scenes."""

__version__ = "1.0.0"
