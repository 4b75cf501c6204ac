"""Attitude guidance and control under pointing and reaction-wheel constraints."""

__version__ = "0.1.0"
