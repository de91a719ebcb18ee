"""Optical control of the NV center ground-state spin."""

__version__ = "0.1.0"
