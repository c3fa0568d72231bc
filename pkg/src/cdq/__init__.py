"""Chermak-Delgado lattices of class-2 p-groups via alternating forms."""

__version__ = "0.1.0"
