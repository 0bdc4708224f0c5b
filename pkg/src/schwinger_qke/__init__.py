"""Vacuum pair production in pulsed bifrequent electric fields."""

__version__ = "0.1.0"
