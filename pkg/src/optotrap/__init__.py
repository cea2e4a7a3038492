"""Radiation-pressure trapping of a mirror in a two-field detuned cavity."""

__version__ = "0.1.0"
