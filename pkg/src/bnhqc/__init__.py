"""Brachistochrone non-adiabatic holonomic gates on an NV electron--14N register."""

__version__ = "0.1.0"
