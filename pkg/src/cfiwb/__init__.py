"""Workbench for CFI structures over Z_m, their isomorphism, and WL / invertible-map equivalences."""

__version__ = "0.1.0"
