"""Mild solutions of a planar chemotaxis-Navier-Stokes system with measure-valued data."""

__version__ = "0.1.0"
