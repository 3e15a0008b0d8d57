"""Convex-integration laboratory for 2D Navier-Stokes-Reynolds flows on the torus."""

__version__ = "0.1.0"
