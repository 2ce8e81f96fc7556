"""Paracontrolled simulation of the stochastic 3D Navier-Stokes equations on a periodic lattice."""

__version__ = "0.1.0"
