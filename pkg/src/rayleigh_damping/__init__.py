"""Rayleigh-equation spectra, Green's functions and linearized Euler evolution
for shear flows in the half plane."""

__version__ = "0.1.0"
