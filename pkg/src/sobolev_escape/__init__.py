"""Escape functions for degree-0 homogeneous Hamiltonians and Sobolev growth."""

__version__ = "0.1.0"
