"""Finite-size scaling of full eigenstate-thermalization error terms in spin chains."""

__version__ = "0.1.0"
