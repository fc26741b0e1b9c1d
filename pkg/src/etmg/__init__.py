"""Coupled electrical and district-heating microgrid model with MPC operation."""

__version__ = "0.1.0"
