"""Vorticity measures of stationary London-type fields: special functions,
explicit solution families, an obstacle solver, weak-form verifiers and
measure extraction on uniform grids."""

__version__ = "0.1.0"
