"""Timescale parameters and singular-perturbation reductions for mass-action networks."""

__version__ = "0.1.0"
