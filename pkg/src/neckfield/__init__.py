"""Numerical laboratory for the field concentration between two nearly
touching perfect conductors: closed-form rates and constants with a
quadrature oracle, a thin-gap finite element solver, and sweep-based
verification of the blow-up asymptotics."""

__version__ = "0.1.0"
