"""Numerical laboratory for finite-time blow-up in the one-dimensional
complex-valued semilinear wave equation with power nonlinearity.

The package simulates the Cauchy problem, reconstructs the blow-up curve
T(x) with its slope and phase fields, works in self-similar variables on
the light-cone cylinder, maintains the Lyapunov-energy ledger, and probes
the rigidity of bounded cylinder solutions against the explicit stationary
and connecting families.
"""

__version__ = "0.1.0"
