"""Lévy-driven continuous-time moving averages observed at renewal times.

Simulation, sample statistics and their asymptotic variances, with the
Ornstein-Uhlenbeck case worked out in closed form.
"""

__version__ = "0.1.0"
