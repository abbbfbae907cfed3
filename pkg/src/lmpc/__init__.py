"""Learning model predictive control for constrained linear systems."""
__version__ = "0.1.0"
