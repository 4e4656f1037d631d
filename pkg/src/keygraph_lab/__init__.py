"""Monte Carlo and closed-form analysis of q-composite key graphs over on/off channels."""

__version__ = "0.1.0"
