"""regattack - white-box target adversarial attacks on regression models."""

__version__ = "0.1.0"
