"""cascadelab: simulation and verification laboratory for multiplicative
cascade measures across the freezing transition."""

__version__ = "0.1.0"
