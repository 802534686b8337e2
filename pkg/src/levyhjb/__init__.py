"""Levy-driven channel models, fractional generators and HJB control for downlink power."""

__version__ = "0.1.0"
