"""Crowd navigation workbench: ORCA crowd simulation, look-ahead reward
shaping, and attention-based value-network training for a unicycle robot."""

__version__ = "0.1.0"
