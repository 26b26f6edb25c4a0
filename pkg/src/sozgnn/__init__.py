"""Dual-task graph neural network for seizure-onset-zone and outcome prediction."""

__version__ = "0.1.0"
