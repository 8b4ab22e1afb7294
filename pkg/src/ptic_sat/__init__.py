"""Replica-exchange stochastic local search for SAT."""

__version__ = "0.1.0"
