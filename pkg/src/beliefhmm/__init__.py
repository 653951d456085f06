"""Probabilistic and belief-function hidden Markov models for isolated-unit recognition."""

__version__ = "0.1.0"
