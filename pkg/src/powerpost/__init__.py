"""Likelihood-tempering continuation for Bayesian parameter estimation."""
from ._backend import BACKEND

__version__ = "0.1.0"
