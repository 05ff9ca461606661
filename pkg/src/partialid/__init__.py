"""Partial identification of counterfactual probabilities in hidden-variable causal models."""

__version__ = "0.1.0"
