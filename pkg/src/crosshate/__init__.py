"""Weakly supervised causal disentanglement for cross-platform hate speech
detection."""

__version__ = "0.1.0"
