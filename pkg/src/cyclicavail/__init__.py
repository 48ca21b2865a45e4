"""Cyclic Markov availability models."""
