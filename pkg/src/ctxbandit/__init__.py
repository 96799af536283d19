"""Stochastic contextual bandits with a known reward function."""
