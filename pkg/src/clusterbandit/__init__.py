"""Synthetic personalization bandits with k-means state clustering.

Builds contextual-bandit environments whose rewards are the cosine similarity
of random latent features of states and actions, trains bandit versions of
DQN, A2C and PPO on raw or clustered states, and scores them with the
normalized return (0 for uniform play, 1 for optimal play).
"""
__version__ = "0.1.0"
