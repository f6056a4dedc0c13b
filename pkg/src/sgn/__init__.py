"""Simple generative network: one feed-forward net trained on a kNN estimate of KL divergence."""

__version__ = "0.1.0"
