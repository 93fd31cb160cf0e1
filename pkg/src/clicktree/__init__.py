"""Clickstream feature extraction and gradient-boosted trees for predicting
per-problem end-unit assignment scores, with difficulty and cohort analytics."""

__version__ = "0.1.0"
