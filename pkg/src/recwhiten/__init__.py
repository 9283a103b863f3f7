"""Recursive whitening backend for embedding-based speaker verification.

Core pieces: corpus file I/O, covariance/whitening linear algebra, the
recursive whitening transform with maximum-likelihood sub-corpus selection,
two-covariance PLDA scoring, and detection-cost evaluation metrics.
"""

__version__ = "0.1.0"
